# ruff : noqa: F401
from dgnflow.graph.adjacency import build_adjacency, normalize_adjacency
from dgnflow.graph.graph import Graph, NormalizedAdjacency
from dgnflow.graph.io import load_content_cites, load_generic, save_generic
from dgnflow.graph.propagation import edge_aggregate, gather_rows, segment_softmax, spmm
from dgnflow.graph.splits import Split, generate_split, mask_features
