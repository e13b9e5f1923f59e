import numpy as np
import scipy.sparse as sp

from dgnflow.graph.graph import Graph, NormalizedAdjacency

__all__ = ["build_adjacency", "normalize_adjacency"]


def build_adjacency(n, sources, targets):
    """Symmetric binary CSR adjacency from directed edge lists.

    Duplicate edges and self-loops are dropped.

    Parameters
    ----------
    n : int
        Number of nodes.
    sources, targets : array_like of int
        Endpoints of the directed edges.

    Returns
    -------
    scipy.sparse.csr_matrix
    """
    sources = np.asarray(sources, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    keep = sources != targets
    sources, targets = sources[keep], targets[keep]
    rows = np.concatenate([sources, targets])
    cols = np.concatenate([targets, sources])
    data = np.ones(rows.size, dtype=np.float64)
    a = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    a.sum_duplicates()
    a.data[:] = 1.0
    a.sort_indices()
    return a


def normalize_adjacency(g, dtype=np.float64):
    """Symmetrically normalize the adjacency of ``g`` with self-loops.

    Computes ``D^-1/2 (A + I) D^-1/2`` where ``D`` counts the self-loop, so an
    isolated node gets a single entry of 1.

    Parameters
    ----------
    g : Graph or scipy.sparse matrix
        Graph (or its binary adjacency).
    dtype : numpy dtype, optional
        Dtype of the stored values, by default float64

    Returns
    -------
    NormalizedAdjacency
    """
    adjacency = g.adjacency if isinstance(g, Graph) else sp.csr_matrix(g)
    n = adjacency.shape[0]
    a = (adjacency + sp.identity(n, format="csr")).tocsr()
    a.sort_indices()
    degree = np.diff(a.indptr).astype(np.float64)
    rows = np.repeat(np.arange(n), np.diff(a.indptr))
    values = 1.0 / np.sqrt(degree[rows] * degree[a.indices])
    ahat = sp.csr_matrix((values.astype(dtype), a.indices, a.indptr), shape=(n, n))
    return NormalizedAdjacency(ahat)
