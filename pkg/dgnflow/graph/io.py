"""Dataset readers and writers.

Two on-disk formats are supported.

content/cites
    The plain-text Cora/Citeseer distribution. Every line of the content
    file reads ``<id> <feature> ... <feature> <label>``, every line of the
    cites file reads ``<cited id> <citing id>``, whitespace separated.

generic directory
    ``edges.csv`` (two integer columns), ``features.csv`` (n rows of d
    values), ``labels.csv`` (n integers) and ``splits.json`` (integer index
    arrays named ``"train"``, ``"val"`` and ``"test"``). CSV files are UTF-8,
    comma separated, and may start with a header row.

Example::

    from dgnflow.graph import load_content_cites, save_generic

    g = load_content_cites("cora/cora.content", "cora/cora.cites")
    save_generic(g, "cora_generic")
"""

import json
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from dgnflow.errors import FormatError
from dgnflow.graph.adjacency import build_adjacency
from dgnflow.graph.graph import Graph

__all__ = ["load_content_cites", "load_generic", "save_generic"]


def _read_lines(path):
    with open(path, encoding="utf-8") as f:
        return [
            (lineno, line.split())
            for lineno, line in enumerate(f, start=1)
            if line.strip()
        ]


def load_content_cites(content_path, cites_path, name=None):
    """Read a graph in the content/cites format.

    Node order follows the content file. String labels are numbered in order
    of first appearance. Edges are symmetrized, duplicates and self-loops are
    dropped, and cites lines naming an unknown node are skipped with a single
    warning reporting how many were skipped.

    Parameters
    ----------
    content_path, cites_path : str or path-like
    name : str, optional
        Dataset name, by default the stem of ``content_path``.

    Returns
    -------
    Graph
        Graph with empty split masks.

    Raises
    ------
    FormatError
        For an empty file, ragged feature rows, non-numeric features, a
        repeated node id or a cites line without exactly two fields.
    """
    content = _read_lines(content_path)
    if not content:
        raise FormatError("file contains no nodes", content_path)

    ids = {}
    rows = []
    labels = []
    class_index = {}
    n_features = None
    for lineno, tokens in content:
        if len(tokens) < 3:
            raise FormatError(
                "expected '<id> <features...> <label>'", content_path, lineno
            )
        node_id, values, label = tokens[0], tokens[1:-1], tokens[-1]
        if n_features is None:
            n_features = len(values)
        elif len(values) != n_features:
            raise FormatError(
                f"expected {n_features} features, found {len(values)}",
                content_path,
                lineno,
            )
        if node_id in ids:
            raise FormatError(f"duplicate node id '{node_id}'", content_path, lineno)
        try:
            rows.append([float(v) for v in values])
        except ValueError as e:
            raise FormatError(str(e), content_path, lineno) from None
        ids[node_id] = len(ids)
        labels.append(class_index.setdefault(label, len(class_index)))

    cites = _read_lines(cites_path)
    if not cites:
        raise FormatError("file contains no edges", cites_path)
    sources, targets = [], []
    skipped = 0
    for lineno, tokens in cites:
        if len(tokens) != 2:
            raise FormatError("expected '<cited> <citing>'", cites_path, lineno)
        cited, citing = tokens
        if cited not in ids or citing not in ids:
            skipped += 1
            continue
        sources.append(ids[citing])
        targets.append(ids[cited])
    if skipped:
        warnings.warn(
            f"skipped {skipped} cites lines referring to unknown node ids "
            f"in {cites_path}",
            stacklevel=2,
        )

    n = len(ids)
    return Graph(
        adjacency=build_adjacency(n, sources, targets),
        features=np.array(rows, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64),
        n_classes=len(class_index),
        class_names=tuple(class_index),
        name=name if name is not None else Path(content_path).stem,
    )


def _read_csv(path, header):
    try:
        return pd.read_csv(
            path, header=header, skip_blank_lines=True, float_precision="round_trip"
        )
    except pd.errors.EmptyDataError:
        raise FormatError("file is empty", path) from None
    except pd.errors.ParserError as e:
        raise FormatError(str(e), path) from None


def _read_numeric(path, dtype):
    """Read a numeric CSV, with or without a header row, into a 2-D array."""
    df = _read_csv(path, header=None)
    # 1-based file line of every row
    lines = np.arange(1, len(df) + 1)
    if not all(pd.api.types.is_numeric_dtype(t) for t in df.dtypes):
        first = pd.to_numeric(df.iloc[0], errors="coerce")
        if first.isna().all():
            # header row
            df = _read_csv(path, header=0)
            lines = np.arange(2, len(df) + 2)
    values = df
    if not all(pd.api.types.is_numeric_dtype(t) for t in df.dtypes):
        values = df.apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1).to_numpy()
    if bad.any():
        raise FormatError("missing or non-numeric value", path, int(lines[bad][0]))
    arr = values.to_numpy(dtype=np.float64)
    if np.issubdtype(dtype, np.integer):
        fractional = np.any(arr != np.round(arr), axis=1)
        if fractional.any():
            raise FormatError("expected integers", path, int(lines[fractional][0]))
        arr = arr.astype(dtype)
    return arr, lines


def load_generic(directory, name=None):
    """Read a graph stored in the generic directory format.

    Parameters
    ----------
    directory : str or path-like
        Directory holding ``edges.csv``, ``features.csv``, ``labels.csv`` and
        ``splits.json``.
    name : str, optional
        Dataset name, by default the directory name.

    Returns
    -------
    Graph

    Raises
    ------
    FormatError
        For out-of-range node indices, inconsistent row counts, malformed
        values or overlapping splits.
    """
    directory = Path(directory)
    features, _ = _read_numeric(directory / "features.csv", np.float64)
    n = features.shape[0]
    labels, _ = _read_numeric(directory / "labels.csv", np.int64)
    if labels.shape[1] != 1:
        raise FormatError("expected a single label column", directory / "labels.csv")
    labels = labels[:, 0]
    if labels.size != n:
        raise FormatError(
            f"{labels.size} labels for {n} feature rows", directory / "labels.csv"
        )
    if labels.size and labels.min() < 0:
        raise FormatError("labels must be non-negative", directory / "labels.csv")

    edges_path = directory / "edges.csv"
    edges, lines = _read_numeric(edges_path, np.int64)
    if edges.size and edges.shape[1] != 2:
        raise FormatError("expected two columns", edges_path)
    edges = edges.reshape(-1, 2)
    out_of_range = (edges < 0) | (edges >= n)
    if out_of_range.any():
        line = int(lines[out_of_range.any(axis=1)][0])
        raise FormatError(f"node index out of range [0, {n})", edges_path, line)

    splits_path = directory / "splits.json"
    with open(splits_path, encoding="utf-8") as f:
        try:
            splits = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(e.msg, splits_path, e.lineno) from None
    masks = {}
    for key in ("train", "val", "test"):
        if key not in splits:
            raise FormatError(f"missing '{key}' indices", splits_path)
        index = np.asarray(splits[key], dtype=np.int64)
        if index.size and (index.min() < 0 or index.max() >= n):
            raise FormatError(f"'{key}' index out of range [0, {n})", splits_path)
        mask = np.zeros(n, dtype=bool)
        mask[index] = True
        masks[key] = mask
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        if (masks[a] & masks[b]).any():
            raise FormatError(f"'{a}' and '{b}' indices overlap", splits_path)

    return Graph(
        adjacency=build_adjacency(n, edges[:, 0], edges[:, 1]),
        features=features,
        labels=labels,
        train_mask=masks["train"],
        val_mask=masks["val"],
        test_mask=masks["test"],
        name=name if name is not None else directory.name,
    )


def save_generic(g, directory):
    """Write ``g`` in the generic directory format.

    Every undirected edge is written once with the smaller index first.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    upper = g.adjacency.tocoo()
    keep = upper.row < upper.col
    edges = pd.DataFrame({"source": upper.row[keep], "target": upper.col[keep]})
    edges = edges.sort_values(["source", "target"])
    edges.to_csv(directory / "edges.csv", header=False, index=False)
    pd.DataFrame(g.features).to_csv(
        directory / "features.csv", header=False, index=False, float_format="%.17g"
    )
    pd.DataFrame(g.labels).to_csv(directory / "labels.csv", header=False, index=False)
    splits = {
        "train": np.flatnonzero(g.train_mask).tolist(),
        "val": np.flatnonzero(g.val_mask).tolist(),
        "test": np.flatnonzero(g.test_mask).tolist(),
    }
    with open(directory / "splits.json", "w", encoding="utf-8") as f:
        json.dump(splits, f)
