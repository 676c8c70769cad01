"""Text formats: edge lists and node-indexed CSV tables.

Edge list
    one ``i j`` pair per line, 0-indexed, ``i < j``.  Blank lines and lines
    starting with ``#`` are ignored; a ``# nodes N`` comment fixes the node
    count so trailing isolated nodes survive a round trip.
CSV
    ``node,pi_1,...,pi_K`` for memberships, ``node,flag,pi_1,...,pi_K`` for
    estimates and ``node,theta`` for degree parameters.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from dcmm.errors import DcmmError

_NODES_RE = re.compile(r"^#\s*nodes\s+(\d+)\s*$")


def fmt(x: float) -> str:
    """Shortest round-trip representation, stable across runs."""
    return repr(float(x))


def write_edge_list(path, a) -> None:
    a = np.asarray(a)
    n = a.shape[0]
    rows, cols = np.nonzero(np.triu(a, 1))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes {n}\n")
        for i, j in zip(rows, cols):
            fh.write(f"{i} {j}\n")


def read_edge_list(path, n: int | None = None) -> np.ndarray:
    """Dense adjacency from an edge list; ``n`` overrides the header and the max index."""
    edges = []
    header_n = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _NODES_RE.match(line)
                if m:
                    header_n = int(m.group(1))
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DcmmError(f"{path}:{lineno}: expected two node ids")
            i, j = int(parts[0]), int(parts[1])
            if i == j or i < 0 or j < 0:
                raise DcmmError(f"{path}:{lineno}: invalid pair {i} {j}")
            edges.append((min(i, j), max(i, j)))
    top = max((j for _, j in edges), default=-1) + 1
    size = n if n is not None else (header_n if header_n is not None else top)
    if size < top:
        raise DcmmError(f"node id {top - 1} out of range for n={size}")
    a = np.zeros((size, size))
    if edges:
        idx = np.array(edges)
        if len(set(edges)) != len(edges):
            raise DcmmError(f"{path}: duplicate edges")
        a[idx[:, 0], idx[:, 1]] = 1.0
        a[idx[:, 1], idx[:, 0]] = 1.0
    return a


def write_membership_csv(path, pi, flags=None) -> None:
    pi = np.asarray(pi, dtype=float)
    K = pi.shape[1]
    header = ["node"] + (["flag"] if flags is not None else []) + [f"pi_{k + 1}" for k in range(K)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(pi):
            lead = [i] + ([flags[i]] if flags is not None else [])
            w.writerow(lead + [fmt(x) for x in row])


def read_membership_csv(path) -> tuple[np.ndarray, list[str] | None]:
    """Return ``(pi, flags)``; ``flags`` is None when the file has no flag column."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    if not header or header[0] != "node":
        raise DcmmError(f"{path}: first column must be 'node'")
    has_flag = len(header) > 1 and header[1] == "flag"
    start = 2 if has_flag else 1
    if not all(h.startswith("pi_") for h in header[start:]) or len(header) == start:
        raise DcmmError(f"{path}: expected pi_1..pi_K columns")
    nodes = [int(r[0]) for r in rows]
    if nodes != list(range(len(rows))):
        raise DcmmError(f"{path}: node column must be 0..n-1 in order")
    pi = np.array([[float(x) for x in r[start:]] for r in rows])
    flags = [r[1] for r in rows] if has_flag else None
    return pi, flags


def write_vector_csv(path, name: str, values) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", name])
        for i, x in enumerate(values):
            w.writerow([i, fmt(x)])


def read_vector_csv(path, name: str | None = None) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    if len(header) != 2 or header[0] != "node" or (name is not None and header[1] != name):
        raise DcmmError(f"{path}: expected header node,{name or '<value>'}")
    return np.array([float(r[1]) for r in rows])


def write_table(path, rows: list[dict], columns: list[str]) -> None:
    """Write dict rows; floats use :func:`fmt` so output bytes are reproducible."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in (row[c] for c in columns)])
