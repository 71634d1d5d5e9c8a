"""Aggregation trees and summing matrices for hierarchical time series.

A hierarchy is a rooted tree of series labels.  Every internal series is,
at each time point, the sum of the leaf series below it; the summing
matrix ``S`` (n x m) maps the m leaf values to all n series.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class HierarchyError(ValueError):
    """Raised when an edge list does not describe a valid aggregation tree."""


@dataclass(frozen=True)
class Hierarchy:
    """Immutable aggregation tree with its summing matrix.

    Attributes
    ----------
    labels : tuple[str, ...]
        All series labels in canonical order: level-major (root first),
        lexicographic within each level.  Row order of ``S``.
    parent_of : dict[str, str]
        Child label -> parent label; the root has no entry.
    n : int
        Total number of series.
    m : int
        Number of bottom-level (leaf) series.
    S : np.ndarray
        n x m binary summing matrix; column order is ``bottom_labels``.
    bottom_labels : tuple[str, ...]
        Leaf labels in column order (lexicographic).
    bottom_idx : np.ndarray
        Row index of each leaf, aligned with ``bottom_labels``; the
        submatrix ``S[bottom_idx]`` is the m x m identity.
    depth_of : dict[str, int]
        Label -> level (root at 0).
    """

    labels: tuple[str, ...]
    parent_of: dict[str, str]
    n: int
    m: int
    S: np.ndarray = field(repr=False)
    bottom_labels: tuple[str, ...]
    bottom_idx: np.ndarray = field(repr=False)
    depth_of: dict[str, int]

    @property
    def root(self) -> str:
        return self.labels[0]

    def levels(self) -> dict[int, list[str]]:
        """Labels grouped by level, in canonical order."""
        out: dict[int, list[str]] = {}
        for lab in self.labels:
            out.setdefault(self.depth_of[lab], []).append(lab)
        return out

    def row_index(self, label: str) -> int:
        return self.labels.index(label)


def build_hierarchy(edges: list[tuple[str, str]]) -> Hierarchy:
    """Build a :class:`Hierarchy` from (parent, child) edges.

    Ordering is deterministic regardless of the order the edges are given
    in: rows are level-major then lexicographic, columns are the leaves in
    lexicographic order.

    Raises
    ------
    HierarchyError
        On duplicate children, multiple roots, cycles, or an empty tree.
    """
    if not edges:
        raise HierarchyError("empty edge list: leaf set empty")

    children: dict[str, list[str]] = {}
    parent_of: dict[str, str] = {}
    nodes: set[str] = set()
    for parent, child in edges:
        nodes.add(parent)
        nodes.add(child)
        if child in parent_of:
            raise HierarchyError(f"duplicate child {child!r}")
        parent_of[child] = parent
        children.setdefault(parent, []).append(child)

    roots = sorted(nodes - set(parent_of))
    if len(roots) == 0:
        raise HierarchyError("cycle detected: no root node")
    if len(roots) > 1:
        raise HierarchyError(f"multiple roots: {roots}")
    root = roots[0]

    # BFS from the root; unreachable nodes imply a cycle among them.
    depth_of = {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for node in frontier:
            for child in children.get(node, []):
                if child in depth_of:
                    raise HierarchyError(f"cycle detected at {child!r}")
                depth_of[child] = depth_of[node] + 1
                nxt.append(child)
        frontier = nxt
    if set(depth_of) != nodes:
        missing = sorted(nodes - set(depth_of))
        raise HierarchyError(f"cycle detected: unreachable nodes {missing}")

    labels = tuple(sorted(nodes, key=lambda lab: (depth_of[lab], lab)))
    leaves = tuple(sorted(node for node in nodes if node not in children))
    n, m = len(labels), len(leaves)
    if m < 1:
        raise HierarchyError("leaf set empty")
    if n <= m:
        raise HierarchyError(f"need n > m, got n={n}, m={m}")

    col = {lab: j for j, lab in enumerate(leaves)}
    S = np.zeros((n, m))

    def leaf_cols(node: str) -> list[int]:
        if node in col and node not in children:
            return [col[node]]
        out: list[int] = []
        for child in children[node]:
            out.extend(leaf_cols(child))
        return out

    for i, lab in enumerate(labels):
        S[i, leaf_cols(lab)] = 1.0

    bottom_idx = np.array([labels.index(lab) for lab in leaves])
    return Hierarchy(
        labels=labels,
        parent_of=parent_of,
        n=n,
        m=m,
        S=S,
        bottom_labels=leaves,
        bottom_idx=bottom_idx,
        depth_of=depth_of,
    )


def check_coherent(h: Hierarchy, y: np.ndarray, tol: float = 0.0) -> bool:
    """True iff ``y`` satisfies the aggregation constraints within ``tol``.

    The check is ``max |y - S @ y[bottom]| <= tol``.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (h.n,):
        raise ValueError(f"expected vector of length {h.n}, got shape {y.shape}")
    resid = y - h.S @ y[h.bottom_idx]
    return bool(np.max(np.abs(resid)) <= tol)


def load_hierarchy(path: str) -> Hierarchy:
    """Read a ``parent,child`` CSV (with header) into a Hierarchy."""
    edges: list[tuple[str, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["parent", "child"]:
            raise HierarchyError(f"{path}: expected header 'parent,child'")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise HierarchyError(f"{path}: malformed row {row!r}")
            edges.append((row[0].strip(), row[1].strip()))
    return build_hierarchy(edges)


def save_hierarchy(h: Hierarchy, path: str) -> None:
    """Write the edge list as a ``parent,child`` CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["parent", "child"])
        for child in h.labels:
            if child in h.parent_of:
                writer.writerow([h.parent_of[child], child])
