import numpy as np
import pytest

from hirec.hierarchy import Hierarchy, build_hierarchy

FIG_EDGES = [
    ("Total", "A"),
    ("Total", "B"),
    ("A", "AA"),
    ("A", "AB"),
    ("A", "AC"),
    ("B", "BA"),
    ("B", "BB"),
]


@pytest.fixture
def fig_hierarchy() -> Hierarchy:
    """Two-level example: Total -> (A, B), A -> (AA, AB, AC), B -> (BA, BB)."""
    return build_hierarchy(FIG_EDGES)


@pytest.fixture
def tiny_hierarchy() -> Hierarchy:
    """One parent with two leaves: n=3, m=2."""
    return build_hierarchy([("T", "A"), ("T", "B")])


def random_tree_edges(rng: np.random.Generator, n_nodes: int) -> list[tuple[str, str]]:
    """Random rooted tree on ``n_nodes`` labeled nodes (root included)."""
    labels = [f"N{i:02d}" for i in range(n_nodes)]
    edges = []
    for i in range(1, n_nodes):
        parent = labels[int(rng.integers(0, i))]
        edges.append((parent, labels[i]))
    return edges
