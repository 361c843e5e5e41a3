"""Ordered rooted trees, the corpus text format, and per-tree tallies.

A corpus holds one tree per line as a parent-pointer array::

    [-1,0,0,1,1]

Entry ``j`` is the index of vertex ``j``'s parent, ``-1`` marks the root
(always vertex 0), parents precede their children, and the children of a
vertex are ordered by their position in the array.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, TextIO

import numpy as np

from .errors import CorpusFormatError

__all__ = [
    "ROOT",
    "MAX_GENERATION",
    "OrderedTree",
    "VertexRecord",
    "TreeSummary",
    "SufficientStats",
    "parse_corpus",
    "serialize_corpus",
    "read_corpus",
    "write_corpus",
    "summarize",
    "tally",
]

ROOT = -1
MAX_GENERATION = 2**16 - 1


class VertexRecord(NamedTuple):
    id: int
    parent: int
    generation: int
    offspring: tuple[int, ...]


@dataclass(frozen=True)
class OrderedTree:
    """Immutable ordered tree held as parent pointers plus generation indices.

    Use `OrderedTree.from_parents` for untrusted input; the plain constructor
    assumes the arrays are already consistent.
    """

    parents: tuple[int, ...]
    generation: tuple[int, ...]

    @classmethod
    def from_parents(cls, parents: Iterable[int]) -> "OrderedTree":
        parents = tuple(int(p) for p in parents)
        return cls(parents, _validate(parents))

    @classmethod
    def single(cls) -> "OrderedTree":
        return cls((ROOT,), (0,))

    @property
    def size(self) -> int:
        return len(self.parents)

    @property
    def height(self) -> int:
        return max(self.generation)

    def offspring_counts(self) -> np.ndarray:
        """Number of children of every vertex, indexed by vertex id."""
        return np.bincount(np.asarray(self.parents[1:], dtype=np.int64), minlength=self.size)

    def children(self, vertex: int) -> tuple[int, ...]:
        return tuple(j for j in range(vertex + 1, self.size) if self.parents[j] == vertex)

    def vertices(self) -> Iterator[VertexRecord]:
        kids: list[list[int]] = [[] for _ in range(self.size)]
        for j in range(1, self.size):
            kids[self.parents[j]].append(j)
        for i in range(self.size):
            yield VertexRecord(i, self.parents[i], self.generation[i], tuple(kids[i]))

    def generation_sizes(self) -> np.ndarray:
        return np.bincount(np.asarray(self.generation, dtype=np.int64))

    def __str__(self) -> str:
        return "[" + ",".join(map(str, self.parents)) + "]"


def _validate(parents: tuple[int, ...], line_number=None) -> tuple[int, ...]:
    if not parents:
        raise CorpusFormatError("empty tree", line_number)
    if parents[0] != ROOT:
        raise CorpusFormatError("vertex 0 must be the root (-1)", line_number)
    size = len(parents)
    gen = [0] * size
    for j in range(1, size):
        p = parents[j]
        if p == ROOT:
            raise CorpusFormatError(f"multiple roots (vertex {j})", line_number)
        if p < 0 or p >= size:
            raise CorpusFormatError(f"parent index {p} of vertex {j} out of range", line_number)
        if p >= j:
            if _on_cycle(parents, j):
                raise CorpusFormatError(f"cycle detected through vertex {j}", line_number)
            raise CorpusFormatError(f"parent {p} of vertex {j} appears after it", line_number)
        g = gen[p] + 1
        if g > MAX_GENERATION:
            raise CorpusFormatError(f"generation index exceeds {MAX_GENERATION}", line_number)
        gen[j] = g
    return tuple(gen)


def _on_cycle(parents, start) -> bool:
    seen = set()
    v = start
    while v != ROOT:
        if v in seen:
            return True
        seen.add(v)
        v = parents[v]
    return False


def _parse_line(text: str, line_number: int) -> OrderedTree:
    if not (text.startswith("[") and text.endswith("]")):
        raise CorpusFormatError("expected a bracketed integer array", line_number)
    body = text[1:-1].strip()
    if not body:
        raise CorpusFormatError("empty tree", line_number)
    try:
        parents = tuple(int(tok) for tok in body.split(","))
    except ValueError:
        raise CorpusFormatError("non-integer entry", line_number) from None
    return OrderedTree(parents, _validate(parents, line_number))


def parse_corpus(stream: "str | TextIO") -> list[OrderedTree]:
    """Decode a corpus from text or an open text stream."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    trees = []
    for number, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        trees.append(_parse_line(line, number))
    return trees


def serialize_corpus(trees: Iterable[OrderedTree]) -> str:
    return "".join(f"{tree}\n" for tree in trees)


def read_corpus(path) -> list[OrderedTree]:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh)


def write_corpus(path, trees: Iterable[OrderedTree]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_corpus(trees))


@dataclass(frozen=True)
class TreeSummary:
    total_vertices: int
    height: int
    leaves: int
    per_generation_counts: tuple[int, ...]


def summarize(tree: OrderedTree) -> TreeSummary:
    counts = tree.generation_sizes()
    leaves = int(np.count_nonzero(tree.offspring_counts() == 0))
    return TreeSummary(tree.size, len(counts) - 1, leaves, tuple(int(c) for c in counts))


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Tallies ``counts[n, k]`` of generation-``n`` vertices with ``k`` offspring.

    These counts determine the likelihood completely, and tallies of disjoint
    corpora add.
    """

    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2 or np.any(counts < 0):
            raise ValueError("counts must be a 2-d array of non-negative integers")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n_generations(self) -> int:
        return self.counts.shape[0]

    @property
    def n_max_observed(self) -> int:
        return self.counts.shape[0] - 1

    @property
    def a(self) -> np.ndarray:
        """Vertices with at least two offspring, per generation."""
        return self.counts[:, 2:].sum(axis=1)

    @property
    def b(self) -> np.ndarray:
        """Sum of (offspring - 2) over vertices with at least two offspring."""
        k = np.arange(self.counts.shape[1])
        return (self.counts[:, 2:] * (k[2:] - 2)).sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count(self, n: int, k: int) -> int:
        if 0 <= n < self.counts.shape[0] and 0 <= k < self.counts.shape[1]:
            return int(self.counts[n, k])
        return 0

    def generation_moments(self, n: int) -> tuple[int, float, float]:
        """(count, mean, population variance) of generation-``n`` offspring counts."""
        row = self.counts[n]
        k = np.arange(len(row))
        total = int(row.sum())
        if total == 0:
            return 0, float("nan"), float("nan")
        mean = float((row * k).sum() / total)
        var = float((row * (k - mean) ** 2).sum() / total)
        return total, mean, var

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        g = max(self.counts.shape[0], other.counts.shape[0])
        k = max(self.counts.shape[1], other.counts.shape[1])
        out = np.zeros((g, k), dtype=np.int64)
        out[: self.counts.shape[0], : self.counts.shape[1]] += self.counts
        out[: other.counts.shape[0], : other.counts.shape[1]] += other.counts
        return SufficientStats(out)

    def __eq__(self, other):
        if not isinstance(other, SufficientStats):
            return NotImplemented
        return np.array_equal(_trim(self.counts), _trim(other.counts))

    __hash__ = None


def _trim(counts: np.ndarray) -> np.ndarray:
    rows = np.flatnonzero(counts.any(axis=1))
    cols = np.flatnonzero(counts.any(axis=0))
    if rows.size == 0:
        return counts[:0, :0]
    return counts[: rows[-1] + 1, : cols[-1] + 1]


def tally(trees: Iterable[OrderedTree]) -> SufficientStats:
    """Pool offspring counts by generation across a corpus."""
    gens = []
    offs = []
    for tree in trees:
        gens.append(np.asarray(tree.generation, dtype=np.int64))
        offs.append(tree.offspring_counts())
    if not gens:
        raise ValueError("cannot tally an empty corpus")
    g = np.concatenate(gens)
    k = np.concatenate(offs)
    shape = (int(g.max()) + 1, int(k.max()) + 1)
    flat = np.bincount(g * shape[1] + k, minlength=shape[0] * shape[1])
    return SufficientStats(flat.reshape(shape))
