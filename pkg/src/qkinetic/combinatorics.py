"""Index structures of the cumulant and cluster expansions.

All enumerators yield in a fixed canonical order so that floating-point sums
built on top of them are reproducible bit for bit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

MAX_PARTITION_ELEMENTS = 8
MAX_DISSECTION_ELEMENTS = 16


class CombinatoricsLimitError(ValueError):
    """Requested enumeration exceeds the configured size cap."""


@dataclass(frozen=True)
class Cluster:
    """A group of particle labels treated as one element."""

    labels: tuple

    def __post_init__(self):
        if not self.labels:
            raise ValueError("a cluster needs at least one label")
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True)
class Single:
    label: int

    @property
    def labels(self) -> tuple:
        return (self.label,)


ClusterElement = Union[Cluster, Single]


def cluster_ground(s: int, n: int) -> list:
    """The ground set ``({1..s}, s+1, ..., s+n)``."""
    return [Cluster(tuple(range(1, s + 1)))] + [Single(s + k) for k in range(1, n + 1)]


def _check_ground(ground: Sequence):
    seen = set()
    for el in ground:
        if seen.intersection(el.labels):
            raise ValueError(f"element {el} overlaps another element's labels")
        seen.update(el.labels)


def restricted_growth_strings(n: int) -> Iterator[tuple]:
    """Restricted growth strings of length ``n`` in lexicographic order."""
    if n == 0:
        yield ()
        return
    a = [0] * n

    def rec(i, top):
        if i == n:
            yield tuple(a)
            return
        for v in range(top + 2):
            a[i] = v
            yield from rec(i + 1, max(top, v))

    a[0] = 0
    yield from rec(1, 0)


def set_partitions(n: int) -> Iterator[list]:
    """Partitions of ``range(n)`` as lists of index blocks."""
    if n > MAX_PARTITION_ELEMENTS:
        raise CombinatoricsLimitError(
            f"{n} elements exceeds the partition cap of {MAX_PARTITION_ELEMENTS}")
    for rgs in restricted_growth_strings(n):
        blocks = [[] for _ in range(max(rgs) + 1)] if rgs else []
        for i, b in enumerate(rgs):
            blocks[b].append(i)
        yield blocks


def partitions(ground: Sequence) -> Iterator[list]:
    """Every set partition of ``ground`` exactly once.

    Blocks are lists of elements of ``ground``; the order is lexicographic in
    the restricted growth string, so the one-block partition comes first.
    """
    ground = list(ground)
    _check_ground(ground)
    for blocks in set_partitions(len(ground)):
        yield [[ground[i] for i in blk] for blk in blocks]


@dataclass(frozen=True)
class Dissection:
    """Partition of a linearly ordered set into consecutive blocks."""

    parts: tuple

    def __len__(self):
        return len(self.parts)

    def sizes(self) -> tuple:
        return tuple(len(p) for p in self.parts)


def dissections(n: int, items: Sequence | None = None) -> list:
    """All ``2**(n-1)`` dissections of ``items`` (default ``1..n``).

    Ordered by the cut-point bitmask: bit ``k`` set means a cut between
    positions ``k`` and ``k+1``.
    """
    if n < 1:
        raise ValueError("dissections need n >= 1")
    if n > MAX_DISSECTION_ELEMENTS:
        raise CombinatoricsLimitError(
            f"{n} elements exceeds the dissection cap of {MAX_DISSECTION_ELEMENTS}")
    items = tuple(range(1, n + 1)) if items is None else tuple(items)
    if len(items) != n:
        raise ValueError("len(items) != n")
    out = []
    for mask in range(2 ** (n - 1)):
        parts, start = [], 0
        for k in range(n - 1):
            if mask >> k & 1:
                parts.append(items[start:k + 1])
                start = k + 1
        parts.append(items[start:])
        out.append(Dissection(tuple(parts)))
    return out


def dissections_bounded(n: int, max_parts: int, items: Sequence | None = None) -> list:
    if max_parts < 1:
        raise ValueError("max_parts must be >= 1")
    return [D for D in dissections(n, items) if len(D) <= max_parts]


def injective_tuples(k: int, m: int) -> list:
    """Ordered tuples of ``k`` distinct labels from ``1..m``, lexicographic."""
    if k > m:
        return []
    return list(itertools.permutations(range(1, m + 1), k))


def bounded_compositions(n: int, k: int) -> list:
    """Tuples ``(n_1, ..., n_k)`` with every ``n_j >= 1`` and sum at most ``n``.

    Nested-loop order: ``n_1`` outermost.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    out = []

    def rec(prefix, remaining):
        if len(prefix) == k:
            out.append(tuple(prefix))
            return
        for v in range(1, remaining + 1):
            rec(prefix + [v], remaining - v)

    rec([], n)
    return out


def bell_number(n: int) -> int:
    """Bell number by the Bell triangle (independent of the enumerators)."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]
