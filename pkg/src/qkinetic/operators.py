"""Dense operators on tensor powers of a finite one-particle space.

Index convention: a row (or column) index of an ``s``-particle operator is the
base-``d`` digit string of the particle states, particle 1 being the most
significant digit.  Public functions take 1-based particle labels; the
``*_array`` helpers work on raw ndarrays with 0-based labels and are what the
series code calls in its inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12


class DimensionError(ValueError):
    """Operator shapes or particle labels are inconsistent."""


def particle_count_of(side: int, dim: int) -> int:
    s, size = 0, 1
    while size < side:
        size *= dim
        s += 1
    if size != side:
        raise DimensionError(f"side {side} is not a power of dim={dim}")
    return s


def max_abs(a) -> float:
    if isinstance(a, ManyBodyOperator):
        a = a.entries
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def is_hermitian_array(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return a.shape[0] == a.shape[1] and max_abs(a - a.conj().T) <= tol


@dataclass(frozen=True, eq=False)
class ManyBodyOperator:
    """Dense complex operator on the ``s``-fold tensor power of ``C^dim``.

    ``particle_count`` is inferred from the matrix side.  Setting
    ``hermitian=True`` asserts hermiticity and is checked on construction.
    """

    entries: np.ndarray
    dim: int
    hermitian: bool = False
    particle_count: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        if self.dim < 1:
            raise DimensionError("dim must be positive")
        s = particle_count_of(a.shape[0], self.dim)
        if s < 1:
            raise DimensionError("an operator needs at least one particle")
        if self.hermitian and not is_hermitian_array(a):
            raise ValueError("hermitian flag set on a non-hermitian matrix")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "particle_count", s)

    @classmethod
    def identity(cls, dim: int, particle_count: int = 1) -> ManyBodyOperator:
        return cls(np.eye(dim**particle_count, dtype=complex), dim, hermitian=True)

    @property
    def side(self) -> int:
        return self.entries.shape[0]

    def _wrap(self, a, hermitian=False):
        return ManyBodyOperator(a, self.dim, hermitian=hermitian)

    def _check_same(self, other):
        if other.dim != self.dim or other.side != self.side:
            raise DimensionError("operators act on different spaces")

    def __add__(self, other):
        self._check_same(other)
        return self._wrap(self.entries + other.entries)

    def __sub__(self, other):
        self._check_same(other)
        return self._wrap(self.entries - other.entries)

    def __neg__(self):
        return self._wrap(-self.entries)

    def __mul__(self, c):
        return self._wrap(c * self.entries)

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._check_same(other)
        return self._wrap(self.entries @ other.entries)

    def dag(self) -> ManyBodyOperator:
        return self._wrap(self.entries.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return is_hermitian_array(self.entries, tol)

    def __repr__(self):
        return (f"ManyBodyOperator(dim={self.dim}, "
                f"particle_count={self.particle_count})")


@dataclass(frozen=True)
class MarginalState:
    """Marginals ``(F_1, ..., F_smax)`` at one time point."""

    time: float
    marginals: tuple

    def __post_init__(self):
        ms = tuple(self.marginals)
        if not ms:
            raise ValueError("at least one marginal is required")
        dim = ms[0].dim
        for s, f in enumerate(ms, start=1):
            if f.particle_count != s or f.dim != dim:
                raise DimensionError(f"marginal {s} has the wrong shape")
            if not f.is_hermitian():
                raise ValueError(f"marginal {s} is not hermitian")
        object.__setattr__(self, "marginals", ms)

    @property
    def s_max(self) -> int:
        return len(self.marginals)

    def __getitem__(self, s: int) -> ManyBodyOperator:
        if not 1 <= s <= self.s_max:
            raise KeyError(f"no marginal of order {s} (have 1..{self.s_max})")
        return self.marginals[s - 1]


# --------------------------------------------------------------------------- #
#                              ndarray helpers                                 #
# --------------------------------------------------------------------------- #

def _letters(n: int, offset: int = 0) -> list[str]:
    alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if offset + n > len(alphabet):
        raise DimensionError("too many particles for einsum subscripts")
    return list(alphabet[offset:offset + n])


def permute_array(a: np.ndarray, order: Sequence[int], d: int) -> np.ndarray:
    """Relabel particles: particle ``p`` of the result is particle ``order[p]`` of ``a``."""
    n = len(order)
    t = a.reshape((d,) * (2 * n))
    axes = list(order) + [n + o for o in order]
    return t.transpose(axes).reshape(a.shape)


def embed_array(a: np.ndarray, labels: Sequence[int], total: int, d: int) -> np.ndarray:
    """Place ``a`` on 0-based ``labels`` of a ``total``-particle space."""
    m = len(labels)
    rest = [p for p in range(total) if p not in labels]
    full = np.kron(a, np.eye(d ** (total - m), dtype=complex)) if total > m else a
    # axis k of ``full`` carries particle (labels + rest)[k]
    placed = list(labels) + rest
    order = [0] * total
    for k, p in enumerate(placed):
        order[p] = k
    return permute_array(full, order, d)


def partial_trace_array(a: np.ndarray, traced: Iterable[int], total: int, d: int):
    """Trace out 0-based ``traced`` labels; returns a scalar if nothing is left."""
    traced = set(traced)
    rows = _letters(total)
    cols = _letters(total, total)
    for p in traced:
        cols[p] = rows[p]
    kept = [p for p in range(total) if p not in traced]
    out = "".join(rows[p] for p in kept) + "".join(cols[p] for p in kept)
    t = np.einsum("".join(rows) + "".join(cols) + "->" + out,
                  a.reshape((d,) * (2 * total)))
    if not kept:
        return complex(t)
    side = d ** len(kept)
    return t.reshape(side, side)


def trace_norm_array(a: np.ndarray) -> float:
    if is_hermitian_array(a):
        return float(np.sum(np.abs(np.linalg.eigvalsh(a))))
    return float(np.sum(np.linalg.svd(a, compute_uv=False)))


def power_array(f1: np.ndarray, s: int) -> np.ndarray:
    out = f1
    for _ in range(s - 1):
        out = np.kron(out, f1)
    return out


# --------------------------------------------------------------------------- #
#                               public operations                              #
# --------------------------------------------------------------------------- #

def _check_labels(labels, total, *, allow_empty=False):
    labels = list(labels)
    if not labels and not allow_empty:
        raise DimensionError("no labels given")
    if len(set(labels)) != len(labels):
        raise DimensionError(f"label collision in {labels}")
    bad = [p for p in labels if not 1 <= p <= total]
    if bad:
        raise DimensionError(f"labels {bad} outside 1..{total}")
    return [p - 1 for p in labels]


def tensor(a: ManyBodyOperator, b: ManyBodyOperator) -> ManyBodyOperator:
    """Kronecker product, ``a`` on the leading particles."""
    if a.dim != b.dim:
        raise DimensionError(f"dim mismatch: {a.dim} vs {b.dim}")
    return ManyBodyOperator(np.kron(a.entries, b.entries), a.dim,
                            hermitian=a.hermitian and b.hermitian)


def tensor_power(a: ManyBodyOperator, s: int) -> ManyBodyOperator:
    return ManyBodyOperator(power_array(a.entries, s), a.dim, hermitian=a.hermitian)


def partial_trace(a: ManyBodyOperator, traced: Iterable[int]) -> ManyBodyOperator:
    """Trace out the 1-based ``traced`` labels; the rest keep their order.

    Tracing every label is refused here; use :func:`full_trace`.
    """
    s = a.particle_count
    idx = _check_labels(traced, s, allow_empty=True)
    if len(idx) == s:
        raise DimensionError("tracing all labels; use full_trace for the scalar")
    if not idx:
        return a
    return ManyBodyOperator(partial_trace_array(a.entries, idx, s, a.dim), a.dim,
                            hermitian=a.hermitian)


def full_trace(a: ManyBodyOperator) -> complex:
    return a.trace()


def trace_norm(a: ManyBodyOperator) -> float:
    """Sum of singular values."""
    return trace_norm_array(a.entries)


def embed(a: ManyBodyOperator, target_labels: Sequence[int], total: int) -> ManyBodyOperator:
    """Act as ``a`` on ``target_labels`` (in that order) and as identity elsewhere."""
    if len(target_labels) != a.particle_count:
        raise DimensionError(
            f"{len(target_labels)} labels for a {a.particle_count}-particle operator")
    idx = _check_labels(target_labels, total)
    return ManyBodyOperator(embed_array(a.entries, idx, total, a.dim), a.dim,
                            hermitian=a.hermitian)


def hermitian_exponential(h: ManyBodyOperator, scale: complex) -> ManyBodyOperator:
    """``exp(scale * h)`` through the eigendecomposition of hermitian ``h``."""
    if not h.is_hermitian():
        raise ValueError("hermitian_exponential needs a hermitian operator")
    w, v = np.linalg.eigh(h.entries)
    out = (v * np.exp(scale * w)) @ v.conj().T
    return ManyBodyOperator(out, h.dim)


def random_hermitian(side: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))
    return 0.5 * (a + a.conj().T)


def random_density(dim: int, rng: np.random.Generator, norm: float = 1.0) -> ManyBodyOperator:
    """Random positive one-particle operator with trace ``norm``."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return ManyBodyOperator(norm * rho / np.trace(rho).real, dim, hermitian=True)
