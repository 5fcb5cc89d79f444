"""Finite-dimensional many-particle model and its evolution superoperators.

Superoperators are plain functions on operators.  Every evolution used by the
series code is a unitary conjugation ``f -> W f W^dagger``; the embedded
unitaries ``W`` are cached per ``(kind, labels, total, t)`` on the model.

Sign conventions follow the von Neumann picture used throughout the package::

    group(-t) f   = exp(-i t H / hbar) f exp(i t H / hbar)
    liouvillian f = -(i / hbar) (f H - H f)          # the generator is -liouvillian
    scattering(t) = group_s(-t) o prod_i group_1(t, i)
"""

from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import (
    HERMITIAN_TOL, DimensionError, ManyBodyOperator, embed_array, is_hermitian_array,
    max_abs,
)


class ModelError(ValueError):
    """Invalid model data."""


def swap_matrix(d: int) -> np.ndarray:
    """Unitary ``S`` with ``S |x1 x2> = |x2 x1>``."""
    return np.eye(d * d, dtype=complex).reshape(d, d, d, d).transpose(1, 0, 2, 3).reshape(d * d, d * d)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """One-body operator, pair potential and coupling of an N-particle system.

    ``H_s = sum_i one_body(i) + coupling * sum_{i<j} pair_potential(i, j)``.
    The pair potential must be hermitian and symmetric under particle swap so
    that ``H_s`` does not depend on the order of the labels it acts on.
    """

    one_body: np.ndarray
    pair_potential: np.ndarray
    coupling: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.one_body, dtype=complex)
        phi = np.asarray(self.pair_potential, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 2:
            raise ModelError("model.one_body must be a square matrix with dim >= 2")
        d = h.shape[0]
        if phi.shape != (d * d, d * d):
            raise ModelError(f"model.pair_potential must have shape {(d * d, d * d)}")
        if not is_hermitian_array(h):
            raise ModelError("model.one_body is not hermitian")
        if not is_hermitian_array(phi):
            raise ModelError("model.pair_potential is not hermitian")
        sw = swap_matrix(d)
        if max_abs(sw @ phi @ sw - phi) > HERMITIAN_TOL:
            raise ModelError("model.pair_potential is not swap-symmetric")
        if not self.coupling >= 0:
            raise ModelError("model.coupling must be non-negative")
        if not self.hbar > 0:
            raise ModelError("model.hbar must be positive")
        object.__setattr__(self, "one_body", h)
        object.__setattr__(self, "pair_potential", phi)
        object.__setattr__(self, "coupling", float(self.coupling))
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def dim(self) -> int:
        return self.one_body.shape[0]

    def with_coupling(self, coupling: float) -> ModelSpec:
        return dataclasses.replace(self, coupling=coupling)

    def with_potential(self, pair_potential) -> ModelSpec:
        return dataclasses.replace(self, pair_potential=pair_potential)

    # -- cached building blocks ------------------------------------------------

    @functools.lru_cache(maxsize=16)
    def hamiltonian_array(self, s: int) -> np.ndarray:
        d = self.dim
        out = np.zeros((d**s, d**s), dtype=complex)
        for i in range(s):
            out += embed_array(self.one_body, [i], s, d)
        if self.coupling != 0.0:
            for i in range(s):
                for j in range(i + 1, s):
                    out += self.coupling * embed_array(self.pair_potential, [i, j], s, d)
        return out

    @functools.lru_cache(maxsize=16)
    def _eigh(self, s: int):
        return np.linalg.eigh(self.hamiltonian_array(s))

    @functools.lru_cache(maxsize=4096)
    def propagator(self, s: int, t: float) -> np.ndarray:
        """``exp(-i t H_s / hbar)``, so that ``group(-t) f = U f U^dagger``."""
        w, v = self._eigh(s)
        return (v * np.exp(-1j * t * w / self.hbar)) @ v.conj().T

    @functools.lru_cache(maxsize=4096)
    def wave_operator(self, s: int, t: float) -> np.ndarray:
        """``W`` with ``scattering(t) f = W f W^dagger`` on ``s`` particles."""
        free = self.propagator(1, t)
        prod = free
        for _ in range(s - 1):
            prod = np.kron(prod, free)
        return self.propagator(s, t) @ prod.conj().T

    @functools.lru_cache(maxsize=1024)
    def embedded(self, kind: str, labels: tuple, total: int, t: float) -> np.ndarray:
        """Embedded unitary for ``kind`` in {"group", "scattering"} on 0-based labels."""
        m = len(labels)
        if kind == "group":
            u = self.propagator(m, t)
        elif kind == "scattering":
            u = self.wave_operator(m, t)
        else:
            raise ValueError(kind)
        if m == total and tuple(labels) == tuple(range(total)):
            return u
        return embed_array(u, list(labels), total, self.dim)

    @functools.lru_cache(maxsize=256)
    def embedded_potential(self, i: int, j: int, total: int) -> np.ndarray:
        return self.coupling * embed_array(self.pair_potential, [i, j], total, self.dim)


# --------------------------------------------------------------------------- #
#                     array-level superoperators (0-based)                     #
# --------------------------------------------------------------------------- #

def conjugate(u: np.ndarray, f: np.ndarray) -> np.ndarray:
    return u @ f @ u.conj().T


def group_array(m: ModelSpec, t: float, f: np.ndarray, labels, total) -> np.ndarray:
    """Apply ``G_{|labels|}(-t)`` on ``labels``; identity on the other particles."""
    if t == 0.0 or not len(labels):
        return f
    return conjugate(m.embedded("group", tuple(labels), total, float(t)), f)


def scattering_array(m: ModelSpec, t: float, f: np.ndarray, labels, total) -> np.ndarray:
    if t == 0.0 or len(labels) <= 1:
        return f
    return conjugate(m.embedded("scattering", tuple(labels), total, float(t)), f)


def free_array(m: ModelSpec, t: float, f: np.ndarray, labels, total) -> np.ndarray:
    """``prod_{i in labels} G_1(-t, i)``."""
    if t == 0.0:
        return f
    u = m.propagator(1, float(t))
    for p in labels:
        f = conjugate(embed_array(u, [p], total, m.dim), f)
    return f


def liouvillian_array(m: ModelSpec, f: np.ndarray, s: int) -> np.ndarray:
    h = m.hamiltonian_array(s)
    return (-1j / m.hbar) * (f @ h - h @ f)


def interaction_array(m: ModelSpec, i: int, j: int, f: np.ndarray, total: int) -> np.ndarray:
    """``N_int(i, j) f`` with 0-based labels, coupling included."""
    phi = m.embedded_potential(i, j, total)
    return (-1j / m.hbar) * (f @ phi - phi @ f)


# --------------------------------------------------------------------------- #
#                              public operations                               #
# --------------------------------------------------------------------------- #

def hamiltonian(m: ModelSpec, s: int) -> ManyBodyOperator:
    if s < 1:
        raise DimensionError("s must be at least 1")
    return ManyBodyOperator(m.hamiltonian_array(s), m.dim, hermitian=True)


def _check_op(m: ModelSpec, f: ManyBodyOperator):
    if f.dim != m.dim:
        raise DimensionError(f"operator dim {f.dim} does not match model dim {m.dim}")
    return f.particle_count


def group_evolve(m: ModelSpec, t: float, f: ManyBodyOperator) -> ManyBodyOperator:
    """``exp(-i t H_s / hbar) f exp(i t H_s / hbar)``."""
    s = _check_op(m, f)
    return ManyBodyOperator(group_array(m, t, f.entries, range(s), s), m.dim)


def liouvillian(m: ModelSpec, f: ManyBodyOperator) -> ManyBodyOperator:
    s = _check_op(m, f)
    return ManyBodyOperator(liouvillian_array(m, f.entries, s), m.dim)


def interaction_liouvillian(m: ModelSpec, i: int, j: int,
                            f: ManyBodyOperator) -> ManyBodyOperator:
    s = _check_op(m, f)
    if i == j or not (1 <= i <= s and 1 <= j <= s):
        raise DimensionError(f"bad label pair ({i}, {j}) for {s} particles")
    return ManyBodyOperator(interaction_array(m, i - 1, j - 1, f.entries, s), m.dim)


def scattering_operator(m: ModelSpec, t: float, f: ManyBodyOperator) -> ManyBodyOperator:
    """Free evolution backwards on each particle, then the interacting group."""
    s = _check_op(m, f)
    return ManyBodyOperator(scattering_array(m, t, f.entries, range(s), s), m.dim)


def random_model(dim: int, rng: np.random.Generator, coupling: float = 1.0,
                 hbar: float = 1.0) -> ModelSpec:
    """Random hermitian one-body term and swap-symmetric pair potential."""
    from .operators import random_hermitian

    h = random_hermitian(dim, rng)
    phi = random_hermitian(dim * dim, rng)
    sw = swap_matrix(dim)
    phi = 0.5 * (phi + sw @ phi @ sw)
    return ModelSpec(h, phi, coupling=coupling, hbar=hbar)


def default_model(coupling: float = 0.5) -> ModelSpec:
    """The bundled d=2 model: a detuned two-level one-body term plus an
    exchange-type pair potential."""
    h = np.array([[0.0, 0.4], [0.4, 1.0]], dtype=complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sz = np.diag([1.0, -1.0]).astype(complex)
    phi = np.kron(sx, sx) + 0.5 * np.kron(sz, sz) + 0.3 * (np.kron(sz, np.eye(2)) + np.kron(np.eye(2), sz))
    return ModelSpec(h, phi, coupling=coupling)
