"""Cumulants of evolution groups and the evolution operators of the
marginal-functional expansion.

Label layout: an argument ``({Y}, s+1, ..., s+n)`` lives on the first
``s + n`` particles of the operator it is applied to, the cluster ``Y`` being
particles ``1..s``.  Inside reduced (binomial) cumulants the group
``G_{s+n-k}`` occupies the cluster plus the *first* ``n-k`` added particles;
on states symmetric in the added particles, which is the only way the series
code uses them, the choice is immaterial after the partial trace.

The evolution operators ``V_{1+n}`` are available in two independent forms:

* :func:`v_operator_direct` evaluates the closed nested sum (outer sign sum,
  compositions ``(n_1, ..., n_k)``, dissection levels);
* :func:`v_operator_recursive` inverts the kinetic cluster expansion
  ``A^_{1+n} = sum_{n_1} n!/(n-n_1)! V_{1+n-n_1} L_{n_1}`` order by order.

In both, the dissection level acting on the last ``n_1`` particles is applied
first and the leading cumulant last.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from math import comb, factorial
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import combinatorics as cb
from .model import (
    ModelSpec, conjugate, free_array, group_array, interaction_array, scattering_array,
)
from .operators import DimensionError, ManyBodyOperator, max_abs

Superop = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ClusterArgument:
    """Argument ``({1..s}, s+1, ..., s+n)`` of a cluster cumulant."""

    cluster_size: int
    extra: int = 0

    def __post_init__(self):
        if self.cluster_size < 1 or self.extra < 0:
            raise ValueError("need cluster_size >= 1 and extra >= 0")

    @property
    def total(self) -> int:
        return self.cluster_size + self.extra


# --------------------------------------------------------------------------- #
#                          array-level cumulants                               #
# --------------------------------------------------------------------------- #

def _evolve(kind: str):
    return group_array if kind == "group" else scattering_array


def reduced_cumulant_array(m: ModelSpec, t: float, kind: str, cluster, extras,
                           f: np.ndarray, total: int) -> np.ndarray:
    """``sum_k (-1)^k C(n, k) E_{cluster + extras[:n-k]}`` applied to ``f``.

    ``kind`` selects the groups ``G(-t)`` ("group") or the scattering
    operators ``G^(t)`` ("scattering").  Labels are 0-based.
    """
    evolve = _evolve(kind)
    n = len(extras)
    cluster = tuple(cluster)
    out = None
    for k in range(n + 1):
        term = evolve(m, t, f, cluster + tuple(extras[:n - k]), total)
        c = (-1) ** k * comb(n, k)
        out = c * term if out is None else out + c * term
    return out


def partition_cumulant_array(m: ModelSpec, t: float, kind: str, elements,
                             f: np.ndarray, total: int) -> np.ndarray:
    """Alternating partition sum over ``elements`` (tuples of 0-based labels).

    Each block evolves jointly on the union of its elements' labels; blocks act
    on disjoint labels, so their unitaries are multiplied into one conjugation.
    """
    elements = [tuple(e) for e in elements]
    out = None
    for blocks in cb.set_partitions(len(elements)):
        p = len(blocks)
        u = None
        for blk in blocks:
            labels = tuple(sorted(x for i in blk for x in elements[i]))
            if kind == "scattering" and len(labels) <= 1:
                continue
            w = m.embedded(kind, labels, total, float(t))
            u = w if u is None else u @ w
        term = f if (u is None or t == 0.0) else conjugate(u, f)
        c = (-1) ** (p - 1) * factorial(p - 1)
        out = c * term if out is None else out + c * term
    return out


@functools.lru_cache(maxsize=None)
def level_terms(zone: tuple, index_range: int) -> tuple:
    """Terms of one dissection level as ``(weight, ((i, X), ...))`` tuples.

    ``zone`` holds the 0-based labels of the linearly ordered set being
    dissected, ``index_range`` bounds the distinct indices ``i`` (0-based,
    ``0 <= i < index_range``).  Weight is ``1/|D|! * prod 1/|X|!``.
    """
    terms = []
    for D in cb.dissections_bounded(len(zone), index_range, zone):
        r = len(D)
        base = 1.0 / factorial(r)
        for X in D.parts:
            base /= factorial(len(X))
        for idx in cb.injective_tuples(r, index_range):
            terms.append((base, tuple((i - 1, X) for i, X in zip(idx, D.parts))))
    return tuple(terms)


def level_array(m: ModelSpec, t: float, zone: tuple, index_range: int,
                f: np.ndarray, total: int) -> np.ndarray:
    out = np.zeros_like(f)
    for weight, factors in level_terms(zone, index_range):
        g = f
        for i, X in factors:
            g = reduced_cumulant_array(m, t, "scattering", (i,), X, g, total)
        out += weight * g
    return out


def _leading(m: ModelSpec, t: float, s: int, declustered: bool):
    """Leading cumulant ``A^_{1+j}({Y}, s+1..s+j)`` or its declustered form."""
    def apply(j: int, f: np.ndarray, total: int) -> np.ndarray:
        if declustered:
            elements = [(p,) for p in range(s + j)]
            return partition_cumulant_array(m, t, "scattering", elements, f, total)
        return reduced_cumulant_array(m, t, "scattering", range(s), range(s, s + j),
                                      f, total)
    return apply


def v_direct_array(m: ModelSpec, t: float, s: int, n: int, f: np.ndarray, total: int,
                   declustered: bool = False) -> np.ndarray:
    lead = _leading(m, t, s, declustered)
    out = np.zeros_like(f)
    for k in range(n + 1):
        for comp in cb.bounded_compositions(n, k):
            used = sum(comp)
            coef = (-1) ** k * factorial(n) / factorial(n - used)
            g = f
            upper = s + n
            for nj in comp:
                lower = upper - nj
                g = level_array(m, t, tuple(range(lower, upper)), lower, g, total)
                upper = lower
            out += coef * lead(n - used, g, total)
    return out


def v_recursive_array(m: ModelSpec, t: float, s: int, n: int, f: np.ndarray, total: int,
                      declustered: bool = False) -> np.ndarray:
    lead = _leading(m, t, s, declustered)

    def rec(j: int, g: np.ndarray) -> np.ndarray:
        out = lead(j, g, total)
        for n1 in range(1, j + 1):
            lower = s + j - n1
            h = level_array(m, t, tuple(range(lower, s + j)), lower, g, total)
            out = out - (factorial(j) / factorial(j - n1)) * rec(j - n1, h)
        return out

    return rec(n, f)


# --------------------------------------------------------------------------- #
#                               public operations                              #
# --------------------------------------------------------------------------- #

def _check(m: ModelSpec, arg: ClusterArgument, f: ManyBodyOperator) -> int:
    if f.dim != m.dim:
        raise DimensionError("operator and model dims differ")
    if f.particle_count != arg.total:
        raise DimensionError(
            f"operator has {f.particle_count} particles, argument needs {arg.total}")
    return arg.total


def _wrap(m, a):
    return ManyBodyOperator(a, m.dim)


def partition_cumulant(m: ModelSpec, t: float, arg: ClusterArgument,
                       f: ManyBodyOperator) -> ManyBodyOperator:
    """Cumulant of the groups ``G(-t)`` over partitions of ``({Y}, s+1..s+n)``."""
    total = _check(m, arg, f)
    s = arg.cluster_size
    elements = [tuple(range(s))] + [(p,) for p in range(s, total)]
    return _wrap(m, partition_cumulant_array(m, t, "group", elements, f.entries, total))


def reduced_cumulant(m: ModelSpec, t: float, arg: ClusterArgument,
                     f: ManyBodyOperator) -> ManyBodyOperator:
    """``sum_k (-1)^k C(n,k) G_{s+n-k}(-t)`` on the leading ``s+n-k`` particles."""
    total = _check(m, arg, f)
    s = arg.cluster_size
    return _wrap(m, reduced_cumulant_array(m, t, "group", range(s), range(s, total),
                                           f.entries, total))


def reduced_scattering_cumulant(m: ModelSpec, t: float, arg: ClusterArgument,
                                f: ManyBodyOperator) -> ManyBodyOperator:
    total = _check(m, arg, f)
    s = arg.cluster_size
    return _wrap(m, reduced_cumulant_array(m, t, "scattering", range(s), range(s, total),
                                           f.entries, total))


def declustered_scattering_cumulant(m: ModelSpec, t: float, arg: ClusterArgument,
                                    f: ManyBodyOperator) -> ManyBodyOperator:
    """Scattering-operator cumulant with every cluster label a separate element."""
    total = _check(m, arg, f)
    elements = [(p,) for p in range(total)]
    return _wrap(m, partition_cumulant_array(m, t, "scattering", elements, f.entries, total))


def v_operator_direct(m: ModelSpec, t: float, arg: ClusterArgument, f: ManyBodyOperator,
                      declustered: bool = False) -> ManyBodyOperator:
    total = _check(m, arg, f)
    return _wrap(m, v_direct_array(m, t, arg.cluster_size, arg.extra, f.entries, total,
                                   declustered))


def v_operator_recursive(m: ModelSpec, t: float, arg: ClusterArgument, f: ManyBodyOperator,
                         declustered: bool = False) -> ManyBodyOperator:
    total = _check(m, arg, f)
    return _wrap(m, v_recursive_array(m, t, arg.cluster_size, arg.extra, f.entries, total,
                                      declustered))


v_operator = v_operator_recursive


# --------------------------------------------------------------------------- #
#                      Duhamel forms of second-order terms                     #
# --------------------------------------------------------------------------- #

def _gauss_nodes(t: float, nodes: int):
    x, w = leggauss(nodes)
    return 0.5 * t * (x + 1.0), 0.5 * t * w


def _interaction_sum(m: ModelSpec, pairs, f: np.ndarray, total: int) -> np.ndarray:
    out = np.zeros_like(f)
    for i, j in pairs:
        out -= interaction_array(m, i, j, f, total)
    return out


def second_order_integrand(m: ModelSpec, t: float, tau: float, s: int,
                           f: np.ndarray) -> np.ndarray:
    """Integrand of the Duhamel form of ``A^_2({Y}, s+1)`` at time ``tau``.

    ``G_s(-tau, Y) G_1(-tau, s+1) sum_i (-N_int(i, s+1)) G^_{s+1}(t - tau)
    prod_i G_1(tau, i)``.
    """
    total = s + 1
    g = free_array(m, -tau, f, range(total), total)
    g = scattering_array(m, t - tau, g, tuple(range(total)), total)
    g = _interaction_sum(m, [(i, s) for i in range(s)], g, total)
    g = free_array(m, tau, g, [s], total)
    return group_array(m, tau, g, tuple(range(s)), total)


def v2_integrand(m: ModelSpec, t: float, tau: float, s: int, f: np.ndarray) -> np.ndarray:
    """Integrand of the Duhamel form of ``V_2({Y}, s+1)``."""
    total = s + 1
    g0 = free_array(m, -tau, f, range(total), total)
    first = scattering_array(m, t - tau, g0, tuple(range(total)), total)
    first = _interaction_sum(m, [(i, s) for i in range(s)], first, total)
    second = np.zeros_like(f)
    for i in range(s):
        h = scattering_array(m, t - tau, g0, (i, s), total)
        second -= interaction_array(m, i, s, h, total)
    second = scattering_array(m, t - tau, second, tuple(range(s)), total)
    g = first - second
    g = free_array(m, tau, g, [s], total)
    return group_array(m, tau, g, tuple(range(s)), total)


def duhamel_quadrature(m: ModelSpec, t: float, s: int, f: np.ndarray, nodes: int,
                       integrand=second_order_integrand) -> np.ndarray:
    if t == 0.0:
        return np.zeros_like(f)
    taus, weights = _gauss_nodes(t, nodes)
    out = np.zeros_like(f)
    for tau, w in zip(taus, weights):
        out += w * integrand(m, t, float(tau), s, f)
    return out


def duhamel_residual(m: ModelSpec, t: float, s: int, f: ManyBodyOperator,
                     quadrature_nodes: int = 32) -> float:
    """Max-abs gap between ``A^_2({Y}, s+1) f`` and its Duhamel integral."""
    arg = ClusterArgument(s, 1)
    lhs = reduced_scattering_cumulant(m, t, arg, f).entries
    rhs = duhamel_quadrature(m, t, s, f.entries, quadrature_nodes)
    return max_abs(lhs - rhs)


def v2_duhamel_residual(m: ModelSpec, t: float, s: int, f: ManyBodyOperator,
                        quadrature_nodes: int = 32) -> float:
    arg = ClusterArgument(s, 1)
    lhs = v_operator_recursive(m, t, arg, f).entries
    rhs = duhamel_quadrature(m, t, s, f.entries, quadrature_nodes, v2_integrand)
    return max_abs(lhs - rhs)
