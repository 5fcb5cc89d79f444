"""Mean-field diagnostics: the iterated Vlasov series and coupling sweeps.

Under the scaling ``F_1^0 = f_1^0 / eps`` with potential ``eps * Phi`` the
rescaled kinetic solution ``eps * F_1(t)`` should approach the solution of the
quantum Vlasov equation

    d f / dt = -N_1 f + Tr_2 (-N_int(1, 2)) f(1) f(2)

as ``eps -> 0``.  The Vlasov solution is computed here as its iterated
time-ordered series; the ``n``-th term is an ``n``-fold simplex integral
evaluated with nested Gauss-Legendre rules.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .cumulants import v_recursive_array
from .model import ModelSpec, free_array, interaction_array, liouvillian_array
from .operators import (
    DimensionError, ManyBodyOperator, partial_trace_array, power_array, trace_norm_array,
)
from .parallel import ordered_map
from .solvers import (
    AdmissibilityWarning, SeriesConfig, correlation_functional, kinetic_solution,
    marginal_functional,
)


@dataclass(frozen=True)
class SweepSpec:
    """Couplings and truncation of a mean-field sweep.

    Attributes:
        epsilons: strictly decreasing positive couplings.
        time: evaluation time.
        vlasov_order: truncation order of the Vlasov series.
        quadrature_nodes: Gauss-Legendre nodes per time integral.
    """

    epsilons: tuple = (0.4, 0.2, 0.1, 0.05)
    time: float = 0.25
    vlasov_order: int = 3
    quadrature_nodes: int = 10

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ValueError("sweep.epsilons is empty")
        if any(e <= 0 for e in eps):
            raise ValueError("sweep.epsilons must be positive")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValueError("sweep.epsilons must be strictly decreasing")
        if self.vlasov_order < 0:
            raise ValueError("sweep.vlasov_order must be >= 0")
        if self.quadrature_nodes < 1:
            raise ValueError("sweep.quadrature_nodes must be >= 1")
        object.__setattr__(self, "epsilons", eps)


def _unit(m: ModelSpec) -> ModelSpec:
    return m if m.coupling == 1.0 else m.with_coupling(1.0)


def vlasov_rhs(m: ModelSpec, f1: ManyBodyOperator) -> ManyBodyOperator:
    """Right-hand side of the Vlasov equation (the model's coupling is used as is)."""
    if f1.particle_count != 1:
        raise DimensionError("vlasov_rhs needs a one-particle operator")
    f = f1.entries
    pair = partial_trace_array(-interaction_array(m, 0, 1, np.kron(f, f), 2), [1], 2, m.dim)
    return ManyBodyOperator(-liouvillian_array(m, f, 1) + pair, m.dim)


def _vlasov_term(m: ModelSpec, t: float, f0: np.ndarray, n: int, nodes: int) -> np.ndarray:
    """The ``n``-th term of the iterated Vlasov series at time ``t``."""
    x, w = leggauss(nodes)
    d = m.dim

    def level(k: int, tau: float) -> np.ndarray:
        # operator on k particles after the (n + 1 - k) outermost integrals
        if k == n + 1:
            return power_array(free_array(m, tau, f0, [0], 1), k)
        if tau == 0.0:
            return np.zeros((d**k, d**k), dtype=complex)
        out = np.zeros((d**k, d**k), dtype=complex)
        for xi, wi in zip(x, w):
            tp = 0.5 * tau * (xi + 1.0)
            inner = level(k + 1, tp)
            g = np.zeros_like(inner)
            for i in range(k):
                g -= interaction_array(m, i, k, inner, k + 1)
            g = partial_trace_array(g, [k], k + 1, d)
            out += (0.5 * tau * wi) * free_array(m, tau - tp, g, range(k), k)
        return out

    return level(1, float(t))


def vlasov_series(m: ModelSpec, t: float, f1_init: ManyBodyOperator, order: int,
                  nodes: int = 10) -> ManyBodyOperator:
    """Iterated series for the Vlasov solution, truncated at ``order``."""
    if order < 0:
        raise ValueError("order must be >= 0")
    if f1_init.particle_count != 1:
        raise DimensionError("f1_init must be a one-particle operator")
    f0 = f1_init.entries
    out = _vlasov_term(m, t, f0, 0, nodes)
    for n in range(1, order + 1):
        out = out + _vlasov_term(m, t, f0, n, nodes)
    return ManyBodyOperator(out, m.dim)


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    values: tuple
    ratios: tuple


def _with_ratios(eps, columns) -> list:
    rows = []
    for k, e in enumerate(eps):
        vals = tuple(c[k] for c in columns)
        if k == 0:
            ratios = tuple(float("nan") for _ in columns)
        else:
            ratios = tuple((c[k - 1] / c[k]) if c[k] != 0 else float("nan") for c in columns)
        rows.append(SweepRow(e, vals, ratios))
    return rows


def meanfield_sweep(m_base: ModelSpec, sweep: SweepSpec, f1_limit_init: ManyBodyOperator,
                    cfg: SeriesConfig) -> list:
    """``delta(eps) = ||eps F_1(t) - f_1(t)||_1`` for each coupling of the sweep.

    Each row carries ``values = (delta,)`` and ``ratios = (delta_prev / delta,)``.
    """
    unit = _unit(m_base)
    limit = vlasov_series(unit, sweep.time, f1_limit_init, sweep.vlasov_order,
                          sweep.quadrature_nodes).entries

    def point(eps):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AdmissibilityWarning)
            scaled = kinetic_solution(unit.with_coupling(eps), sweep.time,
                                      (1.0 / eps) * f1_limit_init, cfg)
        return trace_norm_array(eps * scaled.entries - limit)

    _warn_largest(sweep, f1_limit_init, cfg)
    deltas = ordered_map(point, sweep.epsilons, cfg.workers)
    return _with_ratios(sweep.epsilons, [deltas])


def chaos_check(m_base: ModelSpec, sweep: SweepSpec, f1_limit_init: ManyBodyOperator,
                s: int, cfg: SeriesConfig) -> list:
    """Per coupling: ``||eps^s F_s(t|F_1(t)) - prod f_1(t)||_1`` and
    ``||eps^s G_s(t|F_1(t))||_1``."""
    unit = _unit(m_base)
    limit = vlasov_series(unit, sweep.time, f1_limit_init, sweep.vlasov_order,
                          sweep.quadrature_nodes).entries
    limit_s = power_array(limit, s)

    def point(eps):
        m = unit.with_coupling(eps)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AdmissibilityWarning)
            f1_t = kinetic_solution(m, sweep.time, (1.0 / eps) * f1_limit_init, cfg)
            fs = marginal_functional(m, s, sweep.time, f1_t, cfg).entries
            gs = correlation_functional(m, s, sweep.time, f1_t, cfg).entries
        return (trace_norm_array(eps**s * fs - limit_s), trace_norm_array(eps**s * gs))

    _warn_largest(sweep, f1_limit_init, cfg)
    pts = ordered_map(point, sweep.epsilons, cfg.workers)
    return _with_ratios(sweep.epsilons, [[p[0] for p in pts], [p[1] for p in pts]])


def v_scaling_trend(m_base: ModelSpec, sweep: SweepSpec, f1: ManyBodyOperator,
                    s: int, n: int) -> list:
    """``||Tr_{s+1..s+n} V_{1+n}(t) prod f1||_1 / eps^n`` at each coupling.

    The added particles are traced out, as in the functional series: with the
    leading-labels reduced cumulants only the traced operator on symmetric
    product states carries the ``o(eps^n)`` behaviour.
    """
    if f1.particle_count != 1:
        raise DimensionError("f1 must be a one-particle operator")
    unit = _unit(m_base)
    total = s + n
    base = power_array(f1.entries, total)
    out = []
    for eps in sweep.epsilons:
        g = v_recursive_array(unit.with_coupling(eps), sweep.time, s, n, base, total)
        if n:
            g = partial_trace_array(g, range(s, total), total, unit.dim)
        out.append(trace_norm_array(g) / eps**n)
    return out


def _warn_largest(sweep: SweepSpec, f1_limit_init: ManyBodyOperator, cfg: SeriesConfig):
    if not cfg.norm_guard:
        return
    norm = trace_norm_array(f1_limit_init.entries) / sweep.epsilons[0]
    if norm >= np.exp(-2.0):
        warnings.warn(f"scaled initial datum has trace norm {norm:.4g} >= exp(-2) at the "
                      "largest coupling; the unscaled series bounds do not apply",
                      AdmissibilityWarning, stacklevel=3)
