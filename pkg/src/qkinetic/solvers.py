"""Truncated series solutions and the consistency checks built on them.

Three series are evaluated, each cut at its own ``n_max``:

* the BBGKY marginals ``F_s(t) = sum_n 1/n! Tr A_{1+n}(t) prod F_1^0``;
* the marginal functionals ``F_s(t | F_1(t)) = sum_n 1/n! Tr V_{1+n}(t) prod F_1(t)``
  and the correlation functionals (declustered cluster argument);
* the kinetic solution, which is the ``s = 1`` BBGKY marginal.

Equivalence between the routes is exact only for full series, so every check
here reports a residual and its decay with truncation order.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import combinatorics as cb
from .cumulants import reduced_cumulant_array, v_recursive_array
from .model import (
    ModelSpec, free_array, group_array, interaction_array, liouvillian_array,
)
from .operators import (
    DimensionError, ManyBodyOperator, MarginalState, embed_array, max_abs,
    partial_trace_array, power_array, trace_norm_array,
)
from .parallel import ordered_map, ordered_sum

SERIES_RADIUS = math.exp(-1.0)
FUNCTIONAL_RADIUS = math.exp(-2.0)


def _contraction_root() -> float:
    """Root of ``exp(2x) (2x + 1) = 2`` by bisection."""
    lo, hi = 0.0, 0.5
    g = lambda x: math.exp(2 * x) * (2 * x + 1) - 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


CONTRACTION_THRESHOLD = _contraction_root()


class AdmissibilityWarning(UserWarning):
    """Input norm is outside the regime where convergence is proven."""


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not converge within ``max_iters``."""


DEFAULT_TOLERANCES = {"hermitian": 1e-11, "trace": 1e-12, "imaginary": 1e-12}


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation and checking policy shared by every series evaluation.

    Attributes:
        n_max: highest series order kept.
        dt: finite-difference step of the derivative checks.
        tol: named tolerances; missing names fall back to the defaults.
        norm_guard: warn when the one-particle datum is outside the
            admissible radius.
        workers: thread count for independent series terms.  Terms are summed
            in order, so results do not depend on it.
    """

    n_max: int = 4
    dt: float = 0.1
    tol: dict = field(default_factory=dict)
    norm_guard: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("series.n_max must be >= 0")
        if not self.dt > 0:
            raise ValueError("series.dt must be positive")
        if self.workers < 1:
            raise ValueError("series.workers must be >= 1")
        object.__setattr__(self, "tol", {**DEFAULT_TOLERANCES, **dict(self.tol)})

    def with_order(self, n_max: int) -> SeriesConfig:
        return SeriesConfig(n_max, self.dt, self.tol, self.norm_guard, self.workers)


@dataclass(frozen=True)
class ContractionConfig:
    max_iters: int = 50
    fixed_point_tol: float = 1e-13
    threshold: float = CONTRACTION_THRESHOLD

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("contraction.max_iters must be >= 1")
        if not self.fixed_point_tol > 0:
            raise ValueError("contraction.fixed_point_tol must be positive")
        if not self.threshold > 0:
            raise ValueError("contraction.threshold must be positive")


# --------------------------------------------------------------------------- #
#                                   helpers                                    #
# --------------------------------------------------------------------------- #

def _one_particle(f: ManyBodyOperator, m: ModelSpec, what: str) -> np.ndarray:
    if f.particle_count != 1:
        raise DimensionError(f"{what} must be a one-particle operator")
    if f.dim != m.dim:
        raise DimensionError(f"{what} has dim {f.dim}, model has {m.dim}")
    return f.entries


def _guard(cfg: SeriesConfig, f: np.ndarray, what: str, functional: bool):
    if not cfg.norm_guard:
        return
    norm = trace_norm_array(f)
    if not functional and norm >= SERIES_RADIUS:
        warnings.warn(f"{what}: trace norm {norm:.4g} >= exp(-1); convergence of the "
                      "BBGKY series is not guaranteed", AdmissibilityWarning, stacklevel=3)
    elif norm >= FUNCTIONAL_RADIUS:
        warnings.warn(f"{what}: trace norm {norm:.4g} >= exp(-2); convergence of the "
                      "marginal functionals is not guaranteed", AdmissibilityWarning,
                      stacklevel=3)


def _trace_tail(a: np.ndarray, s: int, n: int, d: int) -> np.ndarray:
    if n == 0:
        return a
    return partial_trace_array(a, range(s, s + n), s + n, d)


def _series(term, cfg: SeriesConfig) -> np.ndarray:
    return ordered_sum(ordered_map(term, range(cfg.n_max + 1), cfg.workers))


# --------------------------------------------------------------------------- #
#                                 the series                                   #
# --------------------------------------------------------------------------- #

def bbgky_terms(m: ModelSpec, s: int, t: float, f1: np.ndarray, cfg: SeriesConfig) -> list:
    """Individual terms ``1/n! Tr A_{1+n} prod F_1^0`` for ``n = 0..n_max``."""
    d = m.dim

    def term(n):
        total = s + n
        g = reduced_cumulant_array(m, t, "group", range(s), range(s, total),
                                   power_array(f1, total), total)
        return _trace_tail(g, s, n, d) / factorial(n)

    return ordered_map(term, range(cfg.n_max + 1), cfg.workers)


def bbgky_marginal(m: ModelSpec, s: int, t: float, f1_init: ManyBodyOperator,
                   cfg: SeriesConfig) -> ManyBodyOperator:
    """Truncated series solution of the hierarchy with chaotic initial data."""
    if s < 1:
        raise DimensionError("s must be >= 1")
    f1 = _one_particle(f1_init, m, "f1_init")
    _guard(cfg, f1, "initial one-particle operator", functional=False)
    return ManyBodyOperator(ordered_sum(bbgky_terms(m, s, t, f1, cfg)), m.dim)


def kinetic_solution(m: ModelSpec, t: float, f1_init: ManyBodyOperator,
                     cfg: SeriesConfig) -> ManyBodyOperator:
    """One-particle solution of the kinetic equation (the ``s = 1`` marginal)."""
    return bbgky_marginal(m, 1, t, f1_init, cfg)


def _functional(m: ModelSpec, s: int, t: float, f1_t: ManyBodyOperator,
                cfg: SeriesConfig, declustered: bool) -> ManyBodyOperator:
    if s < 1:
        raise DimensionError("s must be >= 1")
    f1 = _one_particle(f1_t, m, "f1_t")
    _guard(cfg, f1, "one-particle operator", functional=True)
    d = m.dim

    def term(n):
        total = s + n
        g = v_recursive_array(m, t, s, n, power_array(f1, total), total, declustered)
        return _trace_tail(g, s, n, d) / factorial(n)

    return ManyBodyOperator(_series(term, cfg), d)


def marginal_functional(m: ModelSpec, s: int, t: float, f1_t: ManyBodyOperator,
                        cfg: SeriesConfig) -> ManyBodyOperator:
    """``F_s(t | F_1(t))`` truncated at ``cfg.n_max``."""
    return _functional(m, s, t, f1_t, cfg, declustered=False)


def correlation_functional(m: ModelSpec, s: int, t: float, f1_t: ManyBodyOperator,
                           cfg: SeriesConfig) -> ManyBodyOperator:
    """``G_s(t | F_1(t))``: the marginal-functional series with the cluster
    labels split into separate elements."""
    return _functional(m, s, t, f1_t, cfg, declustered=True)


def correlation_from_marginals(marginals: MarginalState, s: int) -> ManyBodyOperator:
    """Cumulant of the marginals over the partitions of ``1..s``."""
    if s < 1:
        raise DimensionError("s must be >= 1")
    if s > marginals.s_max:
        raise KeyError(f"marginal of order {s} missing (have 1..{marginals.s_max})")
    d = marginals[1].dim
    out = np.zeros((d**s, d**s), dtype=complex)
    for blocks in cb.set_partitions(s):
        p = len(blocks)
        prod = None
        for blk in blocks:
            e = embed_array(marginals[len(blk)].entries, blk, s, d)
            prod = e if prod is None else prod @ e
        out += (-1) ** (p - 1) * factorial(p - 1) * prod
    return ManyBodyOperator(out, d)


def collision_integral(m: ModelSpec, t: float, f1_t: ManyBodyOperator,
                       cfg: SeriesConfig) -> ManyBodyOperator:
    """``Tr_2 (-N_int(1,2)) F_2(t | F_1(t))``."""
    f2 = marginal_functional(m, 2, t, f1_t, cfg).entries
    g = -interaction_array(m, 0, 1, f2, 2)
    return ManyBodyOperator(partial_trace_array(g, [1], 2, m.dim), m.dim)


def kinetic_rhs(m: ModelSpec, t: float, f1_t: ManyBodyOperator,
                cfg: SeriesConfig) -> ManyBodyOperator:
    """Right-hand side of the kinetic equation at ``F_1(t)``."""
    free = -liouvillian_array(m, f1_t.entries, 1)
    return ManyBodyOperator(free + collision_integral(m, t, f1_t, cfg).entries, m.dim)


# --------------------------------------------------------------------------- #
#                              consistency checks                              #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class DerivativeReport:
    time: float
    steps: tuple
    residuals: tuple
    scheme: str

    @property
    def ratio(self) -> float:
        return self.residuals[0] / self.residuals[1]

    @property
    def observed_order(self) -> float:
        return math.log2(self.ratio)


def derivative_consistency(m: ModelSpec, t: float, f1_init: ManyBodyOperator,
                           cfg: SeriesConfig) -> DerivativeReport:
    """Finite-difference time derivative of the kinetic solution against the
    kinetic equation's right-hand side, at steps ``dt`` and ``dt/2``.

    A central difference is used (expected ratio 4); when ``t < dt`` a forward
    difference is used instead (expected ratio 2).
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdmissibilityWarning)
        f_t = kinetic_solution(m, t, f1_init, cfg)
        rhs = kinetic_rhs(m, t, f_t, cfg).entries
        central = t >= cfg.dt
        steps = (cfg.dt, cfg.dt / 2)
        res = []
        for h in steps:
            plus = kinetic_solution(m, t + h, f1_init, cfg).entries
            if central:
                minus = kinetic_solution(m, t - h, f1_init, cfg).entries
                fd = (plus - minus) / (2 * h)
            else:
                fd = (plus - f_t.entries) / h
            res.append(trace_norm_array(fd - rhs))
    return DerivativeReport(t, steps, tuple(res), "central" if central else "forward")


def product_identity_residual(m: ModelSpec, s: int, n: int, t: float,
                              f1_init: ManyBodyOperator, cfg: SeriesConfig,
                              inner_order: int | None = None) -> float:
    """Max-abs gap between ``prod_{i<=s+n} F_1(t, i)`` and its expansion over
    products of initial data.

    The left side uses the kinetic solution at ``cfg.n_max``.  The right side
    keeps dissections of ``Z = (s+n+1, ..., s+n+n_1)`` for ``n_1 <= inner_order``
    with blocks of at most ``cfg.n_max`` particles, which makes it exact once
    ``inner_order`` reaches ``(s+n) * cfg.n_max``.
    """
    k = s + n
    if k < 1:
        raise DimensionError("s + n must be >= 1")
    if inner_order is None:
        inner_order = k * cfg.n_max
    f1 = _one_particle(f1_init, m, "f1_init")
    d = m.dim
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdmissibilityWarning)
        lhs = power_array(kinetic_solution(m, t, f1_init, cfg).entries, k)
    rhs = np.zeros_like(lhs)
    for n1 in range(inner_order + 1):
        total = k + n1
        base = power_array(f1, total)
        if n1 == 0:
            rhs += free_array(m, t, base, range(k), total)
            continue
        acc = np.zeros_like(base)
        zone = tuple(range(k, total))
        for D in cb.dissections_bounded(n1, k, zone):
            if max(D.sizes()) > cfg.n_max:
                continue
            weight = 1.0
            for X in D.parts:
                weight /= factorial(len(X))
            for idx in _increasing(len(D), k):
                g = base
                for i, X in zip(idx, D.parts):
                    g = reduced_cumulant_array(m, t, "group", (i,), X, g, total)
                rest = [p for p in range(k) if p not in idx]
                g = free_array(m, t, g, rest, total)
                acc += weight * g
        rhs += partial_trace_array(acc, zone, total, d)
    return max_abs(lhs - rhs)


def _increasing(r: int, k: int):
    return itertools.combinations(range(k), r)


@dataclass(frozen=True)
class EquivalenceRow:
    n_max: int
    residual: float


def equivalence_report(m: ModelSpec, s: int, t: float, f1_init: ManyBodyOperator,
                       n_max_list, cfg: SeriesConfig | None = None) -> list:
    """Trace-norm gap between the BBGKY marginal and the marginal functional of
    the kinetic solution, one row per truncation order."""
    cfg = cfg or SeriesConfig()
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdmissibilityWarning)
        for n_max in n_max_list:
            c = cfg.with_order(n_max)
            direct = bbgky_marginal(m, s, t, f1_init, c).entries
            f1_t = kinetic_solution(m, t, f1_init, c)
            via = marginal_functional(m, s, t, f1_t, c).entries
            rows.append(EquivalenceRow(n_max, trace_norm_array(direct - via)))
    return rows


# --------------------------------------------------------------------------- #
#                       inversion of the kinetic solution                      #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class InversionReport:
    initial: ManyBodyOperator
    iterations: int
    increments: tuple

    @property
    def ratios(self) -> tuple:
        inc = self.increments
        return tuple(b / a for a, b in zip(inc, inc[1:]) if a > 0)


def contraction_map(m: ModelSpec, t: float, f1_t: np.ndarray, f: np.ndarray,
                    cfg: SeriesConfig) -> np.ndarray:
    """``G_1(t) F_1(t) - sum_{n>=1} 1/n! Tr G_1(t) A_{1+n}(t) prod f``."""
    out = group_array(m, -t, f1_t, [0], 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdmissibilityWarning)
        terms = bbgky_terms(m, 1, t, f, cfg)
    for term in terms[1:]:
        out = out - group_array(m, -t, term, [0], 1)
    return out


def inversion_report(m: ModelSpec, t: float, f1_t: ManyBodyOperator,
                     ccfg: ContractionConfig | None = None,
                     cfg: SeriesConfig | None = None) -> InversionReport:
    """Successive approximations of the initial datum from ``F_1(t)``."""
    ccfg = ccfg or ContractionConfig()
    cfg = cfg or SeriesConfig()
    target = _one_particle(f1_t, m, "f1_t")
    norm = trace_norm_array(target)
    if norm >= ccfg.threshold:
        warnings.warn(f"trace norm {norm:.4g} >= {ccfg.threshold:.5f}; the map is not "
                      "guaranteed to be a contraction", AdmissibilityWarning, stacklevel=2)
    f = group_array(m, -t, target, [0], 1)
    increments = []
    for k in range(1, ccfg.max_iters + 1):
        nxt = contraction_map(m, t, target, f, cfg)
        increments.append(trace_norm_array(nxt - f))
        f = nxt
        if increments[-1] < ccfg.fixed_point_tol:
            return InversionReport(ManyBodyOperator(f, m.dim), k, tuple(increments))
    raise ConvergenceError(
        f"no fixed point within {ccfg.max_iters} iterations "
        f"(last increment {increments[-1]:.3e})")


def invert_initial_data(m: ModelSpec, t: float, f1_t: ManyBodyOperator,
                        ccfg: ContractionConfig | None = None,
                        cfg: SeriesConfig | None = None) -> ManyBodyOperator:
    """Recover ``F_1^0`` from ``F_1(t)`` by fixed-point iteration."""
    return inversion_report(m, t, f1_t, ccfg, cfg).initial


# --------------------------------------------------------------------------- #
#                                  observables                                 #
# --------------------------------------------------------------------------- #

def observable_average(a: ManyBodyOperator, state: ManyBodyOperator,
                       tol: float = DEFAULT_TOLERANCES["imaginary"]) -> float:
    """``1/s! Tr a_s F_s`` (no prefactor for ``s = 1``)."""
    if a.dim != state.dim or a.particle_count != state.particle_count:
        raise DimensionError("observable and state act on different spaces")
    value = np.trace(a.entries @ state.entries) / factorial(a.particle_count)
    if abs(value.imag) > tol * max(1.0, abs(value.real)):
        raise ValueError(f"average has imaginary part {value.imag:.3e}")
    return float(value.real)


def dispersion(a1: ManyBodyOperator, f1: ManyBodyOperator, g2: ManyBodyOperator) -> float:
    """Dispersion of the additive observable built from ``a1``.

    ``Tr_1 (a^2 - <A>^2) F_1 + Tr_{1,2} a(1) a(2) G_2``.
    """
    if a1.particle_count != 1 or f1.particle_count != 1 or g2.particle_count != 2:
        raise DimensionError("need a one-particle a1, f1 and a two-particle g2")
    mean = observable_average(a1, f1)
    a = a1.entries
    single = np.trace((a @ a - mean**2 * np.eye(a1.side)) @ f1.entries)
    pair = np.trace(np.kron(a, a) @ g2.entries)
    return float((single + pair).real)
