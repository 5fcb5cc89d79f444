"""Batch front end.

Usage::

    qkinetic run CONFIG.json
    qkinetic COMMAND [--config CONFIG.json] [-o OUT] [--format csv|json] [--workers N]

The config is a JSON document (``schema_version`` 1).  Every section is
optional and falls back to the bundled defaults; command-line flags override
the file.  Matrices are row-major lists of ``[re, im]`` pairs, either nested by
rows or flat::

    {
      "schema_version": 1,
      "command": "equivalence",
      "model": {"one_body": [[[0, 0], [0.4, 0]], [[0.4, 0], [1, 0]]],
                "pair_potential": ..., "coupling": 0.5, "hbar": 1.0},
      "initial": [[[0.06, 0], [0.01, 0]], [[0.01, 0], [0.04, 0]]],
      "series": {"n_max": 4, "dt": 0.1, "norm_guard": true},
      "contraction": {"max_iters": 50, "fixed_point_tol": 1e-13},
      "sweep": {"epsilons": [0.4, 0.2, 0.1, 0.05], "time": 0.25,
                "vlasov_order": 3, "quadrature_nodes": 10},
      "time": 0.3, "times": [0.0, 0.1, 0.2], "s": 2, "n_max_list": [1, 2, 3, 4],
      "observables": {"energy": ...}, "seed": 0, "workers": 1,
      "output_path": "out.csv", "format": "csv"
    }

Exit status: 0 on success, 1 when ``selftest`` has failures, 2 on invalid
configuration.  Admissibility warnings go to stderr and never change the exit
status.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import combinatorics as cb
from . import cumulants as cu
from . import scaling as sc
from . import solvers as sv
from .model import ModelError, ModelSpec, default_model
from .operators import (
    HERMITIAN_TOL, ManyBodyOperator, max_abs, random_hermitian, trace_norm_array,
)

SCHEMA_VERSION = 1
COMMANDS = ("evolve", "equivalence", "invert", "meanfield", "chaos", "cumulant-table",
            "selftest")
DEFAULT_INITIAL = np.array([[0.06, 0.01 - 0.005j], [0.01 + 0.005j, 0.04]])


class ConfigError(ValueError):
    """Invalid run configuration; the message starts with the offending field."""


# --------------------------------------------------------------------------- #
#                                  config                                      #
# --------------------------------------------------------------------------- #

def parse_matrix(value, name: str, side: int | None = None) -> np.ndarray:
    """Row-major ``[re, im]`` pairs (nested by rows or flat) to a complex array."""
    try:
        a = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a numeric matrix ({exc})") from None
    if a.ndim == 2 and a.shape[1] == 2:
        n = math.isqrt(a.shape[0])
        if n * n != a.shape[0]:
            raise ConfigError(f"{name}: flat list of {a.shape[0]} entries is not square")
        a = a.reshape(n, n, 2)
    if a.ndim != 3 or a.shape[2] != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"{name}: expected a square matrix of [re, im] pairs")
    if side is not None and a.shape[0] != side:
        raise ConfigError(f"{name}: expected side {side}, got {a.shape[0]}")
    return a[..., 0] + 1j * a[..., 1]


def dump_matrix(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


def _section(raw: dict, key: str) -> dict:
    value = raw.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{key}: expected an object")
    return value


def _build(cls, values: dict, prefix: str, allowed):
    unknown = set(values) - set(allowed)
    if unknown:
        raise ConfigError(f"{prefix}.{sorted(unknown)[0]}: unknown field")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith(prefix) else f"{prefix}: {msg}") from None


@dataclass
class RunConfig:
    command: str = "selftest"
    model: ModelSpec = field(default_factory=default_model)
    initial: ManyBodyOperator = field(
        default_factory=lambda: ManyBodyOperator(DEFAULT_INITIAL, 2, hermitian=True))
    series: sv.SeriesConfig = field(default_factory=sv.SeriesConfig)
    contraction: sv.ContractionConfig = field(default_factory=sv.ContractionConfig)
    sweep: sc.SweepSpec = field(default_factory=sc.SweepSpec)
    time: float = 0.3
    times: tuple = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    s: int = 2
    n_max_list: tuple = (1, 2, 3, 4)
    observables: dict = field(default_factory=dict)
    seed: int = 0
    output_path: str | None = None
    format: str = "csv"

    @property
    def workers(self) -> int:
        return self.series.workers

    def resolved(self) -> dict:
        """The full configuration as plain data (worker count excluded: it does
        not affect results)."""
        m = self.model
        series = {"n_max": self.series.n_max, "dt": self.series.dt,
                  "tol": dict(sorted(self.series.tol.items())),
                  "norm_guard": self.series.norm_guard}
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "model": {"one_body": dump_matrix(m.one_body),
                      "pair_potential": dump_matrix(m.pair_potential),
                      "coupling": m.coupling, "hbar": m.hbar},
            "initial": dump_matrix(self.initial.entries),
            "series": series,
            "contraction": {"max_iters": self.contraction.max_iters,
                            "fixed_point_tol": self.contraction.fixed_point_tol,
                            "threshold": self.contraction.threshold},
            "sweep": {"epsilons": list(self.sweep.epsilons), "time": self.sweep.time,
                      "vlasov_order": self.sweep.vlasov_order,
                      "quadrature_nodes": self.sweep.quadrature_nodes},
            "time": self.time, "times": list(self.times), "s": self.s,
            "n_max_list": list(self.n_max_list),
            "observables": {k: dump_matrix(v.entries) for k, v in self.observables.items()},
            "seed": self.seed, "format": self.format,
        }


TOP_LEVEL = {"schema_version", "command", "model", "initial", "series", "contraction",
             "sweep", "time", "times", "s", "n_max_list", "observables", "seed",
             "workers", "output_path", "format"}


def load_config(raw: dict) -> RunConfig:
    """Validate a decoded JSON document into a :class:`RunConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {version!r}")
    unknown = set(raw) - TOP_LEVEL
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown field")
    cfg = RunConfig()

    command = raw.get("command", cfg.command)
    if command not in COMMANDS:
        raise ConfigError(f"command: unknown command {command!r}")
    cfg.command = command

    mraw = _section(raw, "model")
    if mraw:
        extra = set(mraw) - {"one_body", "pair_potential", "coupling", "hbar"}
        if extra:
            raise ConfigError(f"model.{sorted(extra)[0]}: unknown field")
        base = default_model()
        h = (parse_matrix(mraw["one_body"], "model.one_body")
             if "one_body" in mraw else base.one_body)
        d = h.shape[0]
        phi = (parse_matrix(mraw["pair_potential"], "model.pair_potential", d * d)
               if "pair_potential" in mraw else None)
        if phi is None:
            if d != base.dim:
                raise ConfigError("model.pair_potential: required when dim != 2")
            phi = base.pair_potential
        try:
            cfg.model = ModelSpec(h, phi, coupling=float(mraw.get("coupling", base.coupling)),
                                  hbar=float(mraw.get("hbar", base.hbar)))
        except ModelError as exc:
            raise ConfigError(str(exc)) from None
    d = cfg.model.dim

    if "initial" in raw:
        f = parse_matrix(raw["initial"], "initial", d)
        if max_abs(f - f.conj().T) > HERMITIAN_TOL:
            raise ConfigError("initial: not hermitian")
        cfg.initial = ManyBodyOperator(f, d, hermitian=True)
    elif d != 2:
        raise ConfigError("initial: required when dim != 2")

    series = dict(_section(raw, "series"))
    if "workers" in raw:
        series["workers"] = raw["workers"]
    cfg.series = _build(sv.SeriesConfig, series, "series",
                        ("n_max", "dt", "tol", "norm_guard", "workers"))
    cfg.contraction = _build(sv.ContractionConfig, _section(raw, "contraction"), "contraction",
                             ("max_iters", "fixed_point_tol", "threshold"))
    sweep = dict(_section(raw, "sweep"))
    if "epsilons" in sweep:
        sweep["epsilons"] = tuple(sweep["epsilons"])
    cfg.sweep = _build(sc.SweepSpec, sweep, "sweep",
                       ("epsilons", "time", "vlasov_order", "quadrature_nodes"))

    cfg.time = _number(raw, "time", cfg.time)
    if "times" in raw:
        cfg.times = tuple(_number({"t": x}, "t", 0.0) for x in raw["times"])
    cfg.s = int(raw.get("s", cfg.s))
    if cfg.s < 1:
        raise ConfigError("s: must be >= 1")
    if "n_max_list" in raw:
        cfg.n_max_list = tuple(int(n) for n in raw["n_max_list"])
        if any(n < 0 for n in cfg.n_max_list):
            raise ConfigError("n_max_list: orders must be >= 0")
    obs = _section(raw, "observables")
    cfg.observables = {}
    for name in sorted(obs):
        a = parse_matrix(obs[name], f"observables.{name}", d)
        if max_abs(a - a.conj().T) > HERMITIAN_TOL:
            raise ConfigError(f"observables.{name}: not hermitian")
        cfg.observables[name] = ManyBodyOperator(a, d, hermitian=True)
    cfg.seed = int(raw.get("seed", cfg.seed))
    cfg.output_path = raw.get("output_path")
    cfg.format = raw.get("format", cfg.format)
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format: expected csv or json, got {cfg.format!r}")
    return cfg


def _number(raw, key, default) -> float:
    value = raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number")
    return float(value)


# --------------------------------------------------------------------------- #
#                                 commands                                     #
# --------------------------------------------------------------------------- #

def cmd_evolve(cfg: RunConfig) -> list:
    m = cfg.model
    observables = cfg.observables or {"one_body": ManyBodyOperator(m.one_body, m.dim)}
    rows = []
    for t in cfg.times:
        f = sv.kinetic_solution(m, t, cfg.initial, cfg.series)
        row = {"time": t, "trace": f.trace().real, "trace_norm": trace_norm_array(f.entries),
               "hermiticity": max_abs(f.entries - f.entries.conj().T)}
        for name, a in observables.items():
            row[f"avg_{name}"] = sv.observable_average(a, f)
        rows.append(row)
    return rows


def cmd_equivalence(cfg: RunConfig) -> list:
    report = sv.equivalence_report(cfg.model, cfg.s, cfg.time, cfg.initial, cfg.n_max_list,
                                   cfg.series)
    return [{"s": cfg.s, "time": cfg.time, "n_max": r.n_max, "residual": r.residual}
            for r in report]


def cmd_invert(cfg: RunConfig) -> list:
    m = cfg.model
    f_t = sv.kinetic_solution(m, cfg.time, cfg.initial, cfg.series)
    rep = sv.inversion_report(m, cfg.time, f_t, cfg.contraction, cfg.series)
    err = trace_norm_array(rep.initial.entries - cfg.initial.entries)
    rows = []
    for k, inc in enumerate(rep.increments, start=1):
        ratio = inc / rep.increments[k - 2] if k > 1 and rep.increments[k - 2] > 0 else math.nan
        rows.append({"iteration": k, "increment": inc, "ratio": ratio,
                     "recovery_error": err if k == rep.iterations else math.nan})
    return rows


def cmd_meanfield(cfg: RunConfig) -> list:
    rows = sc.meanfield_sweep(cfg.model, cfg.sweep, cfg.initial, cfg.series)
    return [{"epsilon": r.epsilon, "delta": r.values[0], "ratio": r.ratios[0]} for r in rows]


def cmd_chaos(cfg: RunConfig) -> list:
    rows = sc.chaos_check(cfg.model, cfg.sweep, cfg.initial, cfg.s, cfg.series)
    return [{"epsilon": r.epsilon, "marginal_gap": r.values[0], "marginal_ratio": r.ratios[0],
             "correlation_norm": r.values[1], "correlation_ratio": r.ratios[1]} for r in rows]


def cmd_cumulant_table(cfg: RunConfig, max_total: int = 4,
                       times=(0.1, 0.5, 1.0)) -> list:
    m, d = cfg.model, cfg.model.dim
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for t in times:
        for s in range(1, max_total + 1):
            for n in range(0, max_total - s + 1):
                f = ManyBodyOperator(random_hermitian(d ** (s + n), rng), d)
                arg = cu.ClusterArgument(s, n)
                a = cu.v_operator_direct(m, t, arg, f).entries
                b = cu.v_operator_recursive(m, t, arg, f).entries
                rows.append({"s": s, "n": n, "time": t, "coupling": m.coupling,
                             "residual": max_abs(a - b)})
    return rows


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool


def _le(name, value, threshold) -> Check:
    return Check(name, float(value), float(threshold), bool(value <= threshold))


def selftest_checks(cfg: RunConfig) -> list:
    """Invariant suite on the configured model and initial datum."""
    m, f0, series = cfg.model, cfg.initial, cfg.series
    d = m.dim
    rng = np.random.default_rng(cfg.seed)
    checks = []

    table = cmd_cumulant_table(cfg, max_total=3, times=(0.1, 0.5))
    checks.append(_le("direct_vs_recursive", max(r["residual"] for r in table), 1e-10))

    free = m.with_coupling(0.0)
    worst_free = worst_zero = 0.0
    for s, n in ((1, 0), (1, 1), (2, 1), (1, 2)):
        f = random_hermitian(d ** (s + n), rng)
        expect = f if n == 0 else np.zeros_like(f)
        worst_free = max(worst_free, max_abs(cu.v_recursive_array(free, 0.5, s, n, f, s + n)
                                             - expect))
        worst_zero = max(worst_zero, max_abs(cu.v_recursive_array(m, 0.0, s, n, f, s + n)
                                             - expect))
    checks.append(_le("v_collapse_free", worst_free, 1e-12))
    checks.append(_le("v_collapse_t0", worst_zero, 1e-12))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sv.AdmissibilityWarning)
        tr0 = f0.trace()
        norm0 = trace_norm_array(f0.entries)
        drift = herm = excess = 0.0
        for n_max in range(series.n_max + 1):
            c = series.with_order(n_max)
            for t in (0.1, 0.3):
                f = sv.kinetic_solution(m, t, f0, c).entries
                drift = max(drift, abs(np.trace(f) - tr0))
                herm = max(herm, max_abs(f - f.conj().T))
                f2 = sv.bbgky_marginal(m, 2, t, f0, c).entries
                excess = max(excess, trace_norm_array(f2) - norm0**2 * math.exp(2 * norm0))
        checks.append(_le("trace_conservation", drift, 1e-12))
        checks.append(_le("hermiticity", herm, 1e-11))
        checks.append(_le("norm_bound_excess", max(excess, 0.0), 0.0))

        f_t = sv.kinetic_solution(m, cfg.time, f0, series)
        coll = sv.collision_integral(m, cfg.time, f_t, series)
        checks.append(_le("collision_traceless", abs(coll.trace()), 1e-12))

        rows = sv.equivalence_report(m, 2, cfg.time, f0, (2, 4), series)
        checks.append(_le("equivalence_decay", rows[1].residual / max(rows[0].residual, 1e-300),
                          0.25))

        rep = sv.derivative_consistency(m, cfg.time, f0, series)
        checks.append(Check("derivative_ratio", rep.ratio, 4.0, 3.5 <= rep.ratio <= 4.5))

        try:
            inv = sv.inversion_report(m, cfg.time, f_t, cfg.contraction, series)
            err = trace_norm_array(inv.initial.entries - f0.entries)
        except sv.ConvergenceError:
            err = math.inf
        checks.append(_le("inversion_round_trip", err, 1e-8))

    for s in (1, 2):
        f = ManyBodyOperator(random_hermitian(d ** (s + 1), rng), d)
        checks.append(_le(f"duhamel_s{s}", cu.duhamel_residual(m, 0.5, s, f), 1e-8))

    unit = m.with_coupling(1.0)
    v = sc.vlasov_series(unit, 0.25, f0, 3, cfg.sweep.quadrature_nodes)
    checks.append(_le("vlasov_trace", abs(v.trace() - f0.trace()), 1e-11))

    bell_ok = all(sum(1 for _ in cb.set_partitions(n)) == cb.bell_number(n) for n in range(6))
    diss_ok = all(len(cb.dissections(n)) == 2 ** (n - 1) for n in range(1, 11))
    checks.append(Check("combinatorial_counts", float(bell_ok and diss_ok), 1.0,
                        bell_ok and diss_ok))
    return checks


def cmd_selftest(cfg: RunConfig) -> list:
    return [{"check": c.name, "passed": int(c.passed), "value": c.value,
             "threshold": c.threshold} for c in selftest_checks(cfg)]


DISPATCH = {
    "evolve": cmd_evolve,
    "equivalence": cmd_equivalence,
    "invert": cmd_invert,
    "meanfield": cmd_meanfield,
    "chaos": cmd_chaos,
    "cumulant-table": cmd_cumulant_table,
    "selftest": cmd_selftest,
}


# --------------------------------------------------------------------------- #
#                                  output                                      #
# --------------------------------------------------------------------------- #

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def to_csv(rows: list) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row[k]) for k in header])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def to_json(cfg: RunConfig, rows: list) -> str:
    doc = {"meta": _json_safe(cfg.resolved()), "rows": _json_safe(rows)}
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute the configured command; returns ``(exit_status, report_text)``."""
    rows = DISPATCH[cfg.command](cfg)
    text = to_csv(rows) if cfg.format == "csv" else to_json(cfg, rows)
    status = 0
    if cfg.command == "selftest" and not all(r["passed"] for r in rows):
        status = 1
    return status, text


# --------------------------------------------------------------------------- #
#                                  entry point                                 #
# --------------------------------------------------------------------------- #

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qkinetic", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=("run",) + COMMANDS,
                   help="'run' takes the command from the config file")
    p.add_argument("config_file", nargs="?", help="JSON config (positional form of --config)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int, help="thread count for independent terms")
    return p


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"qkinetic: warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    path = args.config or args.config_file
    try:
        raw = {}
        if path:
            try:
                with open(path, encoding="utf-8") as fh:
                    raw = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config: invalid JSON ({exc})") from None
        elif args.command == "run":
            raise ConfigError("config: 'run' needs a config file")
        raw = dict(raw)
        if args.command != "run":
            raw["command"] = args.command
        if args.format:
            raw["format"] = args.format
        if args.workers is not None:
            raw["workers"] = args.workers
        cfg = load_config(raw)
    except ConfigError as exc:
        print(f"qkinetic: error: {exc}", file=sys.stderr)
        return 2
    out = args.output or cfg.output_path
    with warnings.catch_warnings():
        warnings.simplefilter("always", sv.AdmissibilityWarning)
        warnings.showwarning = _show_warning
        status, text = run(cfg)
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
