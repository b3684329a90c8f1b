"""Command-line experiment runner.

Usage: ``python3 -m shadowham <subcommand> [--config PATH] [--out DIR] [--seed U64] [--jobs N]``.
Exit codes: 0 when every check passes, 1 when a check fails, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import _svg
from .core import PhasePoint, ResourceBudgetExceeded, SeparableHamiltonian, SmoothScalarFamily

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
DEFAULT_SEED = 20240607


class ConfigError(Exception):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


# ---------------------------------------------------------------------------
# value parsers

def _float(s: str) -> float:
    return float(s)


def _int(s: str) -> int:
    return int(s)


def _floats(s: str) -> list[float]:
    return [float(t) for t in s.replace(";", ",").split(",") if t.strip()]


def _ints(s: str) -> list[int]:
    return [int(t) for t in s.replace(";", ",").split(",") if t.strip()]


def _pairs(s: str) -> list[tuple[float, float]]:
    out = []
    for item in s.replace(";", ",").split(","):
        item = item.strip()
        if not item:
            continue
        x, y = item.split(":")
        out.append((float(x), float(y)))
    return out


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        s = s.strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return parse


_HAMILTONIAN = {
    "family": _choice("logcosh", "quadratic", "power", "log"),
    "a": _float, "b": _float, "exponent": _float, "alpha": _float, "beta": _float,
}

SCHEMA: dict[str, dict[str, dict[str, Callable[[str], Any]]]] = {
    "simulate": {
        "hamiltonian": _HAMILTONIAN,
        "run": {"eta": _float, "steps": _int, "p0": _float, "q0": _float,
                "scheme": _choice("symplectic", "forward", "backward", "exact_quadratic"),
                "orders": _ints},
    },
    "order-sweep": {
        "hamiltonian": _HAMILTONIAN,
        "run": {"etas": _floats, "steps": _int, "p0": _float, "q0": _float, "orders": _ints},
        "checks": {"metric": _choice("drift", "rate"), "slope_offset": _float, "slope_tol": _float},
    },
    "regret": {
        "game": {"kind": _choice("matching_pennies", "rps", "antisymmetric", "random"),
                 "dim": _int, "a0": _floats, "b0": _floats},
        "run": {"Ks": _ints, "c": _float, "order": _int, "window": _int, "comparators": _int},
        "checks": {"identity_tol": _float, "max_envelope_slope": _float, "require_decreasing": _bool},
    },
    "quad-mh": {
        "run": {"pairs": _pairs, "eta_max": _float, "samples": _int},
    },
    "examples-fig": {
        "run": {"exponents": _floats, "eta": _float, "steps": _int, "starts": _pairs, "radius": _float},
    },
    "cancel-verify": {"run": {"order": _int, "max_seconds": _float}},
    "phi": {"run": {"order": _int}},
    "combinatorics-verify": {"run": {"max_k": _int}},
}
_EXPERIMENT_KEYS = {"kind": str, "seed": _int}


@dataclass
class ExperimentConfig:
    kind: str
    sections: dict[str, dict[str, Any]]
    seed: int
    path: Optional[str] = None
    raw: dict[str, dict[str, str]] = field(default_factory=dict)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    @property
    def hash(self) -> str:
        canon = [f"kind={self.kind}", f"seed={self.seed}"]
        for sec in sorted(self.raw):
            for key in sorted(self.raw[sec]):
                canon.append(f"{sec}.{key}={self.raw[sec][key].strip()}")
        return hashlib.sha256("\n".join(canon).encode()).hexdigest()[:16]


def _line_of(text: str, section: str, key: Optional[str]) -> Optional[int]:
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return no
            continue
        if current == section and key is not None and s and s[0] not in "#;":
            name = s.split("=", 1)[0].split(":", 1)[0].strip()
            if name.lower() == key.lower():
                return no
    return None


def load_config(path: Optional[str], command: str, seed_override: Optional[int] = None) -> ExperimentConfig:
    """Parse and validate an INI-style experiment file against the command schema."""
    schema = SCHEMA.get(command, {})
    raw: dict[str, dict[str, str]] = {}
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", path) from exc
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}", path) from exc
        raw = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    exp = raw.pop("experiment", {})
    for key in exp:
        if key not in _EXPERIMENT_KEYS:
            raise ConfigError(f"unknown key {key!r} in [experiment]", path, _line_of(text, "experiment", key))
    kind = exp.get("kind", command).strip()
    if kind != command:
        raise ConfigError(f"config is for {kind!r}, not {command!r}", path, _line_of(text, "experiment", "kind"))
    seed = DEFAULT_SEED
    if "seed" in exp:
        try:
            seed = int(exp["seed"])
        except ValueError as exc:
            raise ConfigError("seed must be an integer", path, _line_of(text, "experiment", "seed")) from exc
    if seed_override is not None:
        seed = seed_override
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", path)
    sections: dict[str, dict[str, Any]] = {}
    for sec, items in raw.items():
        if sec not in schema:
            raise ConfigError(f"unknown section [{sec}]", path, _line_of(text, sec, None))
        parsed = {}
        for key, value in items.items():
            if key not in schema[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", path, _line_of(text, sec, key))
            try:
                parsed[key] = schema[sec][key](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {sec}.{key}: {exc}", path, _line_of(text, sec, key)) from exc
        sections[sec] = parsed
    raw_all = dict(raw)
    return ExperimentConfig(command, sections, seed, path, raw_all)


# ---------------------------------------------------------------------------
# output helpers

REPORT_HEADER = ["experiment", "config_hash", "seed", "parameters", "metric", "value"]


@dataclass
class Report:
    config: ExperimentConfig
    rows: list[list[str]] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def add(self, parameters: dict[str, Any], metric: str, value: Any) -> None:
        params = ";".join(f"{k}={_cell(v)}" for k, v in parameters.items())
        self.rows.append([self.config.kind, self.config.hash, str(self.config.seed), params, metric, _cell(value)])

    def check(self, ok: bool, message: str) -> bool:
        if not ok:
            self.failures.append(message)
        return ok

    def write(self, out: Path) -> None:
        rows = sorted(self.rows, key=lambda r: (r[3], r[4]))
        _write_csv(out / "report.csv", REPORT_HEADER, rows)


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _pool_map(fn, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def fit_loglog(xs: Sequence[float], ys: Sequence[float], floor: float = 1e-14) -> tuple[float, float, bool]:
    """Least-squares slope and intercept of log y against log x; flag data at noise level."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    degenerate = bool(np.any(ys <= floor))
    ys = np.maximum(ys, floor)
    slope, intercept = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope), float(intercept), degenerate


# ---------------------------------------------------------------------------
# Hamiltonian construction

def build_hamiltonian(cfg: ExperimentConfig) -> SeparableHamiltonian:
    h = cfg.sections.get("hamiltonian", {})
    fam = h.get("family", "logcosh")
    if fam == "logcosh":
        return SeparableHamiltonian(SmoothScalarFamily.logcosh(), SmoothScalarFamily.logcosh(), 1)
    if fam == "quadratic":
        return SeparableHamiltonian.quadratic([[h.get("a", 1.0)]], [[h.get("b", 1.0)]])
    if fam == "power":
        e = h.get("exponent", 2.0)
        return SeparableHamiltonian(SmoothScalarFamily.power(e), SmoothScalarFamily.power(e), 1)
    return SeparableHamiltonian(SmoothScalarFamily.log(h.get("alpha", 0.0)),
                                SmoothScalarFamily.log(h.get("beta", 0.0)), 1)


def _mh_values(H: SeparableHamiltonian, points, eta: float, N: int) -> np.ndarray:
    from .mh_symbolic import truncated_mh_eval

    return np.array([truncated_mh_eval(H, z, eta, N) for z in points])


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cfg: ExperimentConfig, out: Path, jobs: int) -> Report:
    from .integrators import Scheme, StepperConfig, run_trajectory
    from .mh_closed import mh_quadratic_1d

    rep = Report(cfg)
    H = build_hamiltonian(cfg)
    run = cfg.sections.get("run", {})
    eta = run.get("eta", 0.05)
    steps = run.get("steps", 1000)
    z0 = PhasePoint([run.get("p0", 1.0)], [run.get("q0", 1.0)])
    scheme = Scheme(run.get("scheme", "symplectic"))
    orders = run.get("orders", [])
    traj = run_trajectory(H, z0, StepperConfig(eta, scheme), steps)
    with open(out / "trajectory.csv", "w", newline="") as fh:
        traj.write_csv(fh)
    params = {"eta": eta, "steps": steps, "scheme": scheme.value}
    # the step-0 row is the initial condition; K = 0 therefore has no rows
    header = ["step"] + [f"mh_{N}" for N in orders]
    fam = cfg.get("hamiltonian", "family", "logcosh")
    closed = None
    if fam == "quadratic":
        a, b = cfg.get("hamiltonian", "a", 1.0), cfg.get("hamiltonian", "b", 1.0)
        closed = np.array([mh_quadratic_1d(a, b, z.p[0], z.q[0], eta) for z in traj.points])
        header.append("mh_closed")
        rel = float(np.max(np.abs(closed - closed[0])) / abs(closed[0]))
        rep.add(params, "closed_form_max_relative_drift", rel)
    traces = {N: _mh_values(H, traj.points, eta, N) for N in orders}
    if steps == 0:
        rows: list[list] = []
    else:
        rows = []
        for k in range(steps + 1):
            row = [k] + [traces[N][k] for N in orders]
            if closed is not None:
                row.append(closed[k])
            rows.append(row)
    _write_csv(out / "mh_values.csv", header, rows)
    ptp = []
    for N in orders:
        v = traces[N]
        ptp.append(float(np.ptp(v)))
        rep.add({**params, "order": N}, "initial_value", v[0])
        rep.add({**params, "order": N}, "peak_to_peak", ptp[-1])
    if len(ptp) >= 2:
        rep.add(params, "peak_to_peak_strictly_decreasing", all(x > y for x, y in zip(ptp, ptp[1:])))
    if orders:
        ks = list(range(steps + 1))
        panels = [(f"modified Hamiltonian, order {N}", ks, [traces[N].tolist()], [f"N={N}"]) for N in orders]
        (out / "mh_trace.svg").write_text(_svg.line_panels(panels))
    return rep


def _sweep_point(args):
    cfg_h, eta, steps, p0, q0, orders = args
    from .integrators import StepperConfig, run_trajectory

    H = _hamiltonian_from_dict(cfg_h)
    traj = run_trajectory(H, PhasePoint([p0], [q0]), StepperConfig(eta), steps)
    res = {}
    k = np.arange(1, steps + 1)
    for N in orders:
        v = _mh_values(H, traj.points, eta, N)
        drift = np.abs(v[1:] - v[0])
        res[N] = (float(drift.max()), float((drift / k).max()))
    return eta, res


def _hamiltonian_from_dict(h: dict) -> SeparableHamiltonian:
    cfg = ExperimentConfig("simulate", {"hamiltonian": h}, 0)
    return build_hamiltonian(cfg)


def cmd_order_sweep(cfg: ExperimentConfig, out: Path, jobs: int) -> Report:
    from .mh_symbolic import phi_bound

    rep = Report(cfg)
    run = cfg.sections.get("run", {})
    etas = sorted(run.get("etas", [0.2, 0.1, 0.05, 0.025]), reverse=True)
    if len(etas) < 3:
        raise ConfigError("order-sweep needs at least three step sizes", cfg.path)
    steps = run.get("steps", 1000)
    orders = run.get("orders", [0, 1, 2, 3])
    h = dict(cfg.sections.get("hamiltonian", {}))
    work = [(h, eta, steps, run.get("p0", 1.0), run.get("q0", 1.0), orders) for eta in etas]
    results = sorted(_pool_map(_sweep_point, work, jobs), key=lambda r: -r[0])
    rows = []
    for eta, res in results:
        for N in orders:
            rows.append([N, eta, res[N][0], res[N][1]])
    rows.sort(key=lambda r: (r[0], -r[1]))
    _write_csv(out / "sweep.csv", ["order", "eta", "max_drift", "max_drift_per_step"], rows)
    checks = cfg.sections.get("checks", {})
    fit_rows = []
    for N in orders:
        drift = [res[N][0] for _, res in results]
        rate = [res[N][1] for _, res in results]
        phi = float(phi_bound(N)) if N <= 6 else float("nan")
        for metric, ys in (("drift", drift), ("rate", rate)):
            slope, intercept, degenerate = fit_loglog(etas, ys)
            # empirical constant of the bound  rate <= Phi(N) eta^(N+2)  (L = 1)
            phi_hat = max(y / e ** (N + 2) for y, e in zip(rate, etas)) if metric == "rate" else float("nan")
            fit_rows.append([N, metric, slope, intercept, degenerate, phi_hat, phi])
            p = {"order": N, "metric": metric}
            rep.add(p, "slope", slope)
            rep.add(p, "intercept", intercept)
            rep.add(p, "degenerate_fit", degenerate)
            if metric == "rate":
                rep.add(p, "phi_hat", phi_hat)
                rep.add(p, "phi_bound", phi)
            if "slope_offset" in checks and checks.get("metric", "drift") == metric and not degenerate:
                target = N + checks["slope_offset"]
                tol = checks.get("slope_tol", 0.3)
                rep.check(abs(slope - target) <= tol,
                          f"order {N}: {metric} slope {slope:.3f} outside [{target - tol}, {target + tol}]")
    _write_csv(out / "fits.csv", ["order", "metric", "slope", "intercept", "degenerate_fit", "phi_hat", "phi_bound"],
               fit_rows)
    return rep


def cmd_cancel_verify(cfg: ExperimentConfig, out: Path, jobs: int, order: Optional[int] = None,
                      max_seconds: Optional[float] = None, stream=None) -> Report:
    from .mh_symbolic import cancellation_check

    stream = stream or sys.stdout
    rep = Report(cfg)
    N = order if order is not None else cfg.get("run", "order", 5)
    budget = max_seconds if max_seconds is not None else cfg.get("run", "max_seconds")
    start = time.perf_counter()
    rows = []
    print("i\tstatus\tresidual_terms\tseconds", file=stream)
    try:
        for i in range(N + 1):
            t0 = time.perf_counter()
            res = cancellation_check(i, jobs=jobs)
            ok = bool(res)
            nterms = 0 if ok else len(res.witness.terms())
            dt = time.perf_counter() - t0
            rows.append([i, "pass" if ok else "fail", nterms, round(dt, 3)])
            print(f"{i}\t{'pass' if ok else 'FAIL'}\t{nterms}\t{dt:.3f}", file=stream)
            rep.add({"i": i}, "cancels", ok)
            rep.check(ok, f"diagonal {i} does not cancel")
            if not ok:
                break
            if budget is not None and time.perf_counter() - start > budget and i < N:
                raise ResourceBudgetExceeded(f"time budget of {budget} s used up after i = {i}")
    except ResourceBudgetExceeded as exc:
        print(f"# {exc}; table is partial", file=stream)
        rep.check(False, str(exc))
    _write_csv(out / "cancellation.csv", ["i", "status", "residual_terms", "seconds"], rows)
    return rep


def cmd_phi(cfg: ExperimentConfig, out: Path, jobs: int, order: Optional[int] = None, stream=None) -> Report:
    from .mh_symbolic import phi_bound

    stream = stream or sys.stdout
    rep = Report(cfg)
    N = order if order is not None else cfg.get("run", "order", 5)
    rows = []
    print("N\tPhi(N)\tdecimal", file=stream)
    for n in range(N + 1):
        val = phi_bound(n, jobs=jobs)
        rows.append([n, str(val), float(val)])
        print(f"{n}\t{val}\t{float(val):.10g}", file=stream)
        rep.add({"N": n}, "phi", str(val))
    _write_csv(out / "phi.csv", ["N", "phi", "decimal"], rows)
    return rep


def _regret_game(cfg: ExperimentConfig, rng: np.random.Generator):
    from .games import entropic_simplex_game

    g = cfg.sections.get("game", {})
    kind = g.get("kind", "matching_pennies")
    if kind == "matching_pennies":
        A = np.array([[1.0, -1.0], [-1.0, 1.0]])
    elif kind == "rps":
        A = np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])
    elif kind == "antisymmetric":
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    else:
        d = g.get("dim", 3)
        A = rng.normal(size=(d, d))
    d = A.shape[0]
    a0 = np.asarray(g["a0"]) if "a0" in g else rng.dirichlet(np.ones(d))
    b0 = np.asarray(g["b0"]) if "b0" in g else rng.dirichlet(np.ones(d))
    if a0.shape != (d,) or b0.shape != (d,):
        raise ConfigError("a0 and b0 must match the game dimension", cfg.path)
    return entropic_simplex_game(A), a0 / a0.sum(), b0 / b0.sum()


def _regret_point(args):
    from .games import (StrategyPair, average_iterate_gap, regret_formula_residual, run_amd,
                        running_average_gaps, total_regret, verify_gap_regret_identity)

    game, a0, b0, K, eta, window, comparators = args
    traj = run_amd(game, a0, b0, eta, window * K)
    head = traj.prefix(K)
    gaps = running_average_gaps(traj)
    envelope = float(gaps[K - 1:].max())
    regret_formula = max(regret_formula_residual(game, head, StrategyPair(ca, cb), K) for ca, cb in comparators)
    return {
        "K": K, "eta": eta,
        "R_K": total_regret(game, head, K),
        "dg_K": average_iterate_gap(game, head, K),
        "dg_envelope": envelope,
        "regret_formula_residual": regret_formula,
        "gap_identity_residual": verify_gap_regret_identity(game, head, K),
    }


def cmd_regret(cfg: ExperimentConfig, out: Path, jobs: int) -> Report:
    rep = Report(cfg)
    rng = np.random.default_rng(cfg.seed)
    game, a0, b0 = _regret_game(cfg, rng)
    run = cfg.sections.get("run", {})
    Ks = sorted(run.get("Ks", [100, 1000, 10000]))
    c = run.get("c", 1.0)
    N = run.get("order", 1)
    window = run.get("window", 2)
    d = game.dim
    comps = [(rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))) for _ in range(run.get("comparators", 10))]
    comps += [(np.eye(d)[i], np.eye(d)[-1 - i]) for i in range(d)]
    work = [(game, a0, b0, K, c * K ** (-1.0 / (N + 2)), window, comps) for K in Ks]
    results = sorted(_pool_map(_regret_point, work, jobs), key=lambda r: r["K"])
    cols = ["K", "eta", "R_K", "dg_K", "dg_envelope", "regret_formula_residual", "gap_identity_residual"]
    _write_csv(out / "regret.csv", cols, [[r[c_] for c_ in cols] for r in results])
    checks = cfg.sections.get("checks", {})
    tol = checks.get("identity_tol", 1e-9)
    for r in results:
        p = {"K": r["K"], "eta": r["eta"]}
        for m in cols[2:]:
            rep.add(p, m, r[m])
        rep.check(r["regret_formula_residual"] <= tol, f"K={r['K']}: regret formula residual {r['regret_formula_residual']:.3e}")
        rep.check(r["gap_identity_residual"] <= tol, f"K={r['K']}: gap identity residual {r['gap_identity_residual']:.3e}")
    if len(Ks) >= 2:
        for m in ("dg_K", "dg_envelope", "R_K"):
            ys = [abs(r[m]) for r in results]
            slope, intercept, degenerate = fit_loglog(Ks, ys)
            rep.add({"schedule_order": N, "c": c}, f"{m}_slope", slope)
        env_slope = fit_loglog(Ks, [r["dg_envelope"] for r in results])[0]
        if "max_envelope_slope" in checks:
            rep.check(env_slope <= checks["max_envelope_slope"],
                      f"envelope slope {env_slope:.3f} above {checks['max_envelope_slope']}")
        decreasing = all(x["dg_envelope"] > y["dg_envelope"] for x, y in zip(results, results[1:]))
        rep.add({}, "dg_envelope_decreasing", decreasing)
        if checks.get("require_decreasing", False):
            rep.check(decreasing, "average-iterate gap envelope is not decreasing in K")
    return rep


def cmd_quad_mh(cfg: ExperimentConfig, out: Path, jobs: int) -> Report:
    from .mh_closed import t_function

    rep = Report(cfg)
    run = cfg.sections.get("run", {})
    pairs = run.get("pairs", [(1.0, 1.0), (1.0, -1.0), (2.0, 3.0), (0.5, 2.0)])
    eta_max = run.get("eta_max", 1.0)
    samples = run.get("samples", 200)
    rows = []
    series = []
    for a, b in pairs:
        lam = a * b
        etas = [eta_max * i / samples for i in range(samples + 1)]
        xs, ys = [], []
        for eta in etas:
            if lam * eta * eta >= 1.0:
                break
            val = t_function(eta, lam)
            rows.append([a, b, eta, val])
            xs.append(eta)
            ys.append(val)
        series.append((f"a={a:g}, b={b:g}", xs, ys))
        rep.add({"a": a, "b": b}, "samples", len(xs))
    _write_csv(out / "quad_mh.csv", ["a", "b", "eta", "T"], rows)
    panels = [(label, xs, [ys], [label]) for label, xs, ys in series if xs]
    (out / "quad_mh.svg").write_text(_svg.line_panels(panels))
    return rep


def cmd_examples_fig(cfg: ExperimentConfig, out: Path, jobs: int) -> Report:
    from .integrators import StepFailed, StepperConfig, run_trajectory

    rep = Report(cfg)
    run = cfg.sections.get("run", {})
    exponents = run.get("exponents", [1.5, 2.0, 4.0])
    eta = run.get("eta", 1.0)
    steps = run.get("steps", 10000)
    starts = run.get("starts", [(1.0, 1.0)])
    radius = run.get("radius", 10.0)
    rows = []
    for e in exponents:
        H = SeparableHamiltonian(SmoothScalarFamily.power(e), SmoothScalarFamily.power(e), 1)
        groups = []
        for (p0, q0) in starts:
            params = {"exponent": e, "p0": p0, "q0": q0, "eta": eta}
            try:
                traj = run_trajectory(H, PhasePoint([p0], [q0]), StepperConfig(eta), steps)
                pts = traj.array()
                finite = True
            except StepFailed as exc:
                rep.add(params, "diverged_at_step", exc.index)
                pts = np.empty((0, 2))
                finite = False
            dist = float(np.max(np.hypot(pts[:, 0] - p0, pts[:, 1] - q0))) if finite else float("inf")
            bounded = finite and dist <= radius
            rep.add(params, "max_distance_from_start", dist)
            rep.add(params, "bounded", bounded)
            rep.check(bounded, f"orbit of |x|^{e:g} + |y|^{e:g} from ({p0:g}, {q0:g}) leaves the radius-{radius:g} ball")
            for k, (p, q) in enumerate(pts):
                rows.append([e, p0, q0, k, p, q])
            groups.append((f"({p0:g}, {q0:g})", pts[:, 0].tolist(), pts[:, 1].tolist()))
        (out / f"orbits_power_{e:g}.svg").write_text(
            _svg.scatter(f"|x|^{e:g} + |y|^{e:g}, eta = {eta:g}", groups))
    _write_csv(out / "orbits.csv", ["exponent", "p0", "q0", "step", "p", "q"], rows)
    return rep


def cmd_combinatorics_verify(cfg: ExperimentConfig, out: Path, jobs: int, stream=None) -> Report:
    from . import combinatorics as cb

    stream = stream or sys.stdout
    rep = Report(cfg)
    max_k = cfg.get("run", "max_k", 10)
    checks: list[tuple[str, bool]] = []
    checks.append(("stirling2(3,2) = 3", cb.stirling2(3, 2) == 3))
    checks.append(("fubini(3) = 13", cb.fubini(3) == 13))
    checks.append((f"block identity, k <= {max_k}",
                   all(cb.lemma1_lhs(k, n) == cb.lemma1_rhs(k, n) for k in range(1, max_k + 1) for n in range(1, k + 1))))
    checks.append(("Fubini growth bound, k <= 20",
                   all(cb.fubini(k - 1) < math.factorial(k - 1) / math.log(2) ** k for k in range(1, 21))))
    checks.append(("Bernoulli: two recurrences agree, n <= 20",
                   all(cb.bernoulli(n) == cb.bernoulli_from_stirling(n) for n in range(2, 21))))
    checks.append(("backseat sum <= bound, k <= 200, r in {0.5, 2, 10}",
                   all(cb.backseat_sum(k, r) <= cb.backseat_bound(k, r) for r in (0.5, 2.0, 10.0) for k in range(1, 201))))
    checks.append(("quadratic bracket bound, a = b = 1, weight <= 6", cb.quadratic_ipb_bound_check(1.0, 1.0, 6)))
    checks.append(("quartic alternating bracket growth, n <= 4",
                   all(abs(cb.quartic_alternating_ipb(n)) == cb.quartic_growth_formula(n) for n in range(1, 5))))
    rows = []
    print("check\tstatus", file=stream)
    for name, ok in checks:
        print(f"{name}\t{'pass' if ok else 'FAIL'}", file=stream)
        rows.append([name, "pass" if ok else "fail"])
        rep.add({"check": name}, "pass", ok)
        rep.check(ok, name)
    _write_csv(out / "combinatorics.csv", ["check", "status"], rows)
    return rep


COMMANDS = {
    "simulate": cmd_simulate,
    "order-sweep": cmd_order_sweep,
    "regret": cmd_regret,
    "quad-mh": cmd_quad_mh,
    "examples-fig": cmd_examples_fig,
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shadowham", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI experiment file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        return p

    for name in ("simulate", "order-sweep", "regret", "quad-mh", "examples-fig", "combinatorics-verify"):
        common(sub.add_parser(name))
    p = common(sub.add_parser("cancel-verify"))
    p.add_argument("--order", type=int)
    p.add_argument("--max-seconds", type=float)
    p = common(sub.add_parser("phi"))
    p.add_argument("--order", type=int)
    mh = sub.add_parser("mh", help="symbolic modified-Hamiltonian utilities")
    mh_sub = mh.add_subparsers(dest="mh_command", required=True)
    dump = mh_sub.add_parser("dump", help="print H_n as a sorted term list")
    dump.add_argument("--order", type=int, required=True)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if args.command == "mh":
        from .mh_symbolic import dump_correction

        if args.order < 0:
            print("error: order must be nonnegative", file=sys.stderr)
            return EXIT_CONFIG
        sys.stdout.write(dump_correction(args.order))
        return EXIT_OK
    try:
        cfg = load_config(args.config, args.command, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = max(1, args.jobs)
    try:
        if args.command == "cancel-verify":
            rep = cmd_cancel_verify(cfg, out, jobs, args.order, args.max_seconds)
        elif args.command == "phi":
            rep = cmd_phi(cfg, out, jobs, args.order)
        elif args.command == "combinatorics-verify":
            rep = cmd_combinatorics_verify(cfg, out, jobs)
        else:
            rep = COMMANDS[args.command](cfg, out, jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rep.write(out)
    for msg in rep.failures:
        print(f"check failed: {msg}", file=sys.stderr)
    return EXIT_FAIL if rep.failures else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
