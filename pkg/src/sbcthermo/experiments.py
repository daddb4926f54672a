"""Experiment runners behind the command line: self-check, time series, sweeps, fluctuations.

Each runner takes a resolved :class:`RunConfig`, writes its table (if an
output path is set) and returns a result whose ``ok`` flag drives the exit
status.
"""

from __future__ import annotations

import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .evolution import (
    TimeGrid,
    interaction_picture_identity,
    propagate_model,
    three_stage_decompose,
)
from .fluctuation import (
    crooks_report,
    jarzynski,
    naive_weak_statistics,
    strong_coupling_distribution,
)
from .models import (
    CompositeModel,
    OscillatorModelParams,
    SpinModel,
    SpinModelParams,
    make_model,
    oscillator_mapped_check,
    rotation_identity_residual,
    spin_half_operators,
)
from .operators import SIGMA_X, max_abs
from .thermo import ThermoConfig, run_protocol

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "SweepSpec",
    "RunConfig",
    "CheckResult",
    "RunResult",
    "load_config",
    "run_selfcheck",
    "run_timeseries",
    "run_sweep",
    "run_fluctuation",
    "write_csv",
]

DEFAULT_STEPS = {"spin": 4096, "oscillator": 200}
DEFAULT_BETA = {"spin": 1.0, "oscillator": 4.08}
DEFAULT_SWEEPS = {
    "g": (0.0, 1.0, 5),
    "omega_b": (0.2, 2.0, 37),
    "tau_prime": (0.2, 2.0, 10),
}
EXPERIMENTS = ("selfcheck", "timeseries", "sweep", "fluctuation")

FIRST_LAW_TOL = 1e-6
FLUCTUATION_TOL = 1e-5


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (exit status 2)."""


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    points: int

    def __post_init__(self):
        if self.variable not in DEFAULT_SWEEPS:
            raise ConfigError(f"sweep variable must be one of {sorted(DEFAULT_SWEEPS)}")
        if self.points < 2:
            raise ConfigError("sweep needs at least 2 points")
        if not self.start < self.stop:
            raise ConfigError("sweep start must be below stop")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "selfcheck"
    model: str = "spin"
    params: SpinModelParams | OscillatorModelParams = field(default_factory=SpinModelParams)
    beta: float = 1.0
    tau_prime: float = 2.0
    n_steps: int = 4096
    sweep: SweepSpec | None = None
    out_path: str | None = None
    seed: int = 0
    jobs: int = 1
    strict: float | None = None

    def header(self) -> dict[str, Any]:
        """Every resolved parameter, defaults included."""
        head = {
            "experiment": self.experiment,
            "model": self.model,
            **asdict(self.params),
            "beta": self.beta,
            "tau_prime": self.tau_prime,
            "n_steps": self.n_steps,
            "seed": self.seed,
        }
        if self.sweep is not None:
            head.update({f"sweep_{k}": v for k, v in asdict(self.sweep).items()})
        return head

    def build(self) -> CompositeModel:
        return make_model(self.params)

    def thermo(self, **kw) -> ThermoConfig:
        return ThermoConfig(beta=self.beta, tau_prime=self.tau_prime, n_steps=self.n_steps, **kw)


# ---- configuration -------------------------------------------------------

_SPIN_KEYS = {f.name for f in fields(SpinModelParams)}
_OSC_KEYS = {f.name for f in fields(OscillatorModelParams)}
_RUN_KEYS = {"experiment", "model", "beta", "tau_prime", "n_steps", "steps", "out", "seed", "jobs", "strict", "n_max", "sweep"}
_ALIASES = {"omega_bath": "omega_b", "steps": "n_steps", "out": "out_path"}


def _read_toml(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc


def load_config(file_values: dict[str, Any] | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Merge TOML values with command-line overrides (overrides win) into a RunConfig.

    ``omega_b`` sets the bath frequency of either model; ``n_max`` sets both
    Fock cutoffs of the oscillator.
    """
    raw: dict[str, Any] = {}
    for source in (file_values or {}, {k: v for k, v in (overrides or {}).items() if v is not None}):
        for key, value in source.items():
            key = key.replace("-", "_")
            if key == "sweep" and isinstance(value, dict):
                raw.setdefault("sweep", {}).update({k: v for k, v in value.items() if v is not None})
                continue
            if key not in _SPIN_KEYS | _OSC_KEYS | _RUN_KEYS:
                raise ConfigError(f"unknown configuration key {key!r}")
            raw[_ALIASES.get(key, key)] = value

    model = raw.pop("model", "spin")
    if model not in ("spin", "oscillator"):
        raise ConfigError(f"model must be 'spin' or 'oscillator', got {model!r}")
    experiment = raw.pop("experiment", "selfcheck")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}")

    if model == "spin":
        keys = _SPIN_KEYS
        if "n_max" in raw:
            raise ConfigError("n_max applies to the oscillator model only")
    else:
        keys = _OSC_KEYS
        if "omega_b" in raw:
            raw["omega_bath"] = raw.pop("omega_b")
        if "n_max" in raw:
            n_max = raw.pop("n_max")
            raw.setdefault("n_max_sys", n_max)
            raw.setdefault("n_max_bath", n_max)
    param_kw = {k: raw.pop(k) for k in list(raw) if k in keys}
    stray = set(raw) - _RUN_KEYS - {"out_path"}
    if stray:
        raise ConfigError(f"keys {sorted(stray)} do not apply to the {model} model")

    try:
        params = (SpinModelParams if model == "spin" else OscillatorModelParams)(**param_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    sweep = None
    sweep_raw = raw.pop("sweep", None)
    if sweep_raw:
        var = sweep_raw.get("variable")
        if var not in DEFAULT_SWEEPS:
            raise ConfigError(f"sweep variable must be one of {sorted(DEFAULT_SWEEPS)}")
        start, stop, points = DEFAULT_SWEEPS[var]
        sweep = SweepSpec(
            var,
            float(sweep_raw.get("start", start)),
            float(sweep_raw.get("stop", stop)),
            int(sweep_raw.get("points", points)),
        )
    if experiment == "sweep" and sweep is None:
        raise ConfigError("the sweep experiment needs a sweep variable")

    try:
        cfg = RunConfig(
            experiment=experiment,
            model=model,
            params=params,
            beta=float(raw.get("beta", DEFAULT_BETA[model])),
            tau_prime=float(raw.get("tau_prime", 2.0)),
            n_steps=int(raw.get("n_steps", DEFAULT_STEPS[model])),
            sweep=sweep,
            out_path=raw.get("out_path"),
            seed=int(raw.get("seed", 0)),
            jobs=int(raw.get("jobs", 1)),
            strict=None if raw.get("strict") is None else float(raw["strict"]),
        )
        cfg.thermo()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return cfg


def config_from_file(path: str | Path, overrides: dict[str, Any] | None = None) -> RunConfig:
    return load_config(_read_toml(path), overrides)


# ---- output --------------------------------------------------------------


def _fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(
    path: str | Path | None,
    header: dict[str, Any],
    columns: dict[str, Iterable[float]],
    title: str,
) -> str:
    """Render (and write, if ``path`` is set) a commented, round-trip precision CSV."""
    buf = io.StringIO()
    buf.write(f"# sbcthermo {title}\n")
    for key, value in header.items():
        buf.write(f"# {key} = {_fmt(value)}\n")
    names = list(columns)
    buf.write(",".join(names) + "\n")
    data = [np.asarray(columns[n], dtype=float) for n in names]
    for row in zip(*data):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    text = buf.getvalue()
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc}") from exc
    return text


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tol)

    def line(self) -> str:
        return f"CHECK {self.name} {self.residual:.3e} {self.tol:.1e} {'PASS' if self.passed else 'FAIL'}"


@dataclass
class RunResult:
    ok: bool
    lines: list[str] = field(default_factory=list)
    csv: str | None = None
    data: dict[str, Any] = field(default_factory=dict)


# ---- selfcheck -----------------------------------------------------------


def _random_state(dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def _selfcheck_items(cfg: RunConfig) -> list[tuple[str, float, float]]:
    model = cfg.build()
    beta, tp, n = cfg.beta, cfg.tau_prime, cfg.n_steps
    g = model.g
    items: list[tuple[str, float, float]] = []

    if isinstance(model, SpinModel):
        j_ops = spin_half_operators(model.params.n_bath)
        items.append(("rotation_identity", rotation_identity_residual(g, SIGMA_X, j_ops), 1e-11))
        mapping = max(max_abs(model.H_total(t) - model.H_mapped(t)) for t in (0.0, 0.5 * tp, tp))
        items.append(("mapping_analytic_vs_conjugated", mapping, 1e-12))
        ts = three_stage_decompose(model, tp, n)
        items.append(("three_stage", ts.discrete_residual, 1e-10))
        # the relaxation-stage propagation has its own grid; its residual is O(dt^2)
        n_stage = max(n, 4096)
        for which in ("initial", "final"):
            res = interaction_picture_identity(model, which, 1.0, n_stage, tau_prime=tp)
            items.append((f"interaction_picture_{which}", res, 1e-6))
    else:
        rep = oscillator_mapped_check(model.params)
        items.append(("mapping_low_fock_block", rep.max_deviation, 1e-10))
        kin = abs(rep.kinetic_coefficient / rep.expected_kinetic_coefficient - 1.0)
        # least-squares fit on the lowest levels; truncation limits it well above roundoff
        items.append(("renormalized_mass", kin, 1e-6))

    part = max(
        abs(math.exp(model.log_Z_total(t, beta) - model.log_Z_s(t, beta) - model.log_Z_b(beta)) - 1.0)
        for t in (0.0, 0.5 * tp, tp)
    )
    items.append(("partition_factorization", part, 1e-10))

    series = run_protocol(model, cfg.thermo(), snapshots={n}, entropy=False)
    items.append(("first_law", float(series.first_law_residual.max()), FIRST_LAW_TOL))
    if isinstance(model, SpinModel):
        rho = _random_state(model.layout.dim, cfg.seed)
        rnd = run_protocol(model, cfg.thermo(initial_state=rho), entropy=False)
        items.append(("first_law_random_state", float(rnd.first_law_residual.max()), FIRST_LAW_TOL))

    u = series.propagators[n]
    fwd = strong_coupling_distribution(model, tp, n, beta, "forward", u_prop=u)
    rev = strong_coupling_distribution(model, tp, n, beta, "reverse", u_prop=u)
    zs_ratio = math.exp(model.log_Z_s(tp, beta) - model.log_Z_s(0.0, beta))
    items.append(("jarzynski", abs(jarzynski(fwd, beta) / zs_ratio - 1.0), FLUCTUATION_TOL))
    cr = crooks_report(fwd, rev, zs_ratio, beta)
    items.append(("crooks", cr.max_rel_err if not cr.support_mismatch else math.inf, FLUCTUATION_TOL))
    return items


def run_selfcheck(cfg: RunConfig) -> RunResult:
    checks = [
        CheckResult(name, float(res), cfg.strict if cfg.strict is not None else tol)
        for name, res, tol in _selfcheck_items(cfg)
    ]
    lines = [c.line() for c in checks]
    ok = all(c.passed for c in checks)
    if cfg.out_path is not None:
        try:
            Path(cfg.out_path).write_text("\n".join(lines) + "\n")
        except OSError as exc:
            raise ConfigError(f"cannot write {cfg.out_path}: {exc}") from exc
    return RunResult(ok, lines, data={"checks": checks})


# ---- time series ---------------------------------------------------------


def run_timeseries(cfg: RunConfig) -> RunResult:
    series = run_protocol(cfg.build(), cfg.thermo())
    text = write_csv(cfg.out_path, cfg.header(), series.columns(), "timeseries")
    worst = float(series.first_law_residual.max())
    check = CheckResult("first_law", worst, cfg.strict if cfg.strict is not None else FIRST_LAW_TOL)
    return RunResult(check.passed, [check.line()], text, {"series": series})


# ---- sweeps --------------------------------------------------------------


def _with_value(cfg: RunConfig, variable: str, value: float) -> RunConfig:
    if variable == "tau_prime":
        return replace(cfg, tau_prime=float(value))
    if variable == "omega_b" and cfg.model == "oscillator":
        return replace(cfg, params=replace(cfg.params, omega_bath=float(value)))
    return replace(cfg, params=replace(cfg.params, **{variable: float(value)}))


def _sweep_point(args: tuple[RunConfig, str, float]) -> tuple[float, float, float, float]:
    cfg, variable, value = args
    point = _with_value(cfg, variable, value)
    res = naive_weak_statistics(point.build(), point.tau_prime, point.n_steps, point.beta)
    s = res.series
    return s.delta_max_W, s.delta_max_Q, res.delta_max_scalar, res.delta_max_tpm


def run_sweep(cfg: RunConfig) -> RunResult:
    if cfg.sweep is None:
        raise ConfigError("the sweep experiment needs a sweep variable")
    values = cfg.sweep.values
    tasks = [(cfg, cfg.sweep.variable, float(v)) for v in values]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    rows_arr = np.array(rows)
    columns = {
        "sweep_value": values,
        "delta_max_W": rows_arr[:, 0],
        "delta_max_Q": rows_arr[:, 1],
        "delta_max_naive_jarzynski_scalar": rows_arr[:, 2],
        "delta_max_naive_jarzynski_tpm": rows_arr[:, 3],
    }
    if cfg.sweep.variable == "omega_b":
        columns["d_delta_max_Q_d_omega_b"] = np.gradient(rows_arr[:, 1], values)
    text = write_csv(cfg.out_path, cfg.header(), columns, "sweep")
    return RunResult(True, [], text, {"columns": columns})


# ---- fluctuation theorems ------------------------------------------------


def run_fluctuation(cfg: RunConfig) -> RunResult:
    model = cfg.build()
    beta, tp, n = cfg.beta, cfg.tau_prime, cfg.n_steps
    u = propagate_model(model, TimeGrid(0.0, tp, n)).U
    fwd = strong_coupling_distribution(model, tp, n, beta, "forward", u_prop=u)
    rev = strong_coupling_distribution(model, tp, n, beta, "reverse", u_prop=u)
    zs_ratio = math.exp(model.log_Z_s(tp, beta) - model.log_Z_s(0.0, beta))
    cr = crooks_report(fwd, rev, zs_ratio, beta)

    by_w = {w: (lhs, err) for w, lhs, _, err in cr.rows}
    p_rev = np.zeros_like(fwd.p)
    errs = np.full_like(fwd.p, np.nan)
    for k, (w, pf) in enumerate(zip(fwd.w, fwd.p)):
        if float(w) in by_w:
            lhs, err = by_w[float(w)]
            p_rev[k] = pf / lhs
            errs[k] = err
        else:
            j = np.flatnonzero(np.abs(rev.w + w) <= max(fwd.merge_tol, rev.merge_tol))
            p_rev[k] = rev.p[j[0]] if j.size else 0.0

    lhs = jarzynski(fwd, beta)
    rel = abs(lhs / zs_ratio - 1.0)
    summary = {
        "jarzynski_lhs": lhs,
        "Zs_ratio": zs_ratio,
        "rel_err": rel,
        "crooks_max_rel_err": cr.max_rel_err,
        "support_mismatch": cr.support_mismatch,
        "n_bins": len(fwd),
    }
    columns = {"w": fwd.w, "p_forward": fwd.p, "p_reverse_reflected": p_rev, "crooks_rel_err": errs}
    text = write_csv(cfg.out_path, cfg.header(), columns, "fluctuation")
    lines = [f"{k} {_fmt(v)}" for k, v in summary.items()]
    if cfg.out_path is not None:
        out = Path(cfg.out_path)
        out.with_name(out.stem + "_summary.txt").write_text("\n".join(lines) + "\n")
    tol = cfg.strict if cfg.strict is not None else FLUCTUATION_TOL
    ok = rel <= tol and cr.max_rel_err <= tol and not cr.support_mismatch
    return RunResult(ok, lines, text, {"summary": summary, "forward": fwd, "reverse": rev, "crooks": cr})


RUNNERS = {
    "selfcheck": run_selfcheck,
    "timeseries": run_timeseries,
    "sweep": run_sweep,
    "fluctuation": run_fluctuation,
}
