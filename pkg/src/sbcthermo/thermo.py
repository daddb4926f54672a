"""Work, heat, energy, entropy and free energy along a driving protocol.

Per grid step ``i -> i+1`` (bars are step averages, ``Delta`` step differences)::

    dW   = Tr(rho_bar  Delta H)                      strong-coupling work
    dQ   = Tr_s(Hs_bar Delta rho_s) + Tr(rho_bar Delta(H_s (x) I - H))
    E    = Tr_s(H_s rho_s)
    dW_w = Tr_s(rho_s_bar Delta H_s)                  weak-coupling baselines
    dQ_w = Tr_s(Hs_bar Delta rho_s)

``H`` is the coupled Hamiltonian and ``H_s`` the system part of the uncoupled
one. The trapezoidal pairing makes ``E(t) - E(0) = W + Q`` hold step by step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .evolution import TimeGrid, apply_product, factor_steps, model_steps
from .models import CompositeModel
from .operators import expectation, herm_eigh, max_abs, partial_trace

__all__ = [
    "EIGENVALUE_FLOOR",
    "ThermoConfig",
    "ThermoSeries",
    "DeltaFReport",
    "gibbs",
    "gibbs_total",
    "von_neumann_entropy",
    "relative_entropy_to_gibbs",
    "entropy_terms",
    "free_energy",
    "run_protocol",
    "delta_f_identity_check",
]

EIGENVALUE_FLOOR = 1e-14
TRACE_DRIFT_TOL = 1e-8
POSITIVITY_TOL = 1e-10


@dataclass(frozen=True)
class ThermoConfig:
    beta: float = 1.0
    tau_prime: float = 2.0
    n_steps: int = 4096
    initial_state: Literal["gibbs_total"] | np.ndarray = "gibbs_total"
    quasi_static: bool = False
    method: Literal["auto", "dense", "mapped"] = "auto"

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if self.tau_prime < 0:
            raise ValueError("tau_prime must be >= 0")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(0.0, self.tau_prime, self.n_steps)


def gibbs(h: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """Thermal state ``e^{-beta h}/Z`` and ``Z``, evaluated with a shifted spectrum."""
    e, v = herm_eigh(h)
    w = np.exp(-beta * (e - e[0]))
    s = w.sum()
    rho = (v * (w / s)) @ v.conj().T
    return 0.5 * (rho + rho.conj().T), float(s * np.exp(-beta * e[0]))


def gibbs_total(model: CompositeModel, t: float, beta: float) -> np.ndarray:
    """Gibbs state of the coupled Hamiltonian at ``t``.

    Models that step in the mapped frame build it as ``W (varpi_s (x) varpi_b) W^dag``
    (only subsystem diagonalisations); the others diagonalise ``H(t)`` directly.
    """
    if model.prefers_mapped_stepping:
        rs, _ = gibbs(model.H_s(t), beta)
        rb, _ = gibbs(model.H_b, beta)
        w = model.mapping
        return w @ np.kron(rs, rb) @ w.conj().T
    return gibbs(model.H_total(t), beta)[0]


def _checked_spectrum(rho: np.ndarray) -> np.ndarray:
    p = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if p.min() < -POSITIVITY_TOL:
        raise ValueError(f"positivity violated (eigenvalue {p.min():.3e})")
    return p


def von_neumann_entropy(rho: np.ndarray) -> float:
    """``-Tr(rho ln rho)``; eigenvalues below the floor contribute nothing."""
    p = _checked_spectrum(rho)
    p = p[p > EIGENVALUE_FLOOR]
    return float(-np.sum(p * np.log(p)))


def relative_entropy_to_gibbs(rho_s: np.ndarray, h_s: np.ndarray, beta: float) -> float:
    """``D(rho_s | e^{-beta h_s}/Z_s)`` with the exact ``ln varpi_s = -beta h_s - ln Z_s``."""
    p = _checked_spectrum(rho_s)
    p = p[p > EIGENVALUE_FLOOR]
    e = np.linalg.eigvalsh(h_s)
    log_zs = -beta * e[0] + np.log(np.sum(np.exp(-beta * (e - e[0]))))
    cross = -beta * expectation(h_s, rho_s) - log_zs * float(np.real(np.trace(rho_s)))
    return float(np.sum(p * np.log(p)) - cross)


def free_energy(model: CompositeModel, beta: float, t: float) -> float:
    """``F = -T ln Z_s(t)`` of the uncoupled system Hamiltonian."""
    return -model.log_Z_s(t, beta) / beta


def entropy_terms(
    model: CompositeModel,
    cfg: ThermoConfig,
    t: float,
    rho_s: np.ndarray | None = None,
    rho_s0: np.ndarray | None = None,
) -> tuple[float, float, float]:
    """``(S_v, D_rel, Delta_S)`` at time ``t``.

    ``S_v`` is the von Neumann entropy of ``rho_s`` (the reduced Gibbs state
    ``Omega_s(t)`` when ``rho_s`` is omitted or ``cfg.quasi_static``);
    ``D_rel = D(Omega_s | varpi_s)``. ``Delta_S`` is the change of
    ``S_v + D_rel`` from ``t = 0`` (initial reduced state ``rho_s0``, default
    ``Omega_s(0)``).
    """

    def at(time, state):
        omega_s = partial_trace(gibbs_total(model, time, cfg.beta), model.layout, "system")
        x = omega_s if (state is None or cfg.quasi_static) else state
        return (
            von_neumann_entropy(x),
            relative_entropy_to_gibbs(omega_s, model.H_s(time), cfg.beta),
        )

    s_v, d_rel = at(t, rho_s)
    s_v0, d_rel0 = at(0.0, rho_s0)
    return s_v, d_rel, (s_v - s_v0) + (d_rel - d_rel0)


@dataclass
class ThermoSeries:
    """Node-indexed thermodynamic record of one protocol run."""

    t: np.ndarray
    W: np.ndarray
    Q: np.ndarray
    E: np.ndarray
    W_w: np.ndarray
    Q_w: np.ndarray
    S_v: np.ndarray
    D_rel: np.ndarray
    Delta_S: np.ndarray
    Delta_S_w: np.ndarray
    F: np.ndarray
    metadata: dict = field(default_factory=dict)
    propagators: dict[int, np.ndarray] = field(default_factory=dict)
    reduced_states: np.ndarray | None = None

    COLUMNS = (
        "t", "W", "W_w", "Q", "Q_w", "E", "S_v", "D_rel", "Delta_S", "F",
        "delta_W", "delta_Q", "first_law_residual",
    )

    @property
    def delta_W(self) -> np.ndarray:
        return np.abs(self.W - self.W_w)

    @property
    def delta_Q(self) -> np.ndarray:
        return np.abs(self.Q - self.Q_w)

    @property
    def delta_max_W(self) -> float:
        return float(self.delta_W.max())

    @property
    def delta_max_Q(self) -> float:
        return float(self.delta_Q.max())

    @property
    def first_law_residual(self) -> np.ndarray:
        return np.abs((self.E - self.E[0]) - (self.W + self.Q))

    def columns(self) -> dict[str, np.ndarray]:
        return {name: np.asarray(getattr(self, name)) for name in self.COLUMNS}


def _initial_state(model: CompositeModel, cfg: ThermoConfig) -> np.ndarray:
    if isinstance(cfg.initial_state, str):
        if cfg.initial_state != "gibbs_total":
            raise ValueError(f"unknown initial state {cfg.initial_state!r}")
        return gibbs_total(model, 0.0, cfg.beta)
    rho = np.asarray(cfg.initial_state, dtype=complex)
    if rho.shape != (model.layout.dim,) * 2:
        raise ValueError("custom initial state has the wrong dimension")
    return rho


def run_protocol(
    model: CompositeModel,
    cfg: ThermoConfig,
    snapshots: set[int] | None = None,
    keep_reduced: bool = False,
    entropy: bool = True,
) -> ThermoSeries:
    """Evolve (or pin, when quasi-static) the state over the protocol and account.

    ``snapshots`` lists node indices at which the accumulated propagator
    ``U_{0->t}`` is stored in ``series.propagators`` (nonequilibrium mode).
    ``entropy=False`` skips the per-node Gibbs states; entropy columns are NaN.
    """
    layout = model.layout
    grid = cfg.grid
    nodes = grid.nodes
    n = grid.n_steps
    beta = cfg.beta
    i_b = np.eye(layout.d_b)

    track = sorted(snapshots or ())
    propagators: dict[int, np.ndarray] = {}
    u_acc = np.eye(layout.dim, dtype=complex) if track else None
    if track and 0 in track:
        propagators[0] = u_acc.copy()

    rho = _initial_state(model, cfg)
    h_prev = model.H_total(nodes[0])
    hs_prev = model.H_s(nodes[0])
    rs_prev = partial_trace(rho, layout, "system")

    cols = {k: np.zeros(n + 1) for k in ("W", "Q", "W_w", "Q_w", "E", "S_v", "D_rel", "S_w", "F")}
    reduced = np.zeros((n + 1, layout.d_s, layout.d_s), dtype=complex) if keep_reduced else None

    def record(i, t, rho_s, omega_s, hs):
        cols["E"][i] = expectation(hs, rho_s)
        cols["F"][i] = free_energy(model, beta, t)
        if reduced is not None:
            reduced[i] = rho_s
        if not entropy:
            for k in ("S_v", "D_rel", "S_w"):
                cols[k][i] = np.nan
            return
        cols["S_v"][i] = von_neumann_entropy(omega_s if cfg.quasi_static else rho_s)
        cols["D_rel"][i] = relative_entropy_to_gibbs(omega_s, hs, beta)
        cols["S_w"][i] = von_neumann_entropy(rho_s)

    def reduced_gibbs(t):
        return partial_trace(gibbs_total(model, t, beta), layout, "system")

    def omega_s_at(t):
        return reduced_gibbs(t) if entropy else None

    record(0, nodes[0], rs_prev, omega_s_at(nodes[0]), hs_prev)

    method = cfg.method
    if method == "auto":
        method = "mapped" if model.prefers_mapped_stepping else "dense"
    # mapped models carry sigma = W^dag rho W and step it with u_s (x) u_b
    mapped = method == "mapped" and not cfg.quasi_static
    if cfg.quasi_static:
        steps = None
    elif mapped:
        w_map = model.mapping
        sigma = w_map.conj().T @ rho @ w_map
        steps = factor_steps(model.H_s, model.H_b, grid)
        acc_s = np.eye(layout.d_s, dtype=complex)
        acc_b = np.eye(layout.d_b, dtype=complex)
    else:
        steps = model_steps(model, grid, method=method)

    for i in range(n):
        t1 = nodes[i + 1]
        if cfg.quasi_static:
            rho1 = gibbs_total(model, t1, beta)
        elif mapped:
            u_s, u_b = next(steps)
            sigma = apply_product(u_s, u_b, sigma)
            rho1 = w_map @ sigma @ w_map.conj().T
            if track:
                acc_s, acc_b = u_s @ acc_s, u_b @ acc_b
                if i + 1 in track:
                    propagators[i + 1] = w_map @ np.kron(acc_s, acc_b) @ w_map.conj().T
        else:
            u = next(steps)
            rho1 = u @ rho @ u.conj().T
            if u_acc is not None:
                u_acc = u @ u_acc
                if i + 1 in track:
                    propagators[i + 1] = u_acc.copy()
        if not cfg.quasi_static:
            drift = abs(float(np.real(np.trace(rho1))) - 1.0)
            if drift > TRACE_DRIFT_TOL:
                raise RuntimeError(f"propagation unstable (trace drift {drift:.3e})")
        h1 = model.H_total(t1)
        hs1 = model.H_s(t1)
        rs1 = partial_trace(rho1, layout, "system")

        rho_bar = 0.5 * (rho + rho1)
        rs_bar = 0.5 * (rs_prev + rs1)
        hs_bar = 0.5 * (hs_prev + hs1)
        d_h = h1 - h_prev
        d_hs = hs1 - hs_prev
        d_rs = rs1 - rs_prev

        d_w = expectation(d_h, rho_bar)
        d_q_w = expectation(hs_bar, d_rs)
        correction = expectation(np.kron(d_hs, i_b) - d_h, rho_bar)
        cols["W"][i + 1] = cols["W"][i] + d_w
        cols["Q"][i + 1] = cols["Q"][i] + d_q_w + correction
        cols["W_w"][i + 1] = cols["W_w"][i] + expectation(d_hs, rs_bar)
        cols["Q_w"][i + 1] = cols["Q_w"][i] + d_q_w

        omega_s = rs1 if cfg.quasi_static else omega_s_at(t1)
        record(i + 1, t1, rs1, omega_s, hs1)
        rho, h_prev, hs_prev, rs_prev = rho1, h1, hs1, rs1

    s_total = cols["S_v"] + cols["D_rel"]
    meta = {**model.metadata(), "beta": beta, "tau_prime": cfg.tau_prime,
            "n_steps": n, "quasi_static": cfg.quasi_static}
    return ThermoSeries(
        t=nodes,
        W=cols["W"],
        Q=cols["Q"],
        E=cols["E"],
        W_w=cols["W_w"],
        Q_w=cols["Q_w"],
        S_v=cols["S_v"],
        D_rel=cols["D_rel"],
        Delta_S=s_total - s_total[0],
        Delta_S_w=cols["S_w"] - cols["S_w"][0],
        F=cols["F"],
        metadata=meta,
        propagators=propagators,
        reduced_states=reduced,
    )


@dataclass(frozen=True)
class DeltaFReport:
    """``Delta F = Delta E - T Delta S`` along a quasi-static run.

    ``residual`` uses the thermodynamic entropy ``Delta S = beta Q`` accumulated
    over the grid and converges with ``dt``; ``state_residual`` uses the state
    function ``S_v(Omega_s) + D(Omega_s|varpi_s)`` and holds to roundoff.
    """

    residual: float
    state_residual: float
    series: ThermoSeries


def delta_f_identity_check(model: CompositeModel, cfg: ThermoConfig) -> DeltaFReport:
    if not cfg.quasi_static:
        raise ValueError("the free-energy identity is checked in quasi-static mode")
    s = run_protocol(model, cfg)
    temp = 1.0 / cfg.beta
    d_f = s.F - s.F[0]
    d_e = s.E - s.E[0]
    accumulated = max_abs(d_f - (d_e - temp * (cfg.beta * s.Q)))
    state = max_abs(d_f - (d_e - temp * s.Delta_S))
    return DeltaFReport(residual=accumulated, state_residual=state, series=s)
