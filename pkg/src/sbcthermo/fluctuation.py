"""Two-point-measurement work statistics and the work fluctuation theorems.

A two-point measurement with ``h_i`` before and ``h_f`` after a unitary ``U``
gives work ``w = E'_m - E_n`` with probability ``|<m'|U|n>|^2 p_n``, where
``p_n`` are the initial populations in the ``h_i`` eigenbasis (Gibbs weights
unless a state is supplied, in which case it is dephased in that basis).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import logsumexp

from .evolution import TimeGrid, propagate, propagate_model
from .models import CompositeModel
from .operators import herm_eigh
from .thermo import ThermoConfig, ThermoSeries, gibbs_total, run_protocol

__all__ = [
    "WorkDistribution",
    "CharacteristicSample",
    "CrooksReport",
    "NaiveWeakResult",
    "tpm_distribution",
    "strong_coupling_distribution",
    "mapped_distribution",
    "total_variation",
    "characteristic_function",
    "direct_theta",
    "crooks_report",
    "jarzynski",
    "naive_weak_statistics",
]

MERGE_REL_TOL = 1e-9
NEGATIVE_CLIP = 1e-12
CROOKS_MIN_P = 1e-12
SUPPORT_MIN_P = 1e-10
# |<m'|U|n>|^2 below this is propagator roundoff, not a transition
TRANSITION_FLOOR = 1e-24


@dataclass(frozen=True)
class WorkDistribution:
    """Discrete work distribution, sorted by ``w`` with merged degenerate values."""

    w: np.ndarray
    p: np.ndarray
    merge_tol: float

    def __post_init__(self):
        if self.w.shape != self.p.shape:
            raise ValueError("w and p must have the same length")

    @property
    def entries(self) -> list[tuple[float, float]]:
        return list(zip(self.w.tolist(), self.p.tolist()))

    @property
    def total(self) -> float:
        return float(self.p.sum())

    @property
    def mean(self) -> float:
        return float(np.dot(self.w, self.p))

    def __len__(self) -> int:
        return self.w.size


def _merge(w: np.ndarray, p: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(w, kind="stable")
    w, p = w[order], p[order]
    # a new bin starts wherever the gap to the previous value exceeds tol
    starts = np.flatnonzero(np.concatenate(([True], np.diff(w) > tol)))
    p_bin = np.add.reduceat(p, starts)
    counts = np.diff(np.append(starts, w.size))
    w_bin = np.add.reduceat(w, starts) / counts
    return w_bin, p_bin


def _distribution(w: np.ndarray, p: np.ndarray, tol: float) -> WorkDistribution:
    p = np.where((p < 0) & (p >= -NEGATIVE_CLIP), 0.0, p)
    if p.min(initial=0.0) < 0:
        raise ValueError("negative probability beyond clipping tolerance")
    w_bin, p_bin = _merge(w.ravel(), p.ravel(), tol)
    return WorkDistribution(w_bin, p_bin, tol)


def _merge_tol(*spectra: np.ndarray) -> float:
    lo = min(float(e.min()) for e in spectra)
    hi = max(float(e.max()) for e in spectra)
    # floor keeps eigenvalue jitter of a flat spectrum in one bin
    return MERGE_REL_TOL * max(hi - lo, 1e-3)


def tpm_distribution(
    h_initial: np.ndarray,
    h_final: np.ndarray,
    u_prop: np.ndarray,
    beta: float,
    rho0: np.ndarray | None = None,
    merge_tol: float | None = None,
) -> WorkDistribution:
    """Full enumeration of the two-point-measurement work distribution.

    ``rho0`` overrides the Gibbs populations of ``h_initial``; only its
    diagonal in the ``h_initial`` eigenbasis enters.
    """
    e_i, v_i = herm_eigh(h_initial)
    e_f, v_f = herm_eigh(h_final)
    return _tpm_from_eig(e_i, v_i, e_f, v_f, np.asarray(u_prop), beta, rho0, merge_tol)


def _tpm_from_eig(e_i, v_i, e_f, v_f, u, beta, rho0=None, merge_tol=None) -> WorkDistribution:
    if rho0 is None:
        pop = np.exp(-beta * (e_i - e_i[0]))
        pop /= pop.sum()
    else:
        pop = np.real(np.einsum("in,ij,jn->n", v_i.conj(), np.asarray(rho0), v_i))
    amp = v_f.conj().T @ u @ v_i
    trans = np.abs(amp) ** 2
    keep = trans > TRANSITION_FLOOR
    w = (e_f[:, None] - e_i[None, :])[keep]
    p = (trans * pop[None, :])[keep]
    tol = _merge_tol(e_i, e_f) if merge_tol is None else merge_tol
    return _distribution(w, p, tol)


def strong_coupling_distribution(
    model: CompositeModel,
    tau_prime: float,
    n_steps: int,
    beta: float,
    direction: Literal["forward", "reverse"] = "forward",
    u_prop: np.ndarray | None = None,
    method: str = "auto",
) -> WorkDistribution:
    """TPM with the coupled Hamiltonian at both ends.

    Forward: ``(H(0), H(tau'), U)``; reverse: ``(H(tau'), H(0), U^dag)``, the
    exact adjoint of the discretised forward propagator.
    """
    if u_prop is None:
        u_prop = propagate_model(model, TimeGrid(0.0, tau_prime, n_steps), method=method).U
    h0, h1 = model.H_total(0.0), model.H_total(tau_prime)
    if direction == "forward":
        return tpm_distribution(h0, h1, u_prop, beta)
    if direction == "reverse":
        return tpm_distribution(h1, h0, u_prop.conj().T, beta)
    raise ValueError("direction must be 'forward' or 'reverse'")


def mapped_distribution(
    model: CompositeModel,
    tau_prime: float,
    n_steps: int,
    beta: float,
    direction: Literal["forward", "reverse"] = "forward",
) -> WorkDistribution:
    """The same statistics from the uncoupled problem ``(H_uc(0), H_uc(tau'), U_uc)``."""
    u_uc = propagate(model.H_uc, TimeGrid(0.0, tau_prime, n_steps)).U
    h0, h1 = model.H_uc(0.0), model.H_uc(tau_prime)
    if direction == "forward":
        return tpm_distribution(h0, h1, u_uc, beta)
    if direction == "reverse":
        return tpm_distribution(h1, h0, u_uc.conj().T, beta)
    raise ValueError("direction must be 'forward' or 'reverse'")


def total_variation(a: WorkDistribution, b: WorkDistribution) -> float:
    """``sum |p_a - p_b| / 2`` after binning both on a common grid."""
    tol = max(a.merge_tol, b.merge_tol)
    w = np.concatenate([a.w, b.w])
    p = np.concatenate([a.p, -b.p])
    _, diff = _merge(w, p, tol)
    return 0.5 * float(np.abs(diff).sum())


@dataclass(frozen=True)
class CharacteristicSample:
    u: complex
    theta: complex


def characteristic_function(dist: WorkDistribution, u: complex) -> CharacteristicSample:
    """``Theta(u) = sum_w p(w) e^{iuw}``; imaginary ``u`` gives exponential moments."""
    theta = complex(np.sum(dist.p * np.exp(1j * u * dist.w)))
    return CharacteristicSample(u, theta)


def direct_theta(
    model: CompositeModel,
    tau_prime: float,
    u: complex,
    beta: float = 1.0,
    n_steps: int = 4096,
    u_prop: np.ndarray | None = None,
) -> CharacteristicSample:
    """Trace form ``Tr[U^dag e^{iu H(tau')} U e^{-(beta+iu) H(0)}] / Z(0)``."""
    if u_prop is None:
        u_prop = propagate_model(model, TimeGrid(0.0, tau_prime, n_steps)).U
    e0, v0 = herm_eigh(model.H_total(0.0))
    e1, v1 = herm_eigh(model.H_total(tau_prime))
    shift = e0[0]
    z_scaled = np.sum(np.exp(-beta * (e0 - shift)))
    # the shift cancels between numerator and Z(0) except for its iu phase
    a = (v1 * np.exp(1j * u * e1)) @ v1.conj().T
    b = (v0 * (np.exp(-(beta + 1j * u) * (e0 - shift)) * np.exp(-1j * u * shift))) @ v0.conj().T
    theta = np.trace(u_prop.conj().T @ a @ u_prop @ b) / z_scaled
    return CharacteristicSample(u, complex(theta))


def jarzynski(dist: WorkDistribution, beta: float) -> float:
    """``<e^{-beta w}>`` evaluated in log space, skipping empty bins."""
    mask = dist.p > 0
    return float(np.exp(logsumexp(np.log(dist.p[mask]) - beta * dist.w[mask])))


@dataclass(frozen=True)
class CrooksReport:
    rows: list[tuple[float, float, float, float]]
    max_rel_err: float
    support_mismatch: bool
    unmatched: list[tuple[float, float]] = field(default_factory=list)


def crooks_report(
    fwd: WorkDistribution,
    rev: WorkDistribution,
    zs_ratio: float,
    beta: float,
) -> CrooksReport:
    """Compare ``p_F(w)/p_R(-w)`` with ``zs_ratio e^{beta w}`` bin by bin.

    Only bins where both probabilities exceed 1e-12 enter the error; a bin
    above 1e-10 with no partner at ``-w`` sets ``support_mismatch``.
    """
    tol = max(fwd.merge_tol, rev.merge_tol)
    neg = -rev.w[::-1]
    p_neg = rev.p[::-1]
    rows, unmatched = [], []
    for w, pf in zip(fwd.w, fwd.p):
        j = int(np.searchsorted(neg, w))
        match = None
        for k in (j - 1, j):
            if 0 <= k < neg.size and abs(neg[k] - w) <= tol:
                match = k
        if match is None:
            if pf > SUPPORT_MIN_P:
                unmatched.append((float(w), float(pf)))
            continue
        pr = p_neg[match]
        if pf > CROOKS_MIN_P and pr > CROOKS_MIN_P:
            lhs = pf / pr
            rhs = zs_ratio * np.exp(beta * w)
            rows.append((float(w), float(lhs), float(rhs), float(abs(lhs / rhs - 1.0))))
    # partners missing on the reverse side
    fwd_neg = -fwd.w[::-1]
    for w, pr in zip(rev.w, rev.p):
        j = int(np.searchsorted(fwd_neg, w))
        if not any(0 <= k < fwd_neg.size and abs(fwd_neg[k] - w) <= tol for k in (j - 1, j)):
            if pr > SUPPORT_MIN_P:
                unmatched.append((float(-w), float(pr)))
    max_err = max((r[3] for r in rows), default=0.0)
    return CrooksReport(rows, max_err, bool(unmatched), unmatched)


@dataclass
class NaiveWeakResult:
    """Weak-coupling work statistics evaluated on the coupled dynamics.

    ``scalar``: ``e^{-beta W_w(t)}`` with ``W_w`` the ensemble-averaged weak
    work. ``tpm``: two-point measurement of ``H_s(t) (x) I + I (x) H_b`` under
    the coupled propagator, starting from the coupled Gibbs state dephased in
    the bare basis. Both are compared with ``Z_s(t)/Z_s(0)``.
    """

    t: np.ndarray
    zs_ratio: np.ndarray
    scalar: np.ndarray
    scalar_deviation: np.ndarray
    tpm_t: np.ndarray
    tpm: np.ndarray
    tpm_deviation: np.ndarray
    tpm_final: WorkDistribution | None
    strong_jarzynski: float
    strong_zs_ratio: float
    series: ThermoSeries | None = None

    @property
    def delta_max_scalar(self) -> float:
        return float(np.max(self.scalar_deviation))

    @property
    def delta_max_tpm(self) -> float:
        return float(np.max(self.tpm_deviation)) if self.tpm_deviation.size else float("nan")

    @property
    def strong_rel_err(self) -> float:
        return abs(self.strong_jarzynski / self.strong_zs_ratio - 1.0)


def naive_weak_statistics(
    model: CompositeModel,
    tau_prime: float,
    n_steps: int,
    beta: float,
    n_tpm_samples: int = 8,
    tpm: bool = True,
) -> NaiveWeakResult:
    """Naive weak-coupling Jarzynski check along the coupled evolution.

    The TPM variant is evaluated at ``n_tpm_samples`` evenly spaced nodes
    (always including the last). The corrected strong-coupling average from
    the same final propagator is returned alongside.
    """
    cfg = ThermoConfig(beta=beta, tau_prime=tau_prime, n_steps=n_steps)
    samples = set()
    if tpm and n_tpm_samples > 0:
        samples = {int(round(k)) for k in np.linspace(0, n_steps, n_tpm_samples + 1)[1:]}
    samples.add(n_steps)
    series = run_protocol(model, cfg, snapshots=samples, entropy=False)

    log_z0 = model.log_Z_s(0.0, beta)
    zs_ratio = np.array([np.exp(model.log_Z_s(t, beta) - log_z0) for t in series.t])
    scalar = np.exp(-beta * series.W_w)

    tpm_idx = sorted(samples) if tpm else []
    tpm_vals, tpm_dev, last = [], [], None
    if tpm_idx:
        h0 = model.H_uc(0.0)
        e0, v0 = herm_eigh(h0)
        omega0 = gibbs_total(model, 0.0, beta)
        for i in tpm_idx:
            t = series.t[i]
            e1, v1 = herm_eigh(model.H_uc(t))
            dist = _tpm_from_eig(e0, v0, e1, v1, series.propagators[i], beta, rho0=omega0)
            val = jarzynski(dist, beta)
            tpm_vals.append(val)
            tpm_dev.append(abs(val - zs_ratio[i]))
            last = dist

    u_final = series.propagators[n_steps]
    strong = jarzynski(strong_coupling_distribution(model, tau_prime, n_steps, beta, u_prop=u_final), beta)
    return NaiveWeakResult(
        t=series.t,
        zs_ratio=zs_ratio,
        scalar=scalar,
        scalar_deviation=np.abs(scalar - zs_ratio),
        tpm_t=series.t[tpm_idx] if tpm_idx else np.array([]),
        tpm=np.array(tpm_vals),
        tpm_deviation=np.array(tpm_dev),
        tpm_final=last,
        strong_jarzynski=strong,
        strong_zs_ratio=float(zs_ratio[-1]),
        series=series,
    )

