"""The two concrete composite models.

Both start from an uncoupled Hamiltonian ``H_uc(t) = H_s(t) (x) I + I (x) H_b``
and a generator ``G``; the strongly coupled Hamiltonian is
``e^{igG} H_uc(t) e^{-igG}``.

* :class:`SpinModel` -- a driven central spin in a transverse-field Ising bath.
  Site 0 is the central spin, sites ``1..N`` the bath chain, all in the ``z``
  basis. The coupled Hamiltonian is built from its closed form (dressed system,
  dressed bath and interaction pieces), independently of the conjugation.
* :class:`OscillatorModel` -- a driven oscillator coupled to one bath mode
  through ``G = g_1 p_s (a + a^dag)``, truncated in the Fock basis. Quadratic
  operators (``x^2``, ``p^2``, ``q^2``) are projections of the untruncated
  products, so the bare spectra are exact on the kept levels.

The spin generator uses spin-1/2 operators for the central spin,
``G = (sigma_s^x / 2) sum_k sigma_k^x``: with this normalisation
``e^{igG}`` rotates bath and system spins by the angle ``g`` that appears in
``cos(g)``, ``sin(g sum_k sigma_k^x)`` of the closed-form coupled Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from functools import cached_property
from typing import Literal

import numpy as np

from .operators import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DimensionLayout,
    conjugate,
    embed_site,
    herm_exp,
    herm_func,
    max_abs,
)

__all__ = [
    "SpinModelParams",
    "OscillatorModelParams",
    "ModelArtifacts",
    "CompositeModel",
    "SpinModel",
    "OscillatorModel",
    "OscillatorCheckReport",
    "make_model",
    "build_spin_uncoupled",
    "build_spin_total_analytic",
    "build_oscillator_uncoupled",
    "oscillator_mapped_check",
    "rotation_identity_residual",
    "spin_half_operators",
    "ising_pairs",
]


@dataclass(frozen=True)
class SpinModelParams:
    """Central spin + Ising bath. Defaults are the reference driving protocol."""

    lambda_x0: float = 1.0
    lambda_z0: float = 2.5
    alpha_x: float = 1.0
    alpha_z: float = -0.6
    omega_b: float = 1.0
    h: float = 1.0
    g: float = 0.1
    n_bath: int = 6
    boundary: Literal["open", "periodic"] = "open"

    def __post_init__(self):
        if self.n_bath < 1:
            raise ValueError("n_bath must be >= 1")
        if self.g < 0:
            raise ValueError("coupling g must be >= 0")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")

    def lambda_x(self, t: float) -> float:
        return self.lambda_x0 * (1.0 + self.alpha_x * t)

    def lambda_z(self, t: float) -> float:
        return self.lambda_z0 * (1.0 + self.alpha_z * t)


@dataclass(frozen=True)
class OscillatorModelParams:
    """Driven oscillator + one bath mode.

    Only the frequencies are physically pinned down. ``mass_m`` and ``g_1``
    default to 1 and are reported in every output header.
    """

    mass_m: float = 1.0
    omega_s0: float = 2.83
    alpha: float = -0.1
    omega_bath: float = 1.0
    g: float = 0.1
    g_1: float = 1.0
    n_max_sys: int = 30
    n_max_bath: int = 30

    def __post_init__(self):
        if self.n_max_sys < 2 or self.n_max_bath < 2:
            raise ValueError("Fock cutoffs must be >= 2")
        if self.mass_m <= 0 or self.omega_s0 <= 0:
            raise ValueError("mass and reference frequency must be positive")
        if self.g < 0:
            raise ValueError("coupling g must be >= 0")

    def omega_s(self, t: float) -> float:
        w = self.omega_s0 * (1.0 + self.alpha * t)
        if w <= 0:
            raise ValueError(f"protocol drives frequency nonpositive at t={t}")
        return w

    def stiffness(self, t: float) -> float:
        """``lambda_t = m omega_s(t)^2``"""
        return self.mass_m * self.omega_s(t) ** 2

    @property
    def renormalized_mass(self) -> float:
        return self.mass_m / (1.0 + 2.0 * self.mass_m * self.g**2 * self.omega_bath * self.g_1**2)


@dataclass(frozen=True)
class ModelArtifacts:
    """Snapshot of every Hamiltonian of one model at one time.

    Entries that a partial builder does not produce are ``None``. Composite
    operators live on ``layout.dim``; ``H_s`` and ``H_b`` on the subsystems.
    """

    t: float
    layout: DimensionLayout
    H_s: np.ndarray
    H_b: np.ndarray
    G: np.ndarray
    H_uc: np.ndarray
    H_total: np.ndarray | None = None
    H_sys_dressed: np.ndarray | None = None
    H_bath_dressed: np.ndarray | None = None
    H_int: np.ndarray | None = None


def ising_pairs(n_bath: int, boundary: str = "open") -> list[tuple[int, int]]:
    """Nearest-neighbour bath pairs, 0-based within the bath chain."""
    pairs = [(k, k + 1) for k in range(n_bath - 1)]
    if boundary == "periodic" and n_bath > 2:
        pairs.append((n_bath - 1, 0))
    return pairs


def spin_half_operators(n_spins: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collective spin ``J^a = sum_k sigma_k^a / 2`` on ``n_spins`` spins."""
    return tuple(
        0.5 * sum(embed_site(s, k, n_spins) for k in range(n_spins))
        for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)
    )


def rotation_identity_residual(
    g: float,
    sigma_x: np.ndarray,
    j_ops: tuple[np.ndarray, np.ndarray, np.ndarray],
) -> float:
    """Max-norm residual of ``e^{ig S J^x} J^z e^{-ig S J^x} = J^z cos(gS) + J^y sin(gS)``.

    ``sigma_x`` (``S``) acts on the first tensor factor and the angular
    momentum operators ``j_ops = (J^x, J^y, J^z)`` on the second.
    """
    jx, jy, jz = (np.asarray(j) for j in j_ops)
    sigma_x = np.asarray(sigma_x)
    i_s = np.eye(sigma_x.shape[0])
    u = herm_exp(np.kron(sigma_x, jx), 1j * g)
    lhs = conjugate(u, np.kron(i_s, jz))
    cos_s = herm_func(sigma_x, lambda e: np.cos(g * e))
    sin_s = herm_func(sigma_x, lambda e: np.sin(g * e))
    rhs = np.kron(cos_s, jz) + np.kron(sin_s, jy)
    return max_abs(lhs - rhs)


class CompositeModel:
    """Shared machinery: uncoupled family, mapping unitary, partition functions.

    Subclasses define ``layout``, :meth:`H_s`, ``H_b``, ``G`` and
    :meth:`H_total`, plus the dressed pieces.
    """

    layout: DimensionLayout
    g: float
    # dynamics may step with W (u_s (x) u_b) W^dag instead of diagonalising H(t)
    prefers_mapped_stepping: bool = False

    def H_s(self, t: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def H_b(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def G(self) -> np.ndarray:
        raise NotImplementedError

    def H_total(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def H_sys_dressed(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def H_bath_dressed(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def H_int(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def metadata(self) -> dict:
        raise NotImplementedError

    @cached_property
    def _bath_embedded(self) -> np.ndarray:
        return self.layout.bath_op(self.H_b)

    def H_s_embedded(self, t: float) -> np.ndarray:
        return self.layout.system_op(self.H_s(t))

    def H_uc(self, t: float) -> np.ndarray:
        return self.H_s_embedded(t) + self._bath_embedded

    @cached_property
    def mapping(self) -> np.ndarray:
        """``e^{igG}``"""
        return herm_exp(self.G, 1j * self.g)

    def H_mapped(self, t: float) -> np.ndarray:
        """``e^{igG} H_uc(t) e^{-igG}`` by direct conjugation."""
        return conjugate(self.mapping, self.H_uc(t))

    def artifacts(self, t: float, *, partial: bool = False) -> ModelArtifacts:
        common = dict(
            t=float(t),
            layout=self.layout,
            H_s=self.H_s(t),
            H_b=self.H_b,
            G=self.G,
            H_uc=self.H_uc(t),
        )
        if partial:
            return ModelArtifacts(**common)
        return ModelArtifacts(
            **common,
            H_total=self.H_total(t),
            H_sys_dressed=self.H_sys_dressed(t),
            H_bath_dressed=self.H_bath_dressed(t),
            H_int=self.H_int(t),
        )

    def log_Z_s(self, t: float, beta: float) -> float:
        e = np.linalg.eigvalsh(self.H_s(t))
        return _log_sum_exp(-beta * e)

    def Z_s(self, t: float, beta: float) -> float:
        return float(np.exp(self.log_Z_s(t, beta)))

    def log_Z_b(self, beta: float) -> float:
        return _log_sum_exp(-beta * self._bath_spectrum)

    def Z_b(self, beta: float) -> float:
        return float(np.exp(self.log_Z_b(beta)))

    def log_Z_total(self, t: float, beta: float) -> float:
        """``ln Tr e^{-beta H(t)}`` from the spectrum of the coupled Hamiltonian."""
        e = np.linalg.eigvalsh(self.H_total(t))
        return _log_sum_exp(-beta * e)

    @cached_property
    def _bath_spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.H_b)


def _log_sum_exp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + float(np.log(np.sum(np.exp(x - m))))


class SpinModel(CompositeModel):
    """Central spin driven by ``lambda_x(t) sigma^x + lambda_z(t) sigma^z``.

    Bath: ``H_b = -omega_b sum_k sigma_k^z - h sum_<kj> sigma_k^x sigma_j^x``.
    """

    def __init__(self, params: SpinModelParams):
        self.params = params
        self.g = params.g
        self.n_sites = params.n_bath + 1
        self.layout = DimensionLayout(2, 2**params.n_bath)

    def _site(self, op: np.ndarray, k: int) -> np.ndarray:
        return embed_site(op, k, self.n_sites)

    def _bath_site(self, op: np.ndarray, k: int) -> np.ndarray:
        return embed_site(op, k, self.params.n_bath)

    @cached_property
    def _bath_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """Bath-space ``sum_k sigma_k^z`` and ``sum_<kj> sigma_k^x sigma_j^x``."""
        n = self.params.n_bath
        sz = sum(self._bath_site(SIGMA_Z, k) for k in range(n))
        xx = np.zeros((2**n, 2**n), dtype=complex)
        for k, j in ising_pairs(n, self.params.boundary):
            xx += self._bath_site(SIGMA_X, k) @ self._bath_site(SIGMA_X, j)
        return sz, xx

    @cached_property
    def _bath_collective(self) -> tuple[np.ndarray, np.ndarray]:
        """Bath-space ``sum_k sigma_k^x`` and ``sum_k sigma_k^y``."""
        n = self.params.n_bath
        sx = sum(self._bath_site(SIGMA_X, k) for k in range(n))
        sy = sum(self._bath_site(SIGMA_Y, k) for k in range(n))
        return sx, sy

    def H_s(self, t: float) -> np.ndarray:
        p = self.params
        return p.lambda_x(t) * SIGMA_X + p.lambda_z(t) * SIGMA_Z

    @cached_property
    def H_b(self) -> np.ndarray:
        sz, xx = self._bath_terms
        return -self.params.omega_b * sz - self.params.h * xx

    @cached_property
    def G(self) -> np.ndarray:
        sx, _ = self._bath_collective
        return np.kron(0.5 * SIGMA_X, sx)

    # closed-form coupled pieces

    @cached_property
    def _dressed_static(self) -> dict[str, np.ndarray]:
        p = self.params
        g = p.g
        sz, xx = self._bath_terms
        sx, sy = self._bath_collective
        i_s = np.eye(2)
        i_b = np.eye(self.layout.d_b)
        cos_sx = herm_func(sx, lambda e: np.cos(g * e))
        sin_sx = herm_func(sx, lambda e: np.sin(g * e))
        return dict(
            bath=np.kron(i_s, -np.cos(g) * p.omega_b * sz - p.h * xx),
            flip=-p.omega_b * np.sin(g) * np.kron(SIGMA_X, sy),
            z_cos=np.kron(SIGMA_Z, cos_sx - i_b),
            y_sin=np.kron(SIGMA_Y, sin_sx),
            x_sys=np.kron(SIGMA_X, i_b),
            z_sys=np.kron(SIGMA_Z, i_b),
        )

    def H_sys_dressed(self, t: float) -> np.ndarray:
        """Equal to ``H_s(t) (x) I``: the system part is untouched by the mapping."""
        d = self._dressed_static
        p = self.params
        return p.lambda_x(t) * d["x_sys"] + p.lambda_z(t) * d["z_sys"]

    def H_bath_dressed(self, t: float = 0.0) -> np.ndarray:
        return self._dressed_static["bath"]

    def H_int(self, t: float) -> np.ndarray:
        d = self._dressed_static
        return d["flip"] + self.params.lambda_z(t) * (d["z_cos"] + d["y_sin"])

    def H_total(self, t: float) -> np.ndarray:
        d = self._dressed_static
        p = self.params
        return (
            d["bath"]
            + d["flip"]
            + p.lambda_x(t) * d["x_sys"]
            + p.lambda_z(t) * (d["z_sys"] + d["z_cos"] + d["y_sin"])
        )

    def H_int_linearized(self, t: float) -> np.ndarray:
        """Small-``g`` form ``-g omega_b sigma_s^x sum sigma^y + g lambda_z sigma_s^y sum sigma^x``."""
        p = self.params
        sx, sy = self._bath_collective
        return p.g * (
            -p.omega_b * np.kron(SIGMA_X, sy) + p.lambda_z(t) * np.kron(SIGMA_Y, sx)
        )

    def metadata(self) -> dict:
        return {"model": "spin", **asdict(self.params)}


@dataclass(frozen=True)
class _OscillatorOps:
    x: np.ndarray
    p: np.ndarray
    x2: np.ndarray
    p2: np.ndarray
    q: np.ndarray
    pi: np.ndarray
    q2: np.ndarray
    number_b: np.ndarray


def _ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)


class OscillatorModel(CompositeModel):
    """Oscillator ``p^2/2m + m omega_s(t)^2 x^2 / 2`` with one bath mode ``omega a^dag a``.

    Quadratures use the fixed reference frequency ``omega_s0``:
    ``x = (b + b^dag)/sqrt(2 m omega_s0)``, ``p = i sqrt(m omega_s0 / 2)(b^dag - b)``.
    """

    prefers_mapped_stepping = True
    _PAD = 3

    def __init__(self, params: OscillatorModelParams):
        self.params = params
        self.g = params.g
        self.layout = DimensionLayout(params.n_max_sys + 1, params.n_max_bath + 1)

    @cached_property
    def ops(self) -> _OscillatorOps:
        p = self.params
        ds, db = self.layout.d_s, self.layout.d_b
        # build on a padded space so projected squares carry the exact matrix elements
        b = _ladder(ds + self._PAD)
        x = (b + b.conj().T) / np.sqrt(2 * p.mass_m * p.omega_s0)
        mom = 1j * np.sqrt(p.mass_m * p.omega_s0 / 2) * (b.conj().T - b)
        a = _ladder(db + self._PAD)
        q = a + a.conj().T
        pi = 1j * (a.conj().T - a)
        return _OscillatorOps(
            x=x[:ds, :ds],
            p=mom[:ds, :ds],
            x2=(x @ x)[:ds, :ds],
            p2=(mom @ mom)[:ds, :ds],
            q=q[:db, :db],
            pi=pi[:db, :db],
            q2=(q @ q)[:db, :db],
            number_b=np.diag(np.arange(db)).astype(complex),
        )

    def H_s(self, t: float) -> np.ndarray:
        o = self.ops
        return o.p2 / (2 * self.params.mass_m) + 0.5 * self.params.stiffness(t) * o.x2

    @cached_property
    def H_b(self) -> np.ndarray:
        return self.params.omega_bath * self.ops.number_b

    @cached_property
    def G(self) -> np.ndarray:
        return self.params.g_1 * np.kron(self.ops.p, self.ops.q)

    @cached_property
    def _mapped_pieces(self) -> tuple[np.ndarray, np.ndarray]:
        # H_s is affine in the stiffness, so the conjugated H is too
        o, w = self.ops, self.mapping
        static = self.layout.system_op(o.p2 / (2 * self.params.mass_m)) + self._bath_embedded
        return conjugate(w, static), conjugate(w, self.layout.system_op(0.5 * o.x2))

    def H_total(self, t: float) -> np.ndarray:
        # the projected closed form differs from the conjugation near the cutoff;
        # dynamics use the exactly unitarily equivalent conjugated operator
        static, x2 = self._mapped_pieces
        return static + self.params.stiffness(t) * x2

    def H_sys_dressed(self, t: float) -> np.ndarray:
        o = self.ops
        kin = o.p2 / (2 * self.params.renormalized_mass)
        return self.layout.system_op(kin + 0.5 * self.params.stiffness(t) * o.x2)

    def H_bath_dressed(self, t: float) -> np.ndarray:
        p, o = self.params, self.ops
        shift = 0.5 * p.stiffness(t) * (p.g * p.g_1) ** 2 * o.q2
        return self.layout.bath_op(self.H_b + shift)

    def H_int(self, t: float) -> np.ndarray:
        p, o = self.params, self.ops
        return p.g * p.g_1 * (
            p.stiffness(t) * np.kron(o.x, o.q) - p.omega_bath * np.kron(o.p, o.pi)
        )

    def H_analytic(self, t: float) -> np.ndarray:
        return self.H_sys_dressed(t) + self.H_bath_dressed(t) + self.H_int(t)

    def metadata(self) -> dict:
        return {"model": "oscillator", **asdict(self.params)}


def make_model(params: SpinModelParams | OscillatorModelParams) -> CompositeModel:
    if isinstance(params, SpinModelParams):
        return SpinModel(params)
    if isinstance(params, OscillatorModelParams):
        return OscillatorModel(params)
    raise TypeError(f"unsupported parameter type {type(params).__name__}")


def build_spin_uncoupled(p: SpinModelParams, t: float) -> ModelArtifacts:
    if t < 0:
        raise ValueError("t must be >= 0")
    return SpinModel(p).artifacts(t, partial=True)


def build_spin_total_analytic(
    p: SpinModelParams, t: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form ``(H_s, H_b, H_I)`` of the coupled spin model, all on the full space."""
    m = SpinModel(p)
    return m.H_sys_dressed(t), m.H_bath_dressed(t), m.H_int(t)


def build_oscillator_uncoupled(p: OscillatorModelParams, t: float) -> ModelArtifacts:
    p.omega_s(t)
    return OscillatorModel(p).artifacts(t, partial=True)


@dataclass(frozen=True)
class OscillatorCheckReport:
    """Conjugated vs closed-form coupled oscillator on a low Fock block."""

    block: int
    max_deviation: float
    kinetic_coefficient: float
    expected_kinetic_coefficient: float
    renormalized_mass: float
    potential_coefficient: float
    expected_potential_coefficient: float
    extra: dict = field(default_factory=dict)


def oscillator_mapped_check(
    p: OscillatorModelParams,
    t: float = 0.0,
    block: int | None = None,
    fit_levels: int = 8,
) -> OscillatorCheckReport:
    """Compare ``e^{igG} H_uc e^{-igG}`` with the renormalized-mass closed form.

    The deviation is taken over composite states whose system and bath Fock
    numbers are both ``<= block`` (default ``n_max // 4``, so the distance to
    the cutoff grows with ``n_max``). The kinetic coefficient is fitted on the
    bath-vacuum block: ``<0_b|H|0_b> ~ c_p p^2 + c_x x^2 + c_0`` on the lowest
    ``fit_levels`` system states.
    """
    m = OscillatorModel(p)
    ds, db = m.layout.d_s, m.layout.d_b
    if block is None:
        block = min(p.n_max_sys, p.n_max_bath) // 4
    block = min(block, ds - 1, db - 1)
    mapped = m.H_mapped(t)
    analytic = m.H_analytic(t)
    diff = np.abs(mapped - analytic).reshape(ds, db, ds, db)
    k = block + 1
    max_dev = float(diff[:k, :k, :k, :k].max())

    vac = mapped.reshape(ds, db, ds, db)[:, 0, :, 0]
    n = min(fit_levels, ds - 2)
    o = m.ops
    basis = [o.p2[:n, :n], o.x2[:n, :n], np.eye(n)]
    A = np.stack([b.ravel() for b in basis], axis=1)
    coef, *_ = np.linalg.lstsq(A, vac[:n, :n].ravel(), rcond=None)
    c_p, c_x = float(coef[0].real), float(coef[1].real)
    return OscillatorCheckReport(
        block=block,
        max_deviation=max_dev,
        kinetic_coefficient=c_p,
        expected_kinetic_coefficient=1.0 / (2.0 * p.renormalized_mass),
        renormalized_mass=p.renormalized_mass,
        potential_coefficient=c_x,
        expected_potential_coefficient=0.5 * p.stiffness(t),
        extra={"fit_levels": n},
    )
