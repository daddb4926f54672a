"""Dense complex operator algebra.

Everything in this package is a dense ``numpy`` matrix. The helpers here build
composite operators in a fixed ``system (x) bath`` ordering, evaluate functions
of Hermitian matrices through their eigendecomposition and take partial traces.

Functions accept anything ``numpy.asarray`` understands (including
:class:`Operator`) and return plain ``ndarray`` objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

__all__ = [
    "HERMITIAN_TOL",
    "UNITARY_TOL",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "IDENTITY_2",
    "Operator",
    "DimensionLayout",
    "kron",
    "embed_site",
    "is_hermitian",
    "is_unitary",
    "hermitize",
    "herm_eigh",
    "herm_exp",
    "herm_func",
    "conjugate",
    "partial_trace",
    "expectation",
    "max_abs",
]

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

Structure = Literal["general", "hermitian", "unitary"]


def max_abs(a: ArrayLike) -> float:
    """Largest absolute entry, the max-norm used for every residual here."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _hermitian_deviation(a: np.ndarray) -> float:
    return max_abs(a - a.conj().T)


def _scaled_tol(a: np.ndarray, tol: float) -> float:
    # absolute tolerance for O(1) matrices, relative for large-norm ones
    return tol * max(1.0, max_abs(a))


def is_hermitian(a: ArrayLike, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return _hermitian_deviation(a) <= _scaled_tol(a, tol)


def is_unitary(u: ArrayLike, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return max_abs(u @ u.conj().T - np.eye(u.shape[0])) <= tol


@dataclass(frozen=True, eq=False)
class Operator:
    """A square complex matrix tagged with its known structure.

    The structure flag is checked on construction, so an ``Operator`` marked
    ``"hermitian"`` or ``"unitary"`` can be trusted downstream.
    """

    entries: np.ndarray
    structure: Structure = "general"
    dim: int = field(init=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        if self.structure == "hermitian" and not is_hermitian(m):
            raise ValueError("hermiticity violated")
        if self.structure == "unitary" and not is_unitary(m):
            raise ValueError("unitarity violated")
        if self.structure not in ("general", "hermitian", "unitary"):
            raise ValueError(f"unknown structure {self.structure!r}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "dim", m.shape[0])

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)

    @property
    def H(self) -> "Operator":
        s: Structure = self.structure
        return Operator(self.entries.conj().T, s)


@dataclass(frozen=True)
class DimensionLayout:
    """Bipartite ``system (x) bath`` split of a composite Hilbert space."""

    d_s: int
    d_b: int

    def __post_init__(self):
        if self.d_s < 1 or self.d_b < 1:
            raise ValueError("subsystem dimensions must be positive")

    @property
    def dim(self) -> int:
        return self.d_s * self.d_b

    def system_op(self, a: ArrayLike) -> np.ndarray:
        """``a (x) I_b``"""
        return np.kron(np.asarray(a), np.eye(self.d_b))

    def bath_op(self, b: ArrayLike) -> np.ndarray:
        """``I_s (x) b``"""
        return np.kron(np.eye(self.d_s), np.asarray(b))


def kron(*ops: ArrayLike) -> np.ndarray:
    """Tensor product, leftmost factor is the most significant index."""
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, (np.asarray(o, dtype=complex) for o in ops))


def embed_site(op: ArrayLike, site: int, n_sites: int, local_dim: int = 2) -> np.ndarray:
    """Place ``op`` on ``site`` of an ``n_sites`` chain, identities elsewhere."""
    op = np.asarray(op, dtype=complex)
    if not 0 <= site < n_sites:
        raise IndexError(f"site index {site} out of range for {n_sites} sites")
    if op.shape != (local_dim, local_dim):
        raise ValueError(f"operator shape {op.shape} does not match local_dim={local_dim}")
    left = np.eye(local_dim**site, dtype=complex)
    right = np.eye(local_dim ** (n_sites - site - 1), dtype=complex)
    return np.kron(np.kron(left, op), right)


def hermitize(a: ArrayLike, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``(a + a^dag)/2`` after checking ``a`` is Hermitian within ``tol``."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator must be square, got shape {a.shape}")
    dev = _hermitian_deviation(a)
    if dev > _scaled_tol(a, tol):
        raise ValueError(f"hermiticity violated (deviation {dev:.3e})")
    return 0.5 * (a + a.conj().T)


def herm_eigh(h: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a Hermitian matrix, ascending eigenvalues."""
    return np.linalg.eigh(hermitize(h))


def herm_func(h: ArrayLike, f) -> np.ndarray:
    """``f(h)`` for Hermitian ``h``; ``f`` acts elementwise on the spectrum."""
    evals, vecs = herm_eigh(h)
    return (vecs * f(evals)) @ vecs.conj().T


def herm_exp(h: ArrayLike, scale: complex = 1.0) -> np.ndarray:
    """``exp(scale * h)`` for Hermitian ``h`` via ``h = V diag(e) V^dag``.

    Purely imaginary ``scale`` gives a unitary, negative real ``scale`` a
    positive-definite result (Gibbs weights).
    """
    if scale == 0:
        h = hermitize(h)
        return np.eye(h.shape[0], dtype=complex)
    return herm_func(h, lambda e: np.exp(scale * e))


def conjugate(u: ArrayLike, a: ArrayLike) -> np.ndarray:
    """``u a u^dag``"""
    u = np.asarray(u)
    a = np.asarray(a)
    if u.shape != a.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {a.shape}")
    return u @ a @ u.conj().T


def partial_trace(
    rho: ArrayLike,
    layout: DimensionLayout,
    keep: Literal["system", "bath"] = "system",
) -> np.ndarray:
    """Reduced operator on the kept subsystem of a ``system (x) bath`` operator."""
    rho = np.asarray(rho)
    d_s, d_b = layout.d_s, layout.d_b
    if rho.shape != (d_s * d_b, d_s * d_b):
        raise ValueError(
            f"operator of shape {rho.shape} is not factorizable as {d_s} x {d_b}"
        )
    r = rho.reshape(d_s, d_b, d_s, d_b)
    if keep == "system":
        return np.einsum("ajbj->ab", r)
    if keep == "bath":
        return np.einsum("iaib->ab", r)
    raise ValueError(f"keep must be 'system' or 'bath', got {keep!r}")


def expectation(a: ArrayLike, rho: ArrayLike) -> float:
    """``Re Tr(a rho)`` without forming the product."""
    a = np.asarray(a)
    rho = np.asarray(rho)
    return float(np.real(np.einsum("ij,ji->", a, rho)))
