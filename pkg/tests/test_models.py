from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbcthermo.models import (
    OscillatorModel,
    OscillatorModelParams,
    SpinModel,
    SpinModelParams,
    build_oscillator_uncoupled,
    build_spin_total_analytic,
    build_spin_uncoupled,
    ising_pairs,
    make_model,
    oscillator_mapped_check,
    rotation_identity_residual,
    spin_half_operators,
)
from sbcthermo.operators import SIGMA_X, is_hermitian, max_abs


def generator_by_bits(n_bath: int) -> np.ndarray:
    """(sigma^x_s / 2) sum_k sigma^x_k from basis-index arithmetic: flip bit 0 and one bath bit."""
    n = n_bath + 1
    dim = 2**n
    g = np.zeros((dim, dim))
    for col in range(dim):
        for k in range(1, n):
            row = col ^ (1 << (n - 1)) ^ (1 << (n - 1 - k))
            g[row, col] += 0.5
    return g


@pytest.mark.parametrize("n_bath", [1, 2, 4])
def test_generator_matches_index_arithmetic(n_bath):
    m = SpinModel(SpinModelParams(n_bath=n_bath))
    assert np.array_equal(m.G.real, generator_by_bits(n_bath))
    assert max_abs(m.G.imag) == 0


def test_ising_pairs():
    assert ising_pairs(1) == []
    assert ising_pairs(3) == [(0, 1), (1, 2)]
    assert ising_pairs(3, "periodic") == [(0, 1), (1, 2), (2, 0)]
    # two sites on a ring share a single bond
    assert ising_pairs(2, "periodic") == [(0, 1)]


def test_single_site_bath_spectrum():
    m = SpinModel(SpinModelParams(n_bath=1, omega_b=0.7))
    assert np.allclose(np.linalg.eigvalsh(m.H_b), [-0.7, 0.7])


@settings(max_examples=15, deadline=None)
@given(
    n_bath=st.integers(1, 4),
    g=st.floats(0, 1.5),
    t=st.floats(0, 2),
    boundary=st.sampled_from(["open", "periodic"]),
)
def test_spin_mapping_identity_property(n_bath, g, t, boundary):
    m = SpinModel(SpinModelParams(n_bath=n_bath, g=g, boundary=boundary))
    assert max_abs(m.H_total(t) - m.H_mapped(t)) <= 1e-12


def test_analytic_pieces_sum_to_total():
    p = SpinModelParams(n_bath=3, g=0.4)
    hs, hb, hi = build_spin_total_analytic(p, 1.1)
    m = SpinModel(p)
    assert max_abs(hs + hb + hi - m.H_total(1.1)) <= 1e-12
    for piece in (hs, hb, hi):
        assert is_hermitian(piece)


def test_linearized_interaction_small_g():
    # e^{igG} H e^{-igG} = H + ig[G, H] + O(g^2)
    m = SpinModel(SpinModelParams(n_bath=2, g=1e-4))
    h_uc = m.H_uc(0.5)
    first_order = 1j * m.g * (m.G @ h_uc - h_uc @ m.G)
    assert max_abs(m.H_total(0.5) - h_uc - first_order) < 1e-7
    assert max_abs(m.H_int_linearized(0.5) - first_order) < 1e-12


@settings(max_examples=10, deadline=None)
@given(g=st.floats(0, 3), n=st.integers(1, 3))
def test_rotation_identity_property(g, n):
    assert rotation_identity_residual(g, SIGMA_X, spin_half_operators(n)) <= 1e-11


def test_partition_function_factorizes():
    m = SpinModel(SpinModelParams(n_bath=4, g=0.8))
    for t in (0.0, 1.3):
        assert math.isclose(m.log_Z_total(t, 1.0), m.log_Z_s(t, 1.0) + m.log_Z_b(1.0), rel_tol=0, abs_tol=1e-10)


def test_parameter_validation():
    with pytest.raises(ValueError, match="t must be"):
        build_spin_uncoupled(SpinModelParams(n_bath=1), -1.0)
    with pytest.raises(ValueError, match="boundary"):
        SpinModelParams(boundary="ring")
    with pytest.raises(ValueError):
        SpinModelParams(n_bath=0)
    with pytest.raises(ValueError, match="nonpositive"):
        build_oscillator_uncoupled(OscillatorModelParams(alpha=-1.0, n_max_sys=4, n_max_bath=4), 1.5)
    with pytest.raises(TypeError):
        make_model(object())


def test_uncoupled_artifacts():
    art = build_spin_uncoupled(SpinModelParams(n_bath=2), 0.5)
    assert art.H_total is None
    assert art.H_uc.shape == (8, 8)
    assert is_hermitian(art.G)


def test_oscillator_bare_spectrum_exact():
    p = OscillatorModelParams(n_max_sys=12, n_max_bath=6)
    m = OscillatorModel(p)
    levels = np.linalg.eigvalsh(m.H_s(0.0))
    assert np.allclose(levels, p.omega_s0 * (np.arange(13) + 0.5), atol=1e-12)
    assert np.allclose(np.linalg.eigvalsh(m.H_b), np.arange(7) * p.omega_bath)


def test_oscillator_quadratures_canonical_on_low_block():
    o = OscillatorModel(OscillatorModelParams(n_max_sys=10, n_max_bath=10)).ops
    comm = o.x @ o.p - o.p @ o.x
    assert np.allclose(comm[:9, :9], 1j * np.eye(9))
    comm_b = o.q @ o.pi - o.pi @ o.q
    assert np.allclose(comm_b[:9, :9], 2j * np.eye(9))


def test_renormalized_mass_formula():
    p = OscillatorModelParams(mass_m=2.0, g=0.3, g_1=0.5, omega_bath=1.5)
    assert math.isclose(p.renormalized_mass, 2.0 / (1 + 2 * 2.0 * 0.09 * 1.5 * 0.25))


def test_oscillator_conjugation_converges_to_closed_form():
    devs = []
    for n_max in (12, 20, 30):
        rep = oscillator_mapped_check(OscillatorModelParams(n_max_sys=n_max, n_max_bath=n_max, g=0.2))
        devs.append(rep.max_deviation)
    assert math.isclose(rep.kinetic_coefficient, rep.expected_kinetic_coefficient, rel_tol=1e-9)
    assert math.isclose(rep.potential_coefficient, rep.expected_potential_coefficient, rel_tol=1e-9)
    # cutoff effects leave the low block geometrically with n_max
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] <= 1e-10


def test_oscillator_closed_form_at_default_coupling():
    rep = oscillator_mapped_check(OscillatorModelParams(n_max_sys=20, n_max_bath=20))
    assert rep.max_deviation <= 1e-12


def test_oscillator_total_is_conjugation():
    m = OscillatorModel(OscillatorModelParams(n_max_sys=8, n_max_bath=8))
    assert max_abs(m.H_total(0.7) - m.H_mapped(0.7)) <= 1e-12


def test_zero_coupling_is_identity_mapping():
    m = SpinModel(SpinModelParams(n_bath=2, g=0.0))
    assert np.allclose(m.mapping, np.eye(8))
    assert max_abs(m.H_total(1.0) - m.H_uc(1.0)) <= 1e-14
