from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbcthermo.models import OscillatorModel, OscillatorModelParams, SpinModel, SpinModelParams
from sbcthermo.operators import SIGMA_Z, max_abs
from sbcthermo.thermo import (
    ThermoConfig,
    delta_f_identity_check,
    entropy_terms,
    free_energy,
    gibbs,
    gibbs_total,
    relative_entropy_to_gibbs,
    run_protocol,
    von_neumann_entropy,
)


def spin(**kw) -> SpinModel:
    return SpinModel(SpinModelParams(**kw))


def test_gibbs_two_level():
    rho, z = gibbs(SIGMA_Z, 1.0)
    assert math.isclose(z, 2 * math.cosh(1.0), rel_tol=1e-14)
    assert np.allclose(np.diag(rho).real, [math.exp(-1) / z, math.exp(1) / z])


def test_gibbs_high_temperature():
    rho, _ = gibbs(np.diag([0.0, 1.0, 5.0]), 1e-12)
    assert max_abs(rho - np.eye(3) / 3) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=1, max_size=6), st.floats(0.01, 10))
def test_gibbs_is_normalized_state(levels, beta):
    rho, z = gibbs(np.diag(levels), beta)
    assert abs(np.trace(rho).real - 1) <= 1e-12
    assert np.linalg.eigvalsh(rho).min() >= -1e-15
    assert math.isclose(z, sum(math.exp(-beta * e) for e in levels), rel_tol=1e-12)


def test_gibbs_total_factorizes_at_reference_parameters():
    m = spin()
    _, z = gibbs(m.H_total(0.0), 1.0)
    assert math.isclose(z, m.Z_s(0.0, 1.0) * m.Z_b(1.0), rel_tol=1e-10)


def test_mapped_gibbs_matches_direct():
    m = OscillatorModel(OscillatorModelParams(n_max_sys=8, n_max_bath=8, g=0.2))
    assert max_abs(gibbs_total(m, 0.5, 2.0) - gibbs(m.H_total(0.5), 2.0)[0]) < 1e-12


def test_free_energy_closed_forms():
    m = spin(n_bath=1, lambda_x0=0.0, lambda_z0=0.0)
    assert math.isclose(free_energy(m, 1.0, 0.0), -math.log(2), rel_tol=1e-14)
    m = spin(n_bath=1, lambda_x0=0.3, lambda_z0=0.4, alpha_x=0.0, alpha_z=0.0)
    eps = 0.5
    assert math.isclose(free_energy(m, 2.0, 1.0), -0.5 * math.log(2 * math.cosh(2.0 * eps)), rel_tol=1e-12)


def test_free_energy_change_is_log_partition_ratio():
    m = spin()
    df = free_energy(m, 1.0, 2.0) - free_energy(m, 1.0, 0.0)
    assert math.isclose(df, -math.log(m.Z_s(2.0, 1.0) / m.Z_s(0.0, 1.0)), rel_tol=1e-12)


def test_entropy_edge_cases():
    pure = np.diag([1.0, 0.0])
    assert abs(von_neumann_entropy(pure)) <= 1e-10
    assert math.isclose(von_neumann_entropy(np.eye(2) / 2), math.log(2))
    with pytest.raises(ValueError, match="positivity violated"):
        von_neumann_entropy(np.diag([1.1, -0.1]))
    h = 0.7 * SIGMA_Z
    assert abs(relative_entropy_to_gibbs(gibbs(h, 1.3)[0], h, 1.3)) <= 1e-12


def test_relative_entropy_vanishes_without_coupling():
    cfg = ThermoConfig(n_steps=2)
    _, d_rel, _ = entropy_terms(spin(n_bath=2, g=0.0), cfg, 1.0)
    assert abs(d_rel) <= 1e-10


@settings(max_examples=8, deadline=None)
@given(st.floats(0, 1.2), st.floats(0, 2))
def test_entropy_terms_nonnegative(g, t):
    s_v, d_rel, _ = entropy_terms(spin(n_bath=2, g=g), ThermoConfig(n_steps=2), t)
    assert s_v >= -1e-10 and d_rel >= -1e-10


def test_zero_coupling_strong_equals_weak():
    s = run_protocol(spin(n_bath=3, g=0.0), ThermoConfig(n_steps=256))
    assert max_abs(s.delta_W) <= 1e-12 and max_abs(s.delta_Q) <= 1e-12
    assert s.W[0] == 0 and s.Q[0] == 0 and s.Delta_S[0] == 0


def test_undriven_protocol_does_no_work():
    s = run_protocol(spin(n_bath=2, g=0.7, alpha_x=0.0, alpha_z=0.0), ThermoConfig(n_steps=128))
    assert max_abs(s.W) <= 1e-10
    assert max_abs(s.Q - (s.E - s.E[0])) <= 1e-10


@pytest.mark.parametrize("g", [0.3, 1.0])
def test_first_law_holds_per_step(g):
    s = run_protocol(spin(n_bath=3, g=g), ThermoConfig(n_steps=256))
    assert s.first_law_residual.max() <= 1e-12


def test_first_law_converges_at_second_order():
    m = spin(n_bath=2, g=0.5)
    w = [run_protocol(m, ThermoConfig(n_steps=n), entropy=False).W[-1] for n in (128, 256, 512)]
    assert 3.5 < abs(w[0] - w[1]) / abs(w[1] - w[2]) < 4.5


def test_unstable_propagation_detected():
    m = spin(n_bath=1, g=0.2)
    rho = np.eye(4) / 2  # trace 2
    with pytest.raises(RuntimeError, match="propagation unstable"):
        run_protocol(m, ThermoConfig(n_steps=4, initial_state=rho))


def test_config_validation():
    with pytest.raises(ValueError):
        ThermoConfig(beta=0.0)
    with pytest.raises(ValueError):
        ThermoConfig(n_steps=1)


def test_quasi_static_entropy_tracks_beta_q():
    m = spin(n_bath=2, g=0.3)
    cfg = ThermoConfig(n_steps=2048, tau_prime=1.0, quasi_static=True)
    s = run_protocol(m, cfg)
    _, _, delta_s = entropy_terms(m, cfg, 1.0)
    assert abs(delta_s - s.Delta_S[-1]) <= 1e-12
    assert abs(delta_s - cfg.beta * s.Q[-1]) <= 1e-4


def test_delta_f_identity_converges():
    m = spin(n_bath=2, g=0.3)
    r1 = delta_f_identity_check(m, ThermoConfig(n_steps=1024, quasi_static=True))
    r2 = delta_f_identity_check(m, ThermoConfig(n_steps=2048, quasi_static=True))
    assert r1.residual <= 1e-4 and r2.residual < r1.residual
    assert r1.state_residual <= 1e-12
    with pytest.raises(ValueError):
        delta_f_identity_check(m, ThermoConfig(n_steps=8))


def test_delta_f_identity_trivial_cases():
    still = spin(n_bath=1, g=0.0, alpha_x=0.0, alpha_z=0.0)
    assert delta_f_identity_check(still, ThermoConfig(n_steps=16, quasi_static=True)).residual <= 1e-14
    driven = spin(n_bath=1, g=0.0)
    assert delta_f_identity_check(driven, ThermoConfig(n_steps=4096, quasi_static=True)).residual <= 1e-6


@pytest.mark.slow
def test_delta_max_work_grows_from_weak_to_moderate_coupling():
    d = [run_protocol(spin(g=g), ThermoConfig(n_steps=512), entropy=False).delta_max_W for g in (0.1, 0.5)]
    assert d[1] > d[0] > 0
