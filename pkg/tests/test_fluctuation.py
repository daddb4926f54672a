from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from sbcthermo.evolution import TimeGrid, propagate_model
from sbcthermo.fluctuation import (
    WorkDistribution,
    characteristic_function,
    crooks_report,
    direct_theta,
    jarzynski,
    mapped_distribution,
    naive_weak_statistics,
    strong_coupling_distribution,
    total_variation,
    tpm_distribution,
)
from sbcthermo.models import SpinModel, SpinModelParams
from sbcthermo.operators import SIGMA_Z
from sbcthermo.thermo import ThermoConfig, run_protocol


def spin(**kw) -> SpinModel:
    return SpinModel(SpinModelParams(**kw))


def zs_ratio(m, tau_prime, beta=1.0):
    return math.exp(m.log_Z_s(tau_prime, beta) - m.log_Z_s(0.0, beta))


@pytest.fixture(scope="module")
def n2_g05():
    m = spin(n_bath=2, g=0.5)
    u = propagate_model(m, TimeGrid(0.0, 2.0, 4096)).U
    fwd = strong_coupling_distribution(m, 2.0, 4096, 1.0, "forward", u_prop=u)
    rev = strong_coupling_distribution(m, 2.0, 4096, 1.0, "reverse", u_prop=u)
    return m, u, fwd, rev


def test_no_protocol_gives_zero_work():
    d = tpm_distribution(SIGMA_Z, SIGMA_Z, np.eye(2), 1.0)
    assert d.entries == [(0.0, pytest.approx(1.0))]


def test_two_level_hand_enumeration():
    d = tpm_distribution(SIGMA_Z, 2 * SIGMA_Z, np.eye(2), 1.0)
    z = 2 * math.cosh(1.0)
    assert np.allclose(d.w, [-1.0, 1.0])
    assert np.allclose(d.p, [math.e / z, math.exp(-1) / z])


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000), st.floats(0.1, 3))
def test_random_tpm_is_normalized_and_sorted(dim, seed, beta):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    b = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    u = scipy.stats.unitary_group.rvs(dim, random_state=seed)
    d = tpm_distribution(a + a.conj().T, b + b.conj().T, u, beta)
    assert abs(d.total - 1) <= 1e-10
    assert np.all(d.p >= 0)
    assert np.all(np.diff(d.w) > d.merge_tol)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000), st.floats(0.1, 3))
def test_jarzynski_identity_for_any_unitary(dim, seed, beta):
    rng = np.random.default_rng(seed)
    h0 = np.diag(rng.normal(size=dim))
    h1 = np.diag(rng.normal(size=dim))
    u = scipy.stats.unitary_group.rvs(dim, random_state=seed)
    d = tpm_distribution(h0, h1, u, beta)
    z0, z1 = np.exp(-beta * np.diag(h0)).sum(), np.exp(-beta * np.diag(h1)).sum()
    assert math.isclose(jarzynski(d, beta), z1 / z0, rel_tol=1e-9)


def test_mean_work_matches_protocol_work():
    m = spin(n_bath=2, g=0.3)
    d = strong_coupling_distribution(m, 2.0, 2048, 1.0)
    s = run_protocol(m, ThermoConfig(n_steps=2048), entropy=False)
    assert abs(d.mean - s.W[-1]) <= 1e-6


def test_mapped_and_direct_constructions_coincide(n2_g05):
    m, _, fwd, _ = n2_g05
    assert total_variation(fwd, mapped_distribution(m, 2.0, 4096, 1.0)) <= 1e-8
    m0 = spin(n_bath=2, g=0.0)
    assert total_variation(strong_coupling_distribution(m0, 1.0, 64, 1.0), mapped_distribution(m0, 1.0, 64, 1.0)) <= 1e-12


def test_zero_duration_protocol():
    d = strong_coupling_distribution(spin(n_bath=2, g=0.5), 0.0, 8, 1.0)
    assert len(d) == 1 and d.w[0] == 0.0 and abs(d.p[0] - 1) < 1e-12


@pytest.mark.parametrize("u", [-10.0, -1.0, 0.0, 1.0, 10.0])
def test_characteristic_function_trace_form(n2_g05, u):
    m, prop, fwd, _ = n2_g05
    summed = characteristic_function(fwd, u).theta
    assert abs(summed - direct_theta(m, 2.0, u, u_prop=prop).theta) <= 1e-8
    assert abs(characteristic_function(fwd, -u).theta - summed.conjugate()) <= 1e-10


def test_characteristic_function_at_imaginary_beta(n2_g05):
    m, _, fwd, _ = n2_g05
    assert characteristic_function(fwd, 0.0).theta == pytest.approx(1.0, abs=1e-10)
    assert characteristic_function(fwd, 1j).theta.real == pytest.approx(zs_ratio(m, 2.0), rel=1e-10)


def test_crooks_relation(n2_g05):
    m, _, fwd, rev = n2_g05
    rep = crooks_report(fwd, rev, zs_ratio(m, 2.0), 1.0)
    assert not rep.support_mismatch and rep.rows
    assert rep.max_rel_err <= 1e-6


def test_crooks_trivial_and_mismatch():
    d = WorkDistribution(np.array([0.0]), np.array([1.0]), 1e-9)
    rep = crooks_report(d, d, 1.0, 1.0)
    assert rep.rows == [(0.0, 1.0, 1.0, 0.0)]
    lone = WorkDistribution(np.array([-1.0, 2.0]), np.array([0.5, 0.5]), 1e-9)
    partner = WorkDistribution(np.array([1.0]), np.array([1.0]), 1e-9)
    assert crooks_report(lone, partner, 1.0, 1.0).support_mismatch


def test_total_and_reduced_partition_ratios_agree():
    m = spin(n_bath=3, g=0.7)
    total = math.exp(m.log_Z_total(2.0, 1.0) - m.log_Z_total(0.0, 1.0))
    assert math.isclose(total, zs_ratio(m, 2.0), rel_tol=1e-10)


def test_jarzynski_independent_of_coupling():
    vals = []
    for g in (0.0, 1.0):
        m = spin(n_bath=2, g=g)
        vals.append(jarzynski(strong_coupling_distribution(m, 2.0, 1024, 1.0), 1.0))
        assert math.isclose(vals[-1], zs_ratio(m, 2.0), rel_tol=1e-10)
    assert math.isclose(vals[0], vals[1], rel_tol=1e-5)


def test_naive_statistics_zero_coupling():
    r = naive_weak_statistics(spin(n_bath=2, g=0.0), 2.0, 512, 1.0, n_tpm_samples=4)
    assert r.delta_max_tpm <= 1e-8
    # the scalar reading compares exp(-beta <w>) with <exp(-beta w)>: a Jensen gap, not a coupling effect
    assert np.all(r.scalar <= r.zs_ratio + 1e-12)
    assert r.delta_max_scalar > 1e-3
    assert r.strong_rel_err <= 1e-10


def test_naive_deviation_grows_with_duration():
    m = spin(n_bath=2, lambda_z0=1.0, g=0.3)
    short = naive_weak_statistics(m, 0.2, 256, 1.0, n_tpm_samples=1)
    long = naive_weak_statistics(m, 2.0, 256, 1.0, n_tpm_samples=1)
    assert long.scalar_deviation[-1] > short.scalar_deviation[-1]
    assert long.tpm_deviation[-1] > short.tpm_deviation[-1]
    assert long.strong_rel_err <= 1e-10
