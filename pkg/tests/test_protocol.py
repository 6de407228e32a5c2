import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uncollapse.core import KET0, KET1, make_pure, random_pure_states, state_fidelity
from uncollapse.errors import DomainError, ImpossibleSelectionError, InfeasibleMatchingError
from uncollapse.protocol import (
    OutcomeDecomposition,
    ProtocolParams,
    final_density_matrix,
    matched_pu,
    run_general,
    run_ideal,
    run_via_channels,
)

unit = st.floats(0.0, 1.0)


def plus():
    return make_pure(1, 1)


def random_params(rng):
    return ProtocolParams(*rng.random(7))


# params

def test_params_domain():
    with pytest.raises(DomainError):
        ProtocolParams(p=1.2)


def test_params_from_rates():
    params = ProtocolParams.from_rates(0.2, 0.3, gamma=2.0, taus=(0.1, 0.5, 0.0, 0.2), gamma_phi=1.0)
    assert params.kappa2 == pytest.approx(math.exp(-1.0))
    assert params.kappa3 == 1.0
    assert params.kappa_phi == pytest.approx(math.exp(-0.8))


# matched p_u

def test_matched_pu_storage_only():
    kappa = 0.3
    params = ProtocolParams.ideal(0.25, 0.0, kappa)
    assert matched_pu(params) == pytest.approx(1 - kappa * (1 - 0.25), abs=1e-15)


def test_matched_pu_no_relaxation_is_equal():
    assert matched_pu(ProtocolParams(p=0.4)) == pytest.approx(0.4, abs=1e-15)


def test_matched_pu_infeasible():
    with pytest.raises(InfeasibleMatchingError):
        matched_pu(ProtocolParams(p=0.0, kappa3=0.5, kappa4=0.5))


def test_matched_pu_undefined():
    with pytest.raises(InfeasibleMatchingError):
        matched_pu(ProtocolParams(p=0.5, kappa3=0.0))


# ideal run

@given(unit)
def test_ideal_without_relaxation_is_pure_uncollapsing(p):
    psi = make_pure(0.6, 0.8j)
    d = run_ideal(psi, p, p, 1.0)
    assert d.P_nj == pytest.approx(1 - p, abs=1e-15)
    assert d.P_to_ground == 0.0
    if 1 - p > 1e-12:
        state = final_density_matrix(d).rho_f
        assert state.allclose(psi.projector(), atol=1e-12)


@given(unit, unit, unit)
def test_ideal_ground_state_is_immune(p, p_u, kappa2):
    d = run_ideal(KET0, p, p_u, kappa2)
    assert d.P_f == pytest.approx(1 - p_u, abs=1e-15)
    if d.P_f > 1e-12:
        assert state_fidelity(final_density_matrix(d).rho_f, KET0) == pytest.approx(1.0, abs=1e-12)


def test_ideal_worked_example():
    params = ProtocolParams.ideal(0.5, 0.0, 0.3)
    p_u = matched_pu(params)
    assert p_u == pytest.approx(0.85, abs=1e-15)
    d = run_ideal(plus(), 0.5, p_u, 0.3)
    assert d.P_nj == pytest.approx(0.15, abs=1e-15)
    assert d.P_to_ground == pytest.approx(0.5 * 0.25 * 0.3 * 0.7, abs=1e-15)
    assert d.P_to_excited == 0.0

    result = final_density_matrix(d)
    assert result.P_f == pytest.approx(0.17625, abs=1e-15)
    expected = (0.15 * plus().projector().matrix + 0.02625 * np.diag([1, 0])) / 0.17625
    assert np.allclose(result.rho_f.matrix, expected, atol=1e-14, rtol=0)
    assert state_fidelity(result.rho_f, plus()) == pytest.approx(1 - 0.5 * 0.02625 / 0.17625, abs=1e-14)


@settings(max_examples=300)
@given(unit, unit, unit, unit)
def test_general_reduces_to_ideal(theta, p, p_u, kappa2):
    psi = make_pure(math.cos(theta), math.sin(theta) * 1j)
    ideal = run_ideal(psi, p, p_u, kappa2)
    general = run_general(psi, ProtocolParams.ideal(p, p_u, kappa2))
    for field in ("nj_amp0", "nj_amp1", "P_nj", "P_to_ground", "P_to_excited"):
        assert getattr(general, field) == pytest.approx(getattr(ideal, field), abs=1e-14)


def test_exact_restoration_ideal():
    rng = np.random.default_rng(11)
    for psi in random_pure_states(rng, 200):
        p, kappa2 = rng.random() * 0.999, 0.001 + 0.999 * rng.random()
        p_u = matched_pu(ProtocolParams.ideal(p, 0.0, kappa2))
        d = run_general(psi, ProtocolParams.ideal(p, p_u, kappa2))
        overlap = abs(np.vdot(psi.vector, [d.nj_amp0, d.nj_amp1])) ** 2 / d.P_nj
        assert overlap == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kappa2", [0.1, 0.3, 0.9])
def test_scaling_law(kappa2):
    psi = make_pure(0.3, 0.9)
    good, bad = [], []
    for p in (0.0, 0.5, 0.9):
        params = ProtocolParams.ideal(p, 0.0, kappa2)
        d = run_general(psi, params.with_pu(matched_pu(params)))
        good.append(d.P_nj / (1 - p))
        bad.append(d.P_to_ground / (1 - p) ** 2)
    assert max(good) - min(good) <= 1e-12
    assert max(bad) - min(bad) <= 1e-12


def test_convergence_as_p_to_one():
    rng = np.random.default_rng(3)
    for psi in random_pure_states(rng, 20):
        fids = []
        for p in (0.9, 0.99, 0.999, 0.9999):
            params = ProtocolParams.ideal(p, 0.0, 0.3)
            rho = final_density_matrix(run_general(psi, params.with_pu(matched_pu(params)))).rho_f
            fids.append(state_fidelity(rho, psi))
        assert all(b >= a - 1e-15 for a, b in zip(fids, fids[1:]))
        assert fids[-1] > 1 - 1e-4


def test_general_certain_decay():
    d = run_general(KET1, ProtocolParams(p=0.0, p_u=0.5, kappa2=0.0))
    assert d.P_nj == 0.0
    assert d.P_to_ground + d.P_to_excited == pytest.approx(0.5)
    with pytest.raises(InfeasibleMatchingError):
        matched_pu(ProtocolParams(p=0.0, kappa2=0.0, kappa3=0.0))


def test_degenerate_selection_is_an_error():
    params = ProtocolParams(p=0.0, p_u=1.0, kappa2=0.0)
    with pytest.raises(ImpossibleSelectionError):
        final_density_matrix(run_general(KET1, params))
    with pytest.raises(ImpossibleSelectionError):
        run_via_channels(KET1, params)


def test_general_branch_bookkeeping():
    params = ProtocolParams(p=0.5, kappa1=0.9, kappa2=0.3, kappa3=0.9, kappa4=0.9, kappa_phi=0.95)
    params = params.with_pu(matched_pu(params))
    d = run_general(plus(), params)
    assert d.P_nj == pytest.approx(abs(d.nj_amp0) ** 2 + abs(d.nj_amp1) ** 2, abs=1e-12)
    # k3 k4 (1 - p_u) = k1 k2 (1 - p) = 0.135; J = 0.1 + 0.9 * 0.5 * 0.7; D = 0.1 + 0.9 * 0.135 / 0.81 * 0.1
    J = 0.1 + 0.9 * 0.5 * 0.7
    late = 0.9 * 0.3 * 0.5
    D = 0.1 + 0.9 * (late / 0.81) * 0.1
    assert d.P_nj == pytest.approx(late, abs=1e-14)
    assert d.P_to_ground == pytest.approx(0.5 * J * late, abs=1e-14)
    assert d.P_to_excited == pytest.approx(0.5 * D + 0.5 * J * D, abs=1e-14)
    assert d.dephasing_factor == 0.95


# final density matrix

def test_final_only_coherent_branch():
    d = OutcomeDecomposition(0.3, 0.4j, 0.25, 0.0, 0.0)
    rho = final_density_matrix(d).rho_f
    assert rho.allclose(make_pure(0.3, 0.4j).projector(), atol=1e-15)


def test_final_coincident_branches():
    d = OutcomeDecomposition(math.sqrt(0.2), 0.0, 0.2, 0.2, 0.0)
    assert final_density_matrix(d).rho_f.allclose(KET0.projector())


def test_final_zero_weight():
    with pytest.raises(ImpossibleSelectionError):
        final_density_matrix(OutcomeDecomposition(0j, 0j, 0.0, 0.0, 0.0))


# channel route

def test_channels_identity():
    psi = make_pure(0.6, 0.8j)
    result = run_via_channels(psi, ProtocolParams())
    assert result.P_f == pytest.approx(1.0, abs=1e-15)
    assert result.rho_f.allclose(psi.projector())


@given(unit, unit, unit, unit)
def test_channels_ground_state_bookkeeping(p, p_u, k3, k4):
    params = ProtocolParams(p=p, p_u=p_u, kappa2=0.3, kappa3=k3, kappa4=k4)
    expected = k3 * (1 - p_u) * k4 + (1 - k3) + k3 * (1 - p_u) * (1 - k4)
    if expected <= 1e-12:
        return
    result = run_via_channels(KET0, params)
    assert result.P_f == pytest.approx(expected, abs=1e-12)
    closed = final_density_matrix(run_general(KET0, params))
    assert state_fidelity(result.rho_f, KET0) == pytest.approx(state_fidelity(closed.rho_f, KET0), abs=1e-12)


def test_channels_match_closed_form_random():
    rng = np.random.default_rng(2024)
    for psi in random_pure_states(rng, 1000):
        params = random_params(rng)
        closed = final_density_matrix(run_general(psi, params))
        channels = run_via_channels(psi, params)
        assert np.max(np.abs(closed.rho_f.matrix - channels.rho_f.matrix)) <= 1e-12
        assert abs(closed.P_f - channels.P_f) <= 1e-12
        assert channels.P_f + channels.P_rejected == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= channels.P_f <= 1.0 + 1e-12
