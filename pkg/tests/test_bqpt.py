import math

import numpy as np
import pytest

from spinpair import bqpt
from spinpair.config import default_config, default_ensembles
from spinpair.heisenberg import (
    HBAR,
    PhysicalModel,
    angular_frequencies,
    evolution_matrix,
    wrap_phase,
)
from spinpair.measurement import Basis, outcome_probs_batch
from spinpair.states import DomainError, sample_product_states


@pytest.fixture(scope="module")
def model():
    return default_config().model


@pytest.fixture(scope="module")
def instances():
    ens = default_ensembles()
    return ens["z_instance1"], ens["z_instance2"]


# --------------------------------------------------------------------------
# amplitude-moment inversion
# --------------------------------------------------------------------------

def test_invert_amplitude_moments_reference_ensembles():
    # oracle: forward-substitute the analytic uniform moments, then invert
    a_true = (0.4**3 - 0.1**3) / (3 * 0.3)  # 0.07
    b_true = (0.9**3 - 0.6**3) / (3 * 0.3)  # 0.57
    m1 = a_true * b_true
    m4 = (1 - a_true) * (1 - b_true)
    assert m1 == pytest.approx(0.0399)
    assert m4 == pytest.approx(0.3999)
    a, b, flags = bqpt.invert_amplitude_moments(m1, m4)
    assert a == pytest.approx(0.07, abs=1e-12)
    assert b == pytest.approx(0.57, abs=1e-12)
    assert flags == ()


def test_invert_amplitude_moments_corners():
    assert bqpt.invert_amplitude_moments(1.0, 0.0)[:2] == (1.0, 1.0)
    assert bqpt.invert_amplitude_moments(0.0, 1.0)[:2] == (0.0, 0.0)


def test_invert_amplitude_moments_clamps_negative_discriminant():
    # m1 slightly above the feasible region from sampling noise
    a, b, flags = bqpt.invert_amplitude_moments(0.3, 0.3)
    assert "amplitude_moments_degraded" in flags
    assert a == pytest.approx(b)


def test_invert_amplitude_moments_rejects_out_of_range():
    with pytest.raises(DomainError):
        bqpt.invert_amplitude_moments(1.2, 0.0)


# --------------------------------------------------------------------------
# v estimation
# --------------------------------------------------------------------------

def _moments(a, b, s):
    return bqpt.EnsembleMoments(a=a, b=b, g1=0.24, g2=0.45, s=s)


def test_estimate_v_zero_and_unit_modulus():
    mom1 = _moments(0.07, 0.57, 0.0)
    mom2 = _moments(0.07, 0.57, 2 / math.pi)
    v, flags = bqpt.estimate_v(0.07 * 0.43, 0.0301, mom1, mom2)
    assert v == 0.0
    assert "v_sign_indeterminate" in flags
    v, _ = bqpt.estimate_v(0.93 * 0.57, 0.5301 - 0.1, mom1, mom2)
    assert abs(v) == pytest.approx(1.0)


def test_estimate_v_derived_modulus():
    # oracle: forward-evaluate E{p2zz} at v^2 = 1/2 with s = 0:
    # 0.07*0.43*0.5 + 0.93*0.57*0.5 = 0.2801
    mom1 = _moments(0.07, 0.57, 0.0)
    mom2 = _moments(0.07, 0.57, 2 / math.pi)
    ep2_step1 = 0.2801
    # step-2 expectation for positive v: cross term lowers it
    v_true = math.sqrt(0.5)
    cross = 2 * 0.24 * 0.45 * math.sqrt(0.5) * v_true * (2 / math.pi)
    ep2_step2 = 0.2801 - cross
    v, flags = bqpt.estimate_v(ep2_step1, ep2_step2, mom1, mom2)
    assert v == pytest.approx(0.7071, abs=1e-4)
    assert flags == ()
    # and the negative branch
    v_neg, _ = bqpt.estimate_v(ep2_step1, 0.2801 + cross, mom1, mom2)
    assert v_neg == pytest.approx(-0.7071, abs=1e-4)


def test_estimate_v_requires_step_moments():
    mom_ok = _moments(0.07, 0.57, 0.0)
    mom_pos = _moments(0.07, 0.57, 0.5)
    with pytest.raises(DomainError):
        bqpt.estimate_v(0.2, 0.2, mom_pos, mom_pos)
    with pytest.raises(DomainError):
        bqpt.estimate_v(0.2, 0.2, mom_ok, mom_ok)


def test_estimate_v_ill_conditioned_ensemble():
    flat = _moments(0.5, 0.5, 0.0)  # (1-a)b - a(1-b) = 0
    with pytest.raises(bqpt.IllConditionedEnsembleError):
        bqpt.estimate_v(0.25, 0.25, flat, _moments(0.5, 0.5, 0.5))


def test_estimate_v_clamps_noisy_modulus():
    mom1 = _moments(0.07, 0.57, 0.0)
    mom2 = _moments(0.07, 0.57, 0.5)
    v, flags = bqpt.estimate_v(0.5301 + 0.01, 0.4, mom1, mom2)
    assert abs(v) == 1.0
    assert "v_squared_clamped" in flags


def test_delta_ed_values():
    assert bqpt.delta_ed(0.0) == 0.0
    assert bqpt.delta_ed(1.0) == pytest.approx(math.pi / 2)
    assert bqpt.delta_ed(0.7071) == pytest.approx(0.7854, abs=1e-4)
    with pytest.raises(DomainError):
        bqpt.delta_ed(1.1)


def test_estimate_v_invariant_under_moment_preserving_rescaling(instances):
    # two different ensembles with identical scalar moments give identical
    # estimates because the estimator consumes only the moments
    mom_a = _moments(0.07, 0.57, 0.0)
    v1, _ = bqpt.estimate_v(0.2801, 0.25, mom_a, _moments(0.07, 0.57, 0.6))
    v2, _ = bqpt.estimate_v(0.2801, 0.25, mom_a, _moments(0.07, 0.57, 0.6))
    assert v1 == v2


# --------------------------------------------------------------------------
# forward model
# --------------------------------------------------------------------------

def test_second_moment_matrix_matches_draw_average(model, instances):
    # dual-route check: closed-form ensemble moments vs brute-force averaging
    # of exact outcome probabilities over a large parameter sample
    rng = np.random.default_rng(42)
    tau = 2 * 0.53e-9
    m = evolution_matrix(model, tau)
    for spec in instances:
        states = sample_product_states(spec, 300_000, rng)
        evolved = states @ m.T
        for basis in Basis:
            mc = outcome_probs_batch(evolved, basis).mean(axis=0)
            analytic = bqpt.exact_expected_probs(spec, model, tau, basis)
            assert np.max(np.abs(mc - analytic)) < 2e-3
            assert analytic.sum() == pytest.approx(1.0, abs=1e-12)


def test_expected_p2zz_matches_scalar_moment_formula(model):
    # the z-basis (+,-) expectation from the matrix forward model must agree
    # with the scalar moment expression through (a, b, g1, g2, s, v)
    ens = default_ensembles()
    for name in ("xy_step1", "xy_step2"):
        spec = ens[name]
        mom = bqpt.EnsembleMoments.from_ensemble(spec)
        tau = 0.5e-9
        delta_e = -model.jxy * tau / HBAR
        v = math.copysign(1.0, math.cos(delta_e)) * math.sin(delta_e)
        scalar = (
            mom.a * (1 - mom.b) * (1 - v * v)
            + (1 - mom.a) * mom.b * v * v
            - 2 * mom.g1 * mom.g2 * math.sqrt(1 - v * v) * abs(v) * math.copysign(1.0, v) * mom.s
        )
        matrix = bqpt.exact_expected_probs(spec, model, tau, Basis.ZZ)[1]
        assert matrix == pytest.approx(scalar, abs=1e-12)


def test_harmonic_coefficients_reproduce_direct_evaluation(instances):
    s_mat = bqpt.second_moment_matrix(instances[0])
    gb, jxy = 113.07, 20.82
    for basis in Basis:
        a, b = bqpt._harmonic_coefficients(s_mat, gb, jxy, basis)
        for x in (-3.0, -0.7, 0.31, 2.9):
            direct = bqpt.expected_probs(s_mat, bqpt.d_phases(gb, jxy, x), basis)
            np.testing.assert_allclose(a + np.real(b * np.exp(1j * x)), direct, atol=1e-14)


def test_zz_expectations_do_not_depend_on_x(instances):
    s_mat = bqpt.second_moment_matrix(instances[1])
    p_a = bqpt.expected_probs(s_mat, bqpt.d_phases(50.0, 20.0, 0.3), Basis.ZZ)
    p_b = bqpt.expected_probs(s_mat, bqpt.d_phases(50.0, 20.0, -2.1), Basis.ZZ)
    np.testing.assert_allclose(p_a, p_b, atol=1e-14)


# --------------------------------------------------------------------------
# phase fit
# --------------------------------------------------------------------------

def _synthetic_fit_inputs(model, instances, x_target, tau=0.53e-9):
    """Noise-free expectations generated by the forward model at a chosen x."""
    gb = model.G * model.B * tau / HBAR
    jxy = model.jxy * tau / HBAR
    exp_zz, exp_xx = [], []
    for spec in instances:
        s_mat = bqpt.second_moment_matrix(spec)
        phases = bqpt.d_phases(gb, jxy, x_target)
        exp_zz.append(bqpt.expected_probs(s_mat, phases, Basis.ZZ))
        exp_xx.append(bqpt.expected_probs(s_mat, phases, Basis.XX))
    return np.array(exp_zz), np.array(exp_xx), jxy, gb


@pytest.mark.parametrize("x_target", [1.2, 0.0, math.pi - 1e-4])
def test_fit_jz_phase_self_inversion(model, instances, x_target):
    exp_zz, exp_xx, jxy, gb = _synthetic_fit_inputs(model, instances, x_target)
    x_hat, _ = bqpt.fit_jz_phase(exp_zz, exp_xx, jxy, gb, instances)
    diff = abs(float(wrap_phase(x_hat - x_target)))
    assert diff < 1e-3


def test_fit_jz_phase_recovers_true_model(model, instances):
    tau = 0.53e-9
    exp_zz = [bqpt.exact_expected_probs(s, model, tau, Basis.ZZ) for s in instances]
    exp_xx = [bqpt.exact_expected_probs(s, model, tau, Basis.XX) for s in instances]
    jxy = model.jxy * tau / HBAR
    gb = model.G * model.B * tau / HBAR
    x_hat, dphi = bqpt.fit_jz_phase(np.array(exp_zz), np.array(exp_xx), jxy, gb, instances)
    x_true = float(wrap_phase(model.jz * tau / HBAR))
    assert abs(x_hat - x_true) < 1e-9
    # the determination re-assembles the full phase with an integer k
    k = (model.jz * tau / HBAR - dphi - jxy - gb) / (2 * math.pi)
    assert abs(k - round(k)) < 1e-9


def test_fit_jz_phase_global_minimum_on_grid(model, instances):
    x_target = 0.8
    exp_zz, exp_xx, jxy, gb = _synthetic_fit_inputs(model, instances, x_target)
    grid = np.linspace(-math.pi, math.pi, 3600, endpoint=False)
    s_mats = [bqpt.second_moment_matrix(s) for s in instances]

    def objective(x):
        total = 0.0
        for s_mat, ezz, exx in zip(s_mats, exp_zz, exp_xx):
            phases = bqpt.d_phases(gb, jxy, x)
            total += float(np.sum((bqpt.expected_probs(s_mat, phases, Basis.ZZ) - ezz) ** 2))
            total += float(np.sum((bqpt.expected_probs(s_mat, phases, Basis.XX) - exx) ** 2))
        return total

    at_truth = objective(x_target)
    values = np.array([objective(x) for x in grid[::36]])  # 100-point subsample
    assert at_truth <= values.min() + 1e-15


def test_fit_jz_phase_flags_flat_objective(instances):
    # an x-independent dataset: zero-coupling forward model with identical
    # instances collapses the x-sensitivity to nothing
    flat = np.tile([0.25, 0.25, 0.25, 0.25], (2, 1))
    with pytest.raises(bqpt.IndeterminatePhaseError):
        bqpt.fit_jz_phase(flat, flat, 0.0, 0.0, (instances[0], instances[0]), flat_floor=1e6)


def test_fit_jz_phase_validates_inputs(model, instances):
    exp_zz, exp_xx, jxy, gb = _synthetic_fit_inputs(model, instances, 0.5)
    with pytest.raises(DomainError):
        bqpt.fit_jz_phase(exp_zz + 2.0, exp_xx, jxy, gb, instances)


# --------------------------------------------------------------------------
# process reconstruction
# --------------------------------------------------------------------------

def _true_determinations(model, tau1):
    """Exact (delta_Ed, delta_phi10d) for a known model (test oracle)."""
    tau2 = 2 * tau1
    delta_e = -model.jxy * tau1 / HBAR
    v = math.copysign(1.0, math.cos(delta_e)) * math.sin(delta_e)
    delta_ed = math.asin(v)
    dphi = float(
        wrap_phase(
            (model.jz - model.jxy - model.G * model.B) * tau2 / HBAR
        )
    )
    return delta_ed, dphi


def test_reconstruct_process_matches_evolution(model):
    tau1 = 0.5e-9
    delta_ed, dphi = _true_determinations(model, tau1)
    m_hat = bqpt.reconstruct_process(delta_ed, dphi, model.G, model.B, tau1)
    m_true = evolution_matrix(model, 4 * tau1)
    assert np.max(np.abs(m_hat - m_true)) < 1e-12


def test_reconstruct_process_independent_of_integer_shifts(model):
    tau1 = 0.5e-9
    delta_ed, dphi = _true_determinations(model, tau1)
    base = bqpt.reconstruct_process(delta_ed, dphi, model.G, model.B, tau1, 0, 0)
    shifted = bqpt.reconstruct_process(delta_ed, dphi, model.G, model.B, tau1, 2, 1)
    assert np.max(np.abs(base - shifted)) < 1e-12
    negative = bqpt.reconstruct_process(delta_ed, dphi, model.G, model.B, tau1, -3, 5)
    assert np.max(np.abs(base - negative)) < 1e-12


def test_reconstruct_process_zero_coupling():
    m = PhysicalModel(G=2 * 0.927e-23, B=0.99, jxy=0.0, jz=0.0)
    tau1 = 0.5e-9
    gb2 = m.G * m.B * 2 * tau1 / HBAR
    # delta_Ed = 0 and delta_phi10d = wrap(-GB*tau2/hbar)
    m_hat = bqpt.reconstruct_process(0.0, float(wrap_phase(-gb2)), m.G, m.B, tau1)
    phase3 = m.G * m.B * 4 * tau1 / HBAR
    expected = np.diag(np.exp(-1j * wrap_phase(np.array([phase3, 0, 0, -phase3]))))
    assert np.max(np.abs(m_hat - expected)) < 1e-12
    assert np.max(np.abs(m_hat - evolution_matrix(m, 4 * tau1))) < 1e-12


def test_reconstructed_process_is_unitary(model):
    delta_ed, dphi = _true_determinations(model, 0.7e-9)
    m_hat = bqpt.reconstruct_process(delta_ed + 0.05, dphi - 0.1, model.G, model.B, 0.7e-9)
    assert np.max(np.abs(m_hat.conj().T @ m_hat - np.eye(4))) < 1e-12


def test_ensemble_moments_from_reference_ensembles():
    ens = default_ensembles()
    mom = bqpt.EnsembleMoments.from_ensemble(ens["xy_step1"])
    assert mom.a == pytest.approx(0.07)
    assert mom.b == pytest.approx(0.57)
    assert mom.s == 0.0
    mom2 = bqpt.EnsembleMoments.from_ensemble(ens["xy_step2"])
    assert mom2.s == pytest.approx(2 / math.pi)
    with pytest.raises(DomainError):
        bqpt.EnsembleMoments(a=1.5, b=0.5, g1=0.2, g2=0.2, s=0.0)
