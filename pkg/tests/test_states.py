import math

import numpy as np
import pytest

from spinpair.states import (
    DomainError,
    EnsembleSpec,
    Fixed,
    ParamDraw,
    QubitParams,
    UniformHalfOpen,
    inner,
    mean_mod_pair,
    mean_phasor,
    mean_square,
    norm_error,
    product_state,
    qubit_ket,
    sample_param_arrays,
    sample_params,
    sample_product_states,
    sin_delta_init_mean,
)


def test_qubit_ket_pure_plus():
    np.testing.assert_allclose(qubit_ket(QubitParams(1.0, 0.0, 0.0)), [1.0, 0.0])


def test_qubit_ket_pure_minus_with_phase():
    ket = qubit_ket(QubitParams(0.0, 0.0, math.pi / 2))
    np.testing.assert_allclose(ket, [0.0, 1j], atol=1e-15)


def test_qubit_ket_three_four_five():
    np.testing.assert_allclose(qubit_ket(QubitParams(0.6, 0.0, 0.0)), [0.6, 0.8])


def test_qubit_ket_rejects_bad_modulus():
    with pytest.raises(DomainError):
        QubitParams(1.2, 0.0, 0.0)
    with pytest.raises(DomainError):
        QubitParams(-0.1, 0.0, 0.0)


def test_product_state_trivial_corners():
    both_plus = ParamDraw(QubitParams(1.0), QubitParams(1.0))
    np.testing.assert_allclose(product_state(both_plus), [1, 0, 0, 0])
    plus_minus = ParamDraw(QubitParams(1.0), QubitParams(0.0))
    np.testing.assert_allclose(product_state(plus_minus), [0, 1, 0, 0])


def test_product_state_against_direct_multiplication():
    # oracle: multiply the per-qubit coefficients by hand
    d = ParamDraw(QubitParams(0.6, 0.0, 0.0), QubitParams(0.8, 0.0, 0.0))
    a1, b1 = 0.6, 0.8
    a2, b2 = 0.8, 0.6
    expected = [a1 * a2, a1 * b2, b1 * a2, b1 * b2]
    np.testing.assert_allclose(expected, [0.48, 0.36, 0.64, 0.48], atol=1e-15)
    np.testing.assert_allclose(product_state(d), expected, atol=1e-15)


def test_product_state_norm_over_random_draws():
    rng = np.random.default_rng(7)
    spec = EnsembleSpec(
        r1=UniformHalfOpen(0.0, 1.0),
        theta1=UniformHalfOpen(0.0, 2 * math.pi),
        phi1=UniformHalfOpen(0.0, 2 * math.pi),
        r2=UniformHalfOpen(0.0, 1.0),
        theta2=UniformHalfOpen(0.0, 2 * math.pi),
        phi2=UniformHalfOpen(0.0, 2 * math.pi),
    )
    states = sample_product_states(spec, 10_000, rng)
    norms = np.sum(np.abs(states) ** 2, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-10


def test_delta_init_combines_phases():
    d = ParamDraw(QubitParams(0.5, 0.2, 1.1), QubitParams(0.5, -0.3, 0.4))
    assert d.delta_init == pytest.approx((0.4 - (-0.3)) - (1.1 - 0.2))


def test_inner_products():
    assert inner([1, 0], [1, 0]) == 1
    assert inner([1, 0], [0, 1]) == 0
    assert inner([1, 0], [1j, 0]) == 1j
    with pytest.raises(DomainError):
        inner([1, 0], [1, 0, 0])


def test_inner_conjugate_symmetry():
    rng = np.random.default_rng(21)
    for _ in range(50):
        a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert inner(a, b) == pytest.approx(np.conj(inner(b, a)))
        assert inner(a, a).imag == pytest.approx(0.0)
        assert inner(a, a).real >= 0.0


def test_fixed_spec_returns_exact_values_any_seed():
    spec = EnsembleSpec(
        r1=Fixed(0.3),
        theta1=Fixed(0.1),
        phi1=Fixed(-0.4),
        r2=Fixed(0.9),
        theta2=Fixed(0.0),
        phi2=Fixed(2.0),
    )
    for seed in (0, 1, 12345):
        d = sample_params(spec, np.random.default_rng(seed))
        assert d.qubit1 == QubitParams(0.3, 0.1, -0.4)
        assert d.qubit2 == QubitParams(0.9, 0.0, 2.0)


def test_sampled_moments_match_analytic_values():
    # oracles: E{r^2} over U[0.1, 0.4) = (0.4^3 - 0.1^3) / (3 * 0.3) = 0.07,
    # E{sin phi} over U[0, pi) = 2/pi
    rng = np.random.default_rng(11)
    spec = EnsembleSpec(
        r1=UniformHalfOpen(0.1, 0.4),
        theta1=Fixed(0.0),
        phi1=Fixed(0.0),
        r2=Fixed(0.5),
        theta2=Fixed(0.0),
        phi2=UniformHalfOpen(0.0, math.pi),
    )
    r1, _, _, _, _, phi2 = sample_param_arrays(spec, 1_000_000, rng)
    assert np.mean(r1**2) == pytest.approx(0.07, abs=1e-3)
    assert np.mean(np.sin(phi2)) == pytest.approx(2.0 / math.pi, abs=2e-3)


def test_sampled_moments_within_five_standard_errors():
    rng = np.random.default_rng(13)
    dist = UniformHalfOpen(0.2, 0.8)
    n = 200_000
    draws = dist.sample(n, rng)
    for power, analytic in ((1, 0.5), (2, (0.8**3 - 0.2**3) / (3 * 0.6))):
        sample = draws**power
        se = np.std(sample) / math.sqrt(n)
        assert abs(np.mean(sample) - analytic) < 5 * se


def test_analytic_moment_helpers_against_quadrature():
    # oracle: dense midpoint quadrature over the interval
    dist = UniformHalfOpen(0.15, 0.85)
    xs = np.linspace(0.15, 0.85, 400_001)
    mid = (xs[:-1] + xs[1:]) / 2
    assert mean_square(dist) == pytest.approx(np.mean(mid**2), abs=1e-10)
    assert mean_mod_pair(dist) == pytest.approx(
        np.mean(mid * np.sqrt(1 - mid**2)), abs=1e-10
    )
    phasor = mean_phasor(UniformHalfOpen(-1.0, 2.5))
    angles = np.linspace(-1.0, 2.5, 400_001)
    mid = (angles[:-1] + angles[1:]) / 2
    assert phasor == pytest.approx(np.mean(np.exp(1j * mid)), abs=1e-10)


def test_sin_delta_init_mean_known_cases():
    base = dict(
        r1=Fixed(0.3),
        theta1=Fixed(0.0),
        r2=Fixed(0.7),
        theta2=Fixed(0.0),
    )
    full_circle = EnsembleSpec(
        phi1=UniformHalfOpen(0.0, 2 * math.pi),
        phi2=UniformHalfOpen(0.0, 2 * math.pi),
        **base,
    )
    assert sin_delta_init_mean(full_circle) == pytest.approx(0.0, abs=1e-15)
    half_circle = EnsembleSpec(
        phi1=Fixed(0.0), phi2=UniformHalfOpen(0.0, math.pi), **base
    )
    assert sin_delta_init_mean(half_circle) == pytest.approx(2.0 / math.pi)


def test_sin_delta_init_mean_against_sampling():
    rng = np.random.default_rng(3)
    spec = EnsembleSpec(
        r1=Fixed(0.5),
        theta1=UniformHalfOpen(0.0, 1.0),
        phi1=UniformHalfOpen(-0.5, 0.5),
        r2=Fixed(0.5),
        theta2=Fixed(0.2),
        phi2=UniformHalfOpen(0.0, 2.0),
    )
    _, t1, p1, _, t2, p2 = sample_param_arrays(spec, 500_000, rng)
    empirical = np.mean(np.sin((p2 - t2) - (p1 - t1)))
    assert sin_delta_init_mean(spec) == pytest.approx(empirical, abs=2e-3)


def test_uniform_rejects_empty_interval():
    with pytest.raises(DomainError):
        UniformHalfOpen(0.5, 0.5)


def test_modulus_support_must_stay_in_unit_interval():
    with pytest.raises(DomainError):
        EnsembleSpec(
            r1=UniformHalfOpen(0.5, 1.2),
            theta1=Fixed(0.0),
            phi1=Fixed(0.0),
            r2=Fixed(0.5),
            theta2=Fixed(0.0),
            phi2=Fixed(0.0),
        )


def test_norm_error_detects_drift():
    assert norm_error([1.0, 0.0]) == 0.0
    assert norm_error([1.0, 0.1]) == pytest.approx(0.01)
