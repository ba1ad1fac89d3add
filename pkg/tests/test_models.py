import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from coevo import models as M
from coevo.models import (AsymmetricBimodal, Fixed, Gaussian, Gompertz, HeavisideShift, Logistic,
                          SymmetricBimodal)

GROWTH = [Logistic(1.0), Logistic(2.5), Gompertz(1.0), Gompertz(0.3)]
ENVS = [Gaussian(), SymmetricBimodal(0.5), SymmetricBimodal(2.0), AsymmetricBimodal(4.0, 0.25),
        AsymmetricBimodal(1.5, 0.7)]


def test_h_examples():
    assert M.h(Logistic(1.0), 1.0) == 1.0
    assert M.h(Gompertz(1.0), 1.0) == 0.0
    assert M.h(Logistic(1.0), math.e) == pytest.approx(math.e - 1.0, rel=1e-15)
    assert M.h(Logistic(1.0), math.e) == pytest.approx(1.71828, abs=1e-5)


def test_h_prime_examples():
    for K in (0.5, 1.0, 3.0):
        assert M.h_prime(Logistic(K), K) == pytest.approx(0.0, abs=1e-15)
        assert M.h_prime(Gompertz(K), K) == 0.0
    assert M.h_prime(Logistic(2.0), 1.0) == -0.5


@pytest.mark.parametrize("fn", [M.h, M.h_prime, M.h_second])
@pytest.mark.parametrize("x", [0.0, -1.0])
def test_growth_domain_error(fn, x):
    with pytest.raises(ValueError):
        fn(Logistic(1.0), x)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        Logistic(0.0)
    with pytest.raises(ValueError):
        SymmetricBimodal(-1.0)
    with pytest.raises(ValueError):
        AsymmetricBimodal(4.0, 1.0)
    with pytest.raises(ValueError):
        AsymmetricBimodal(0.0, 0.5)


@pytest.mark.parametrize("model", GROWTH, ids=repr)
def test_growth_derivatives_match_finite_differences(model):
    xs = model.K * np.logspace(-4, 4, 81)
    step = 1e-6 * xs
    fd1 = (model.h(xs + step) - model.h(xs - step)) / (2 * step)
    exact1 = model.dh(xs)
    # relative to the size of the terms that make up h'
    scale = np.maximum(np.abs(exact1), 1.0 / xs)
    assert np.max(np.abs(fd1 - exact1) / scale) < 1e-6
    fd2 = (model.dh(xs + step) - model.dh(xs - step)) / (2 * step)
    scale2 = np.maximum(np.abs(model.d2h(xs)), 1.0 / xs**2)
    assert np.max(np.abs(fd2 - model.d2h(xs)) / scale2) < 1e-6


@pytest.mark.parametrize("model", GROWTH, ids=repr)
def test_growth_coercive_with_minimum_at_K(model):
    hK = model.h(model.K)
    assert model.h(1e-6) > hK and model.h(1e6) > hK
    xs = model.K * np.linspace(0.5, 1.5, 1001)
    assert xs[np.argmin(model.h(xs))] == pytest.approx(model.K)
    assert model.d2h(model.K) > 0


def test_gompertz_x_hprime_is_log_ratio():
    g = Gompertz(2.0)
    xs = np.array([0.1, 1.0, 2.0, 7.0])
    np.testing.assert_allclose(xs * g.dh(xs), np.log(xs / 2.0), rtol=1e-14)


@pytest.mark.parametrize("env", ENVS, ids=repr)
def test_environment_derivatives_match_finite_differences(env):
    ys = np.linspace(-3, 3, 121)
    s = 1e-5
    fd1 = (env.h(ys + s) - env.h(ys - s)) / (2 * s)
    fd2 = (env.dh(ys + s) - env.dh(ys - s)) / (2 * s)
    assert np.max(np.abs(fd1 - env.dh(ys)) / np.maximum(np.abs(env.dh(ys)), 1.0)) < 1e-6
    assert np.max(np.abs(fd2 - env.d2h(ys)) / np.maximum(np.abs(env.d2h(ys)), 1.0)) < 1e-6


def test_gaussian_environment():
    g = Gaussian()
    assert g.h(2.0) == 2.0 and g.dh(-0.3) == -0.3 and g.d2h(5.0) == 1.0


def test_symmetric_bimodal_critical_points():
    env = SymmetricBimodal(0.5)
    r = math.sqrt(0.5)
    for y in (-r, 0.0, r):
        assert env.dh(y) == pytest.approx(0.0, abs=1e-15)
    assert env.d2h(r) > 0 and env.d2h(-r) > 0 and env.d2h(0.0) < 0


def test_asymmetric_bimodal_critical_points():
    env = AsymmetricBimodal(4.0, 0.25)
    for y in (0.0, 0.25, 1.0):
        assert env.dh(y) == 0.0
    assert env.d2h(0.0) > 0 and env.d2h(1.0) > 0 and env.d2h(0.25) < 0


@pytest.mark.parametrize("env", ENVS[1:], ids=repr)
def test_bimodal_quartic_growth(env):
    assert env.h(50.0) > 1e5 and env.h(-50.0) > 1e5


def test_theta_population_examples():
    lg = Logistic(1.0)
    assert M.theta_population(lg, 1.0, 0.5) == -0.5
    assert M.theta_population(lg, 2.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        M.theta_population(lg, 0.0, 0.5)


def test_theta_env_examples():
    assert M.theta_env_general(Gaussian(), 0.0, 0.5, 1.0, 50.0) == 25.0
    assert M.theta_env_general(Gaussian(), 0.5, 0.25, 2.0, 50.0) == pytest.approx(0.25, abs=1e-15)


@given(y=st.floats(-5, 5), theta=st.floats(0.0, 2.0), lam=st.floats(0.01, 10), gamma=st.floats(0, 100))
def test_theta_env_reduces_to_gaussian_form(y, theta, lam, gamma):
    got = M.theta_env_general(Gaussian(), y, theta, lam, gamma)
    want = lam * theta * y - gamma * (y * y - theta)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_hermite_examples():
    assert M.hermite(0, 0.3, 0.7) == 1.0
    assert M.hermite(1, 0.7, 0.3) == 0.7
    assert M.hermite(2, 1.0, 0.25) == 0.75
    assert M.hermite(3, 1.0, 1.0) == -2.0


@pytest.mark.parametrize("n", range(0, 7))
def test_hermite_matches_rodrigues_formula(n):
    y, th = sp.symbols("y theta", positive=True)
    rod = sp.simplify(sp.exp(y**2 / (2 * th)) * (-th) ** n * sp.diff(sp.exp(-y**2 / (2 * th)), y, n))
    f = sp.lambdify((y, th), rod)
    for yv, tv in [(0.3, 0.7), (1.2, 0.25), (2.5, 1.0)]:
        assert M.hermite(n, yv, tv) == pytest.approx(float(f(yv, tv)), rel=1e-12, abs=1e-12)


def test_hermite_vectorised():
    ys = np.linspace(-2, 2, 5)
    np.testing.assert_allclose(M.hermite(4, ys, 0.5), ys**4 - 6 * 0.5 * ys**2 + 3 * 0.25)


def test_theta_rodrigues_examples():
    lg = Logistic(1.0)
    assert M.theta_rodrigues_population(lg, lambda x: x, lambda x: 1.0, 1.0, 0.2) == -0.2
    assert M.theta_rodrigues_population(lg, lambda x: x * x, lambda x: 2 * x, 1.0, 0.0) == 0.0


@given(x=st.floats(1e-3, 1e3), theta=st.floats(0, 2), K=st.floats(0.1, 10))
def test_rodrigues_with_identity_is_theta_population(x, theta, K):
    for model in (Logistic(K), Gompertz(K)):
        a = M.theta_rodrigues_population(model, lambda v: v, lambda v: 1.0, x, theta)
        assert a == M.theta_population(model, x, theta)


def test_invariant_density_log_examples():
    lg, g = Logistic(1.0), Gaussian()
    assert M.invariant_density_log(lg, g, 1.0, 0.0, 0.5) == -2.0
    assert M.invariant_density_log(lg, g, 1.0, 1.0, 1.0) == -1.5
    with pytest.raises(ValueError):
        M.invariant_density_log(lg, g, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        M.invariant_density_log(lg, g, -1.0, 0.0, 0.5)


@settings(max_examples=50)
@given(x1=st.floats(1e-3, 10), x2=st.floats(1e-3, 10), y=st.floats(-3, 3), theta=st.floats(0.01, 2))
def test_invariant_density_factorises(x1, x2, y, theta):
    for env in ENVS:
        lg = Logistic(1.0)
        d1 = M.invariant_density_log(lg, env, x1, y, theta) - M.invariant_density_log(lg, env, x1, 0.0, theta)
        d2 = M.invariant_density_log(lg, env, x2, y, theta) - M.invariant_density_log(lg, env, x2, 0.0, theta)
        assert d1 == pytest.approx(d2, rel=1e-9, abs=1e-9)


def test_effective_K_examples():
    assert M.effective_K(HeavisideShift(0.0), -0.5) == 1.0
    assert M.effective_K(HeavisideShift(0.0), 0.5) == 2.0
    assert M.effective_K(HeavisideShift(0.25), 0.25) == 2.0
    assert M.effective_K(Fixed(), 3.0, base_K=1.7) == 1.7


def test_effective_K_single_jump():
    rule = HeavisideShift(threshold=0.3, base=1.5, increment=0.75)
    ys = np.linspace(-2, 2, 4001)
    ks = M.effective_K(rule, ys)
    jumps = np.nonzero(np.diff(ks))[0]
    assert len(jumps) == 1
    assert ks[jumps[0] + 1] - ks[jumps[0]] == 0.75
    assert ys[jumps[0]] < 0.3 <= ys[jumps[0] + 1]
    assert set(np.unique(ks)) == {1.5, 2.25}


def test_integral_of_motion_examples():
    lg, g = Logistic(1.0), Gaussian()
    assert M.integral_of_motion(lg, g, 1.0, 0.0, 0.0) == 1.0
    assert M.integral_of_motion(lg, g, 1.0, 1.0, 0.0) == 1.5
    with pytest.raises(ValueError):
        M.integral_of_motion(lg, g, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("obj", GROWTH + ENVS + [Fixed(), HeavisideShift(0.25, 1.0, 2.0)], ids=repr)
def test_dict_round_trip(obj):
    assert M.from_dict(obj.to_dict()) == obj


def test_frozen():
    with pytest.raises(Exception):
        Logistic(1.0).K = 2.0
