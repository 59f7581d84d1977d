import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from mzmem.integrators import (
    DivergenceError,
    StepCounter,
    StepperConfig,
    dealiased_convolution,
    etdrk4_coefficients,
    etdrk4_step,
    integrate,
    n_steps_for,
    padded_length,
    rk4_step,
    to_physical,
    to_spectral,
)
from mzmem.models import Burgers, KuramotoSivashinsky, initial_condition, make_system
from oracles import random_spectrum, signed_convolution


def test_rk4_decay_one_step():
    y = rk4_step(lambda y: -y, np.array([1.0]), 0.1)
    assert y[0] == pytest.approx(0.90483750, abs=1e-8)
    # RK4 reproduces the degree-4 Taylor polynomial of exp(-h) for linear problems
    h = 0.1
    assert y[0] == pytest.approx(1 - h + h**2 / 2 - h**3 / 6 + h**4 / 24, rel=1e-15)


def test_rk4_known_k1_gives_same_step_and_fewer_evals():
    f = lambda y: np.sin(y) - y**2  # noqa: E731
    y0 = np.array([0.3, -1.2])
    c1, c2 = StepCounter(), StepCounter()
    a = rk4_step(f, y0, 0.05, c1)
    b = rk4_step(f, y0, 0.05, c2, k1=f(y0))
    assert np.array_equal(a, b)
    assert (c1.rhs_evals, c2.rhs_evals) == (4, 3)


def test_rk4_batched_equals_individual():
    f = lambda y: -y * np.abs(y)  # noqa: E731
    stack = np.array([[1.0, 2.0], [0.5, -3.0], [0.0, 0.1]])
    batched = rk4_step(f, stack, 0.01)
    for row, out in zip(stack, batched):
        assert np.array_equal(rk4_step(f, row, 0.01), out)


def test_rk4_global_order_four():
    errs = []
    for dt in (0.1, 0.05):
        y = np.array([1.0])
        for _ in range(int(round(1 / dt))):
            y = rk4_step(lambda v: -v, y, dt)
        errs.append(abs(y[0] - np.exp(-1)))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.1)


@pytest.mark.parametrize("dt", [1e-4, 1e-2, 0.5])
def test_etdrk4_exact_on_diagonal_linear(dt):
    lam = np.array([-1e5, -300.0, -1.0, -1e-9, 0.0, 1e-9, 0.7, 12.0])
    u0 = np.linspace(-1, 1, len(lam))
    out = etdrk4_step(lam, lambda u: np.zeros_like(u), u0, dt)
    assert np.allclose(out, np.exp(lam * dt) * u0, rtol=1e-13, atol=0)


def test_etdrk4_constant_forcing_is_exact():
    lam = np.array([-50.0, -1.0, 1e-12, 2.0])
    c = np.array([1.0, -2.0, 0.5, 3.0])
    u0 = np.array([0.1, 0.2, 0.3, 0.4])
    dt = 0.1
    out = etdrk4_step(lam, lambda u: c + 0 * u, u0, dt)
    phi1 = np.where(np.abs(lam) > 1e-8, np.expm1(lam * dt) / np.where(lam == 0, 1, lam), dt)
    assert np.allclose(out, np.exp(lam * dt) * u0 + phi1 * c, rtol=1e-12)


def test_etdrk4_coefficients_real_and_limit():
    e, e2, q, f1, f2, f3 = etdrk4_coefficients(np.array([0.0, -1.0]), 0.2)
    for c in (e, e2, q, f1, f2, f3):
        assert not np.iscomplexobj(c)
    # lambda -> 0 limits: Q = dt/2 and f1 = f2 = f3 = dt/6 (Simpson weights)
    assert q[0] == pytest.approx(0.1, rel=1e-13)
    assert f1[0] == pytest.approx(0.2 / 6, rel=1e-13)
    assert f2[0] == pytest.approx(0.2 / 6, rel=1e-13)
    assert f3[0] == pytest.approx(0.2 / 6, rel=1e-13)


def test_etdrk4_nonstiff_order_four():
    # u' = -u + u^2 treated as L = -1, N = u^2; exact solution u = 1 / (1 + (1/u0 - 1) e^t)
    u0 = 0.5
    exact = 1.0 / (1.0 + (1.0 / u0 - 1.0) * np.exp(1.0))
    errs = []
    for n in (10, 20, 40):
        u = np.array([u0])
        for _ in range(n):
            u = etdrk4_step(np.array([-1.0]), lambda v: v * v, u, 1.0 / n)
        errs.append(abs(u[0] - exact))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 3.8)


def test_padded_lengths():
    assert [padded_length(n) for n in (8, 16, 32, 128, 256, 1024)] == [25, 50, 100, 400, 800, 3125]
    for n in range(1, 200):
        assert padded_length(n) >= 3 * n + 1


@pytest.mark.parametrize("n", [8, 16, 32])
def test_dealiased_convolution_matches_direct_sum(n):
    rng = np.random.default_rng(n)
    worst = 0.0
    for _ in range(100):
        u = random_spectrum(rng, n, decay=0.0)
        v = random_spectrum(rng, n, decay=0.0)
        ref = signed_convolution(u, v)
        worst = max(worst, np.linalg.norm(dealiased_convolution(u, v) - ref) / np.linalg.norm(ref))
    assert worst <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_convolution_bilinear_and_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    u, v, w = (random_spectrum(rng, n) for _ in range(3))
    a, b = rng.standard_normal(2)
    lhs = dealiased_convolution(a * u + b * w, v)
    rhs = a * dealiased_convolution(u, v) + b * dealiased_convolution(w, v)
    scale = 1 + np.abs(lhs).max()
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale
    assert np.abs(dealiased_convolution(u, v) - dealiased_convolution(v, u)).max() <= 1e-12 * scale


def test_physical_roundtrip():
    u = random_spectrum(np.random.default_rng(0), 20)
    f = to_physical(u)
    assert f.shape == (padded_length(20),)
    assert np.allclose(to_spectral(f, 20), u, atol=1e-15)


def test_n_steps_for():
    assert n_steps_for(16.0, 0.01) == 1600
    assert n_steps_for(30.0, 0.015) == 2000
    with pytest.raises(ValueError):
        n_steps_for(1.0, 0.3)


def test_linear_integration_against_matrix_exponential():
    s = make_system("linear")
    traj = integrate(s, [1.0, 0.0], 16.0, StepperConfig(0.01))
    exact = np.array([scipy.linalg.expm(s.A * t) @ [1.0, 0.0] for t in traj.times[::100]])
    err = np.abs(traj.states[::100] - exact) / np.abs(exact).max(axis=1, keepdims=True)
    assert err.max() < 1e-6
    assert traj.counter.rhs_evals == 4 * 1600
    assert traj.counter.steps == 1600


def test_inviscid_burgers_energy_drift_high_order():
    s = Burgers(n_modes=16, n_resolved=8, nu=0.0)
    u0 = initial_condition(s, 1)
    e0 = np.sum(np.abs(u0) ** 2)
    drift = []
    for dt in (0.02, 0.01):
        u = integrate(s, u0, 0.4, StepperConfig(dt)).states[-1]
        drift.append(abs(np.sum(np.abs(u) ** 2) - e0) / e0)
    assert drift[1] < 1e-6
    assert drift[0] / drift[1] > 2**4 * 0.8


def test_integrate_records_rhs():
    s = make_system("brusselator", params={"A": 1.0, "B": 3.0})
    traj = integrate(s, [1.0, 0.0], 0.1, StepperConfig(0.01), record_rhs=True)
    assert np.allclose(traj.rhs, s.rhs(traj.states))
    assert traj.counter.aux_evals == 1


def test_integrate_flags_divergence():
    s = make_system("brusselator", params={"A": 1.0, "B": 3.0})
    with pytest.raises(DivergenceError) as info, np.errstate(all="ignore"):
        integrate(s, [1e3, 1e3], 5.0, StepperConfig(0.1))
    assert info.value.step >= 1


def test_etdrk4_integration_matches_rk4_on_mild_problem():
    s = KuramotoSivashinsky(n_modes=16, n_resolved=8, nu=0.05)
    u0 = initial_condition(s, 2)
    a = integrate(s, u0, 0.05, StepperConfig(1e-4, "etdrk4")).states[-1]
    b = integrate(s, u0, 0.05, StepperConfig(1e-4, "rk4")).states[-1]
    assert np.abs(a - b).max() < 1e-9 * np.abs(b).max()


def test_stepper_config_validation():
    with pytest.raises(ValueError):
        StepperConfig(0.0)
    with pytest.raises(ValueError):
        StepperConfig(0.1, "euler")
