import math

import numpy as np
import pytest

from gaugeons import geometry as geo
from gaugeons import stochastic as sto
from gaugeons.losses import LossStream, offline_optimum


def quad(w_star, G):
    return LossStream("quadratic", len(w_star), G=G, w_star=np.asarray(w_star, dtype=float))


def test_tune_sco_branches():
    p = sto.tune_sco(2.0, 3.0, 4.0, 5, 1000, 0.0)
    assert p.eta == pytest.approx(1 / (10 * 2 * 3 * 4)) and p.nu == pytest.approx(20 * 2 * 3 * 4 * 5)
    assert (p.eta_branch, p.nu_branch) == ("kappa", "kappa")
    big = sto.tune_sco(1.0, 2.0, 1.0, 4, 1000, 1e3)
    L = math.log(1 + 1000 / 4)
    assert big.eta == pytest.approx(math.sqrt(2 * 4 * L / 1000) / (2 * 1e3))
    assert big.nu == pytest.approx(2 * 1e3 * math.sqrt(4 * 1000 / L))
    assert (big.eta_branch, big.nu_branch) == ("noise", "noise")
    mid = sto.tune_sco(1.0, 1.0, 1.0, 4, 10_000, 1.0)
    L = math.log(2501)
    assert mid.eta == pytest.approx(min(0.1, math.sqrt(8 * L / 1e4)))
    assert mid.nu == pytest.approx(max(80.0, math.sqrt(4e4 / L)))
    assert (mid.eta_branch, mid.nu_branch) == ("noise", "kappa")
    with pytest.raises(ValueError):
        sto.tune_sco(1, 1, 1, 1, 1, -1.0)


def test_noise_free_runs_are_deterministic():
    body = geo.symmetric_box([1.0, 2.0, 1.0])
    f = quad([0.3, 0.5, -0.2], 4.0)
    a, ta = sto.run_sco(body, f, 0.0, 1, 500)
    b, tb = sto.run_sco(body, f, 0.0, 7, 500)
    assert np.array_equal(a, b) and ta.loss_sum == tb.loss_sum


def test_interior_quadratic_envelope_and_jensen():
    body = geo.ball(1.0, 3)
    w_star = np.array([0.2, -0.1, 0.3])
    G = 1 + np.linalg.norm(w_star)
    for T in (500, 2000):
        w_hat, tr = sto.run_sco(body, quad(w_star, G), 0.0, 0, T)
        d, R, k = 3, 1.0, 1.0
        L = math.log(1 + T / d)
        gap = quad(w_star, G).value(w_hat)
        assert gap <= 74 * G * R * k * d * L / T
        assert quad(w_star, G).value(w_hat) <= tr.loss_sum / T + 1e-15
        assert geo.exact_gauge(body, w_hat) <= 1 + 1e-10
        assert tr.feasibility_violations == 0


def test_noisy_linear_envelope_mean():
    body = geo.ball(1.0, 3)
    T, sigma, d = 2000, 0.5, 3
    gbar = np.array([0.6, 0.0, 0.0])
    f = LossStream("linear_stochastic", d, G=0.6, gbar=gbar, sigma=sigma)
    best = offline_optimum(f, body)[0]
    gaps = [f.value(sto.run_sco(body, f, sigma, s, T)[0]) - best for s in range(20)]
    L = math.log(1 + T / d)
    env = 16 * sigma * math.sqrt(d * L / T) + 74 * 0.6 * d * L / T
    assert np.mean(gaps) <= env


def test_sco_trace_counts_noise_clips():
    body = geo.ball(1.0, 2)
    f = LossStream("linear_stochastic", 2, G=1.0, gbar=np.array([1.0, 0.0]), sigma=1.0)
    _, tr = sto.run_sco(body, f, 1.0, 3, 200)
    assert tr.params["sigma"] == 1.0 and tr.params["noise_clipped"] >= 0


def test_budget_formula():
    T, C = sto.budget(0.01, 1.0, 2.0, 3.0, 4)
    assert C == pytest.approx(100 * math.log(2 + 4 / 0.01))
    assert T == math.ceil(C * 1 * 2 * 3 * 4 / 0.01)
    T2, C2 = sto.budget(0.005, 1.0, 2.0, 3.0, 4)
    # T scales like log(1/eps)/eps
    assert T2 / T == pytest.approx(2 * C2 / C, rel=1e-6)


def test_solve_to_eps_loose_target():
    body = geo.ball(1.0, 2)
    f = quad([0.5, 0.0], 1.5)
    eps = f.value(np.zeros(2))
    w_hat = sto.solve_to_eps(body, f, eps, max_rounds=10 ** 6)
    assert f.value(w_hat) <= eps


def test_solve_to_eps_budget_exceeded():
    body = geo.anisotropic_box(3, 1.0, 10.0)
    f = LossStream("linear_stochastic", 3, G=1.0, gbar=np.array([1.0, 0.0, 0.0]))
    with pytest.raises(sto.BudgetExceeded) as info:
        sto.solve_to_eps(body, f, 0.01, max_rounds=300)
    err = info.value
    assert err.T_run == 300 and err.T_needed > 300
    assert geo.exact_gauge(body, err.partial) <= 1 + 1e-10


def test_gap_helper():
    body = geo.ball(1.0, 2)
    f = quad([2.0, 0.0], 3.0)
    g, tol = sto.gap(f, body, np.array([1.0, 0.0]))
    assert g == pytest.approx(0.0, abs=1e-12) and tol >= 0
    with pytest.raises(ValueError):
        sto.solve_to_eps(body, f, 0.0)
