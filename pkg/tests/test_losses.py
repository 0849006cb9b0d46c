import itertools

import numpy as np
import pytest
from scipy import stats

from gaugeons import geometry as geo
from gaugeons import losses


def emit(stream, T, w=None):
    w = np.zeros(stream.d) if w is None else w
    s = stream.clone()
    return np.array([s.next_subgradient(w, t) for t in range(1, T + 1)])


@pytest.mark.parametrize("schedule", losses.SCHEDULES)
def test_same_seed_same_stream(schedule):
    s = losses.LossStream("linear_adversarial", 5, G=2.0, seed=42, schedule=schedule)
    a, b = emit(s, 300), emit(s, 300)
    assert np.array_equal(a, b)
    assert np.all(np.linalg.norm(a, axis=1) <= s.G + 1e-12)
    if schedule in ("rademacher", "killer_kappa"):
        assert not np.array_equal(a, emit(s.clone(seed_offset=1), 300))


def test_quadratic_at_minimizer_is_zero():
    w_star = np.array([0.2, -0.1, 0.3])
    s = losses.LossStream("quadratic", 3, G=5.0, w_star=w_star)
    assert not s.next_subgradient(w_star, 1).any()
    assert s.value(w_star) == 0.0


def test_alternation_ignores_iterate():
    s = losses.LossStream("linear_adversarial", 3, schedule="sign_alternation",
                          direction=np.eye(3)[0])
    rng = np.random.default_rng(0)
    s1, s2 = s.clone(), s.clone()
    for t in range(1, 20):
        g1 = s1.next_subgradient(rng.normal(size=3), t)
        g2 = s2.next_subgradient(np.zeros(3), t)
        assert np.array_equal(g1, g2)
        assert np.array_equal(np.abs(g1), [1.0, 0, 0])


def test_rounds_must_increase():
    s = losses.LossStream("linear_adversarial", 2)
    s.next_subgradient(np.zeros(2), 3)
    with pytest.raises(ValueError):
        s.next_subgradient(np.zeros(2), 3)


def test_stochastic_mean():
    gbar = np.array([0.5, 0.0, 0.0])
    s = losses.LossStream("linear_stochastic", 3, G=10.0, seed=1, gbar=gbar, sigma=0.1)
    g = emit(s, 10_000)
    assert np.all(np.abs(g.mean(axis=0) - gbar) <= 3 * 0.1 / 100)


def test_norm_clip_counts():
    s = losses.LossStream("quadratic", 2, G=1.0, w_star=np.zeros(2))
    g = s.next_subgradient(np.array([3.0, 4.0]), 1)
    assert np.allclose(g, [0.6, 0.8]) and s.clipped == 1


def test_killer_kappa_shape():
    s = losses.LossStream("linear_adversarial", 6, seed=2, schedule="killer_kappa",
                          thin_axis=2, thin_weight=0.9)
    g = emit(s, 50)
    assert np.allclose(g[:, 2], 0.9 * np.where(np.arange(1, 51) % 2, 1, -1))
    assert np.allclose(np.linalg.norm(g, axis=1), 1.0)


def test_offline_optimum_examples():
    gsum = np.array([3.0, -4.0])
    val, pt, tol = losses.offline_optimum(
        losses.LossStream("linear_adversarial", 2), geo.ball(2.0, 2), gsum=gsum)
    assert val == pytest.approx(-10.0) and np.allclose(pt, -2 * gsum / 5) and tol == 0
    w_star = np.array([0.1, 0.2])
    q = losses.LossStream("quadratic", 2, G=3.0, w_star=w_star)
    val, pt, _ = losses.offline_optimum(q, geo.symmetric_box([1, 1]))
    assert val == 0.0 and np.array_equal(pt, w_star)
    box = geo.symmetric_box([0.5, 1.0, 2.0])
    gsum = np.array([1.0, -2.0, 0.5])
    val, pt, _ = losses.offline_optimum(losses.LossStream("linear_adversarial", 3), box, gsum=gsum)
    verts = np.array(list(itertools.product(*[(-h, h) for h in (0.5, 1.0, 2.0)])))
    assert val == pytest.approx(np.min(verts @ gsum), abs=1e-12)
    assert np.allclose(pt, -np.sign(gsum) * [0.5, 1.0, 2.0])


def test_offline_optimum_regenerates_total():
    s = losses.LossStream("linear_adversarial", 3, seed=9, schedule="rademacher")
    body = geo.ball(1.0, 3)
    a = losses.offline_optimum(s, body, T=40)[0]
    b = losses.offline_optimum(s, body, gsum=emit(s, 40).sum(axis=0))[0]
    assert a == b


def test_from_spec_defaults():
    body = geo.anisotropic_box(4, 1.0, 10.0)
    k = losses.from_spec({"kind": "linear_adversarial", "schedule": "killer_kappa"}, 4, 0, body)
    assert k.thin_axis == 0
    q = losses.from_spec({"kind": "quadratic", "w_star": [2, 0, 0, 0]}, 4, 0, body)
    assert q.G == pytest.approx(body.radii[1] + 2)
    st = losses.from_spec({"kind": "linear_stochastic", "sigma": 0.5}, 4, 0)
    assert st.G == pytest.approx(1 + 5 * 0.5)
    with pytest.raises(ValueError):
        losses.from_spec({"kind": "quadratic", "bogus": 1}, 4, 0)


def test_noise_moments():
    rng = losses.make_rng(0)
    sigma, d = 0.7, 5
    xs = np.array([losses.noise_vector(rng, d, sigma)[0] for _ in range(100_000)])
    assert np.all(np.abs(xs.mean(axis=0)) <= 4 * sigma / np.sqrt(d) / np.sqrt(1e5))
    sq = np.sum(xs ** 2, axis=1)
    # |xi|^2 / sigma^2 is chi2_d / d capped at 25, so E|xi|^2 = sigma^2 E[min(X, 25)] <= sigma^2
    X = stats.chi2(d, scale=1 / d)
    cap = losses.NOISE_CLIP ** 2
    expect = sigma ** 2 * (X.expect(lb=0, ub=cap) + cap * X.sf(cap))
    assert expect <= sigma ** 2
    assert abs(sq.mean() - expect) <= 4 * sq.std() / np.sqrt(len(sq))
    assert np.max(np.linalg.norm(xs, axis=1)) <= 5 * sigma + 1e-12
