"""Seeded loss streams for the online and stochastic experiments.

Three families:

* ``linear_adversarial``  f_t(w) = <g_t, w> with g_t from a fixed schedule
  (``sign_alternation``, ``rademacher``, ``killer_kappa`` or ``zero``)
* ``linear_stochastic``   f(w) = <gbar, w>, observed through gbar + noise
* ``quadratic``           f(w) = 1/2 |w - w_star|^2

All randomness comes from a Philox generator keyed by the seed, so a stream
is a pure function of its parameters.
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import geometry

KINDS = ("linear_adversarial", "linear_stochastic", "quadratic")
SCHEDULES = ("sign_alternation", "rademacher", "killer_kappa", "zero")

NOISE_CLIP = 5.0


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


def noise_vector(rng, d, sigma):
    """Gaussian with std sigma/sqrt(d) per coordinate, norm-clipped at 5 sigma.

    Returns ``(xi, clipped)``.  The law is symmetric so the mean stays 0 after
    clipping, and E|xi|^2 <= sigma^2.
    """
    if sigma == 0:
        return np.zeros(d), False
    xi = rng.standard_normal(d) * (sigma / math.sqrt(d))
    n = math.sqrt(xi @ xi)
    if n > NOISE_CLIP * sigma:
        return xi * (NOISE_CLIP * sigma / n), True
    return xi, False


def _clip(g, G):
    n = math.sqrt(g @ g)
    if n > G:
        return g * (G / n)
    return g


@dataclass
class LossStream:
    """A deterministic loss stream.

    ``thin_axis`` and ``thin_weight`` shape the ``killer_kappa`` schedule;
    ``thin_axis`` should be the body's narrowest coordinate.
    """

    kind: str
    d: int
    G: float = 1.0
    seed: int = 0
    schedule: str = "rademacher"
    direction: np.ndarray = None
    gbar: np.ndarray = None
    sigma: float = 0.0
    w_star: np.ndarray = None
    thin_axis: int = 0
    thin_weight: float = 0.95
    _rng: np.random.Generator = field(default=None, repr=False, compare=False)
    _last_t: int = field(default=0, repr=False, compare=False)
    clipped: int = field(default=0, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown stream kind {self.kind!r}")
        if self.d < 1 or self.G < 0 or self.sigma < 0:
            raise ValueError("need d >= 1, G >= 0, sigma >= 0")
        if self.kind == "linear_adversarial":
            if self.schedule not in SCHEDULES:
                raise ValueError(f"unknown schedule {self.schedule!r}")
            if self.direction is None:
                self.direction = np.eye(self.d)[0]
            self.direction = np.asarray(self.direction, dtype=float)
            n = np.linalg.norm(self.direction)
            if n == 0:
                raise ValueError("direction must be nonzero")
            self.direction = self.direction / n
            if self.schedule == "killer_kappa":
                if self.d < 2 or not 0 <= self.thin_axis < self.d:
                    raise ValueError("killer_kappa needs d >= 2 and a valid thin axis")
                if not 0 < self.thin_weight <= 1:
                    raise ValueError("thin_weight must lie in (0, 1]")
        elif self.kind == "linear_stochastic":
            self.gbar = np.asarray(self.gbar if self.gbar is not None else np.eye(self.d)[0],
                                   dtype=float)
        else:
            self.w_star = np.asarray(self.w_star if self.w_star is not None else np.zeros(self.d),
                                     dtype=float)
        for name in ("direction", "gbar", "w_star"):
            v = getattr(self, name)
            if v is not None and v.shape != (self.d,):
                raise geometry.DimensionError(f"{name} must have length {self.d}")
        self.reset()

    def reset(self):
        self._rng = make_rng(self.seed)
        self._last_t = 0
        self.clipped = 0

    def clone(self, seed_offset=0):
        """Fresh copy at round 0, optionally with a shifted seed."""
        return replace(self, seed=self.seed + seed_offset)

    @property
    def is_linear(self):
        return self.kind != "quadratic"

    @property
    def depends_on_iterate(self):
        return self.kind == "quadratic"

    def exact_subgradient(self, w):
        """Noise-free subgradient of the objective (stochastic and quadratic kinds)."""
        if self.kind == "linear_stochastic":
            return self.gbar.copy()
        if self.kind == "quadratic":
            return np.asarray(w, dtype=float) - self.w_star
        raise TypeError("adversarial streams have no fixed objective")

    def value(self, w):
        w = np.asarray(w, dtype=float)
        if self.kind == "linear_stochastic":
            return float(self.gbar @ w)
        if self.kind == "quadratic":
            diff = w - self.w_star
            return 0.5 * float(diff @ diff)
        raise TypeError("adversarial streams have no fixed objective")

    def _adversarial(self, t):
        d = self.d
        if self.schedule == "zero":
            return np.zeros(d)
        if self.schedule == "sign_alternation":
            return (1.0 if t % 2 else -1.0) * self.G * self.direction
        if self.schedule == "rademacher":
            signs = self._rng.integers(0, 2, size=d) * 2.0 - 1.0
            return self.G * signs / math.sqrt(d)
        # killer_kappa: sign alternation on the thin axis, which a learner with
        # kappa-shrunk steps keeps paying for, plus Rademacher noise on the
        # other axes so that the comparator moves like sqrt(T)
        a = self.thin_weight
        g = np.zeros(d)
        signs = self._rng.integers(0, 2, size=d - 1) * 2.0 - 1.0
        g[np.arange(d) != self.thin_axis] = signs * (math.sqrt(1.0 - a * a) / math.sqrt(d - 1))
        g[self.thin_axis] = a if t % 2 else -a
        return self.G * g

    def next_subgradient(self, w, t):
        if t <= self._last_t:
            raise ValueError("rounds must be strictly increasing")
        self._last_t = t
        if self.kind == "linear_adversarial":
            g = self._adversarial(t)
        else:
            g = self.exact_subgradient(w)
            if self.kind == "linear_stochastic":
                xi, _ = noise_vector(self._rng, self.d, self.sigma)
                g = g + xi
        n = math.sqrt(g @ g)
        if n > self.G:
            self.clipped += 1
            g = g * (self.G / n)
        return g


def next_subgradient(stream, w, t):
    return stream.next_subgradient(w, t)


def adversarial_total(stream, T):
    """Sum of the first T gradients of an iterate-independent stream."""
    if stream.depends_on_iterate:
        raise TypeError("the total of an iterate-dependent stream depends on the play")
    s = stream.clone()
    total = np.zeros(stream.d)
    w = np.zeros(stream.d)
    for t in range(1, T + 1):
        total += s.next_subgradient(w, t)
    return total


def offline_optimum(stream, body, T=None, gsum=None):
    """Comparator ``(value, point, tol)``.

    Adversarial linear streams: the minimum over the body of <sum_t g_t, w>,
    with the sum taken from ``gsum`` or regenerated for ``T`` rounds.
    Stochastic and quadratic streams: the minimum of the (per-round) objective.
    ``tol`` is 0 for closed forms and the projection tolerance otherwise.
    Polytopes too large to enumerate raise ``ApproximateComparatorRequired``.
    """
    if stream.kind == "quadratic":
        point, tol = geometry.project(body, stream.w_star)
        return stream.value(point), point, tol
    if stream.kind == "linear_stochastic":
        direction = stream.gbar
    else:
        if gsum is None:
            if T is None:
                raise ValueError("need T or gsum for an adversarial stream")
            gsum = adversarial_total(stream, T)
        direction = np.asarray(gsum, dtype=float)
    point = geometry.support_point(body, -direction)
    return -geometry.support(body, -direction), point, 0.0


def from_spec(spec, d, seed, body=None):
    """Build a stream from a config mapping; ``body`` fills in the thin axis."""
    spec = dict(spec)
    kind = spec.pop("kind")
    kwargs = {"kind": kind, "d": d, "seed": seed}
    for key in ("G", "schedule", "direction", "gbar", "sigma", "w_star",
                "thin_axis", "thin_weight"):
        if key in spec:
            kwargs[key] = spec.pop(key)
    if spec:
        raise ValueError(f"unknown stream fields: {sorted(spec)}")
    if kwargs.get("schedule") == "killer_kappa" and body is not None:
        kwargs.setdefault("thin_axis", int(np.argmin(axis_widths(body))))
    if kind == "quadratic" and "G" not in kwargs and body is not None:
        # large enough that w - w_star is never clipped on the body
        w_star = np.asarray(kwargs.get("w_star", np.zeros(d)), dtype=float)
        kwargs["G"] = geometry.sandwich_radii(body)[1] + float(np.linalg.norm(w_star))
    if kind == "linear_stochastic" and "G" not in kwargs:
        gbar = np.asarray(kwargs.get("gbar", np.eye(d)[0]), dtype=float)
        kwargs["G"] = float(np.linalg.norm(gbar)) + NOISE_CLIP * float(kwargs.get("sigma", 0.0))
    return LossStream(**kwargs)


def objective_bound(stream):
    """Bound on the noise-free subgradient, the G of the stochastic rate.

    For ``linear_stochastic`` this is |gbar|; ``stream.G`` also covers the noise.
    """
    if getattr(stream, "kind", None) == "linear_stochastic":
        return float(np.linalg.norm(stream.gbar))
    return stream.G


def axis_widths(body):
    """Half-width of the body along each coordinate axis."""
    return np.array([geometry.support(body, e) for e in np.eye(body.d)])
