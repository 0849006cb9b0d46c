"""Approximate gauge distance and gauge projection from a separation oracle."""
from dataclasses import dataclass
import math

import numpy as np

from . import _kernels as K
from .geometry import _check


@dataclass(frozen=True)
class GaugeEstimate:
    S: float
    s: np.ndarray
    oracle_calls: int


def gauge_dist(body, w, eps, r=None):
    """Bisection estimate of the gauge distance max(0, gauge(w) - 1).

    Guarantees ``S_exact <= S <= S_exact + eps`` and that ``s`` is an
    ``eps``-approximate subgradient lying in the polar body, as long as the
    ball of radius ``r`` fits inside ``body``.  ``r`` defaults to the body's
    inner radius.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    w = _check(body, w)
    if r is None:
        r = body.radii[0]
    s = np.zeros(body.d)
    S, calls = K.gauge_dist(*body.packed, w, float(eps), float(r), s)
    return GaugeEstimate(float(S), s, int(calls))


def gauge_project(body, w, eps, r=None):
    """Return ``(w / (1 + S), estimate)``; interior points come back unchanged."""
    est = gauge_dist(body, w, eps, r)
    w = np.asarray(w, dtype=np.float64)
    if est.S == 0.0:
        return w.copy(), est
    return w / (1.0 + est.S), est


def call_budget(w_norm, r, eps):
    """Worst-case oracle calls of :func:`gauge_dist` for a point outside the body."""
    return 1 + math.ceil(math.log2(4.0 * w_norm ** 2 / (r * r * eps)))


def guard_margin(w_norm, r):
    """Extra calls the alpha > 0 guard can add on top of :func:`call_budget`."""
    return math.ceil(math.log2(max(w_norm / r, 1.0))) + 1
