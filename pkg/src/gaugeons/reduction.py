"""Projection-free online convex optimization over a convex body K.

A ball-domain learner plays ``u_t`` in B(R); the wrapper plays the gauge
projection ``w_t = u_t / (1 + S_t)`` in K and hands the learner the
surrogate gradient

    g~_t = g_t - 1{<g_t, u_t> < 0} <g_t, w_t> s_t

so that the learner's regret on g~ over the ball transfers to regret on g
over K, up to 2GR/T per round.  Only a separation oracle for K is used.
"""
from dataclasses import dataclass, field
import logging
import math
import time

import numpy as np

from . import _kernels as K
from . import geometry
from .barrier_ons import BarrierONS, BarrierOnsParams, FeasibilityFault
from .gauge import gauge_dist

log = logging.getLogger(__name__)

SUBROUTINES = ("barrier_ons", "ogd_ball")

# cumulative-loss snapshots kept per run for regret curves
CHECKPOINTS = 200


@dataclass
class OcoParams:
    T: int
    G: float
    R: float
    r: float
    kappa: float
    eta: float
    nu: float
    c: float = 0.5
    eps: float = None
    m: int = None
    eta_branch: str = ""
    nu_branch: str = ""

    def __post_init__(self):
        if self.eps is None:
            self.eps = 1.0 / self.T

    def bons(self):
        return BarrierOnsParams(T=self.T, eta=self.eta, nu=self.nu, c=self.c, R=self.R, m=self.m)

    def echo(self):
        return {"T": self.T, "G": self.G, "R": self.R, "r": self.r, "kappa": self.kappa,
                "eta": self.eta, "nu": self.nu, "c": self.c, "eps": self.eps, "m": self.m,
                "eta_branch": self.eta_branch, "nu_branch": self.nu_branch}


@dataclass
class RoundRecord:
    t: int
    u: np.ndarray
    w: np.ndarray
    g: np.ndarray
    g_tilde: np.ndarray
    S: float
    sep_calls: int


def surrogate_gradient(g, u, w, s):
    g = np.asarray(g, dtype=float)
    if g @ u < 0:
        return g - (g @ w) * np.asarray(s, dtype=float)
    return g.copy()


def tune_oco(G, R, kappa, d, T, r=None):
    """Barrier-ONS parameters for the online reduction (c = 1/2)."""
    if min(G, R, kappa, d, T) <= 0:
        raise ValueError("G, R, kappa, d and T must be positive")
    L = math.log(1.0 + T / d)
    eta_k = 1.0 / (10.0 * kappa)
    eta_t = math.sqrt(2.0 * d * L / T)
    nu_k = 20.0 * kappa * d
    nu_t = math.sqrt(d * T / L)
    eta = min(eta_k, eta_t) / (G * R)
    nu = G * R * max(nu_k, nu_t)
    return OcoParams(T=int(T), G=G, R=R, r=R / kappa if r is None else r, kappa=kappa,
                     eta=eta, nu=nu, c=0.5,
                     eta_branch="kappa" if eta_k <= eta_t else "horizon",
                     nu_branch="kappa" if nu_k >= nu_t else "horizon")


def params_for(body, G, T, overrides=None):
    """Tuned parameters for ``body`` with optional overrides of eta, nu, c, m, eps."""
    r, R = geometry.sandwich_radii(body)
    p = tune_oco(G, R, R / r, body.d, T, r=r)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in ("eta", "nu", "c", "m", "eps"):
            raise ValueError(f"cannot override {key!r}")
        setattr(p, key, val)
        if key in ("eta", "nu"):
            setattr(p, key + "_branch", "override")
    return p


def baseline_ogd_ball_step(u, g_tilde, t, G_tilde, R):
    """Projected gradient step on B(R) with step R/(G~ sqrt(t))."""
    out = np.array(u, dtype=float)
    if G_tilde > 0:
        K.ogd_ball_step(out, np.ascontiguousarray(g_tilde, dtype=float),
                        R / (G_tilde * math.sqrt(t)), float(R))
    return out


class OgdBall:
    """Anytime projected gradient descent on the ball; the O(kappa sqrt T) baseline."""

    name = "ogd_ball"

    def __init__(self, R, G_tilde, d):
        self.R = float(R)
        self.G_tilde = float(G_tilde)
        self.u = np.zeros(d)
        self.t = 0

    def predict(self):
        return self.u

    def update(self, g_tilde):
        self.t += 1
        if self.G_tilde > 0:
            K.ogd_ball_step(self.u, np.ascontiguousarray(g_tilde, dtype=float),
                            self.R / (self.G_tilde * math.sqrt(self.t)), self.R)

    inversion_count = 0
    z_update_count = 0


def make_subroutine(kind, params, d):
    if kind == "barrier_ons":
        bp = params.bons()
        bp.check(2.0 * params.kappa * params.G, d)
        return BarrierONS(bp, d)
    if kind == "ogd_ball":
        return OgdBall(params.R, 2.0 * params.kappa * params.G, d)
    raise ValueError(f"unknown subroutine {kind!r}")


class GaugeOCO:
    """The reduction wrapped around a ball learner.

    ``w`` is the point to play next; :meth:`step` consumes its loss gradient.
    ``hook(t, subroutine, g_tilde)``, if given, runs before the learner update.
    """

    def __init__(self, body, params, subroutine, hook=None):
        self.body = body
        self.params = params
        self.sub = subroutine
        self.hook = hook
        self.t = 0
        self.sep_calls = 0
        self._locate()

    def _locate(self):
        u = self.sub.predict()
        R = self.params.R
        if u @ u > R * R * (1.0 + 1e-12):
            raise FeasibilityFault(f"subroutine left B(R) at round {self.t + 1}",
                                   {"u": u.copy(), "R": R})
        self.u = u.copy()
        est = gauge_dist(self.body, self.u, self.params.eps, self.params.r)
        self.S = est.S
        self.s = est.s
        self.calls = est.oracle_calls
        self.sep_calls += est.oracle_calls
        self.w = self.u / (1.0 + self.S) if self.S > 0 else self.u.copy()

    def step(self, g):
        g = np.asarray(g, dtype=float)
        gt = surrogate_gradient(g, self.u, self.w, self.s)
        self.t += 1
        rec = RoundRecord(self.t, self.u, self.w, g, gt, self.S, self.calls)
        if self.hook is not None:
            self.hook(self.t, self.sub, gt)
        self.sub.update(gt)
        self._locate()
        return self.w, rec


def oco_step(wrapper, g):
    return wrapper.step(g)


@dataclass
class RunTrace:
    algorithm: str
    T: int
    d: int
    params: dict
    records: list = field(default_factory=list)
    stride: int = 1
    loss_sum: float = 0.0
    gsum: np.ndarray = None
    w_sum: np.ndarray = None
    sep_calls: int = 0
    inversions: int = 0
    z_updates: int = 0
    max_gauge: float = 0.0
    feasibility_violations: int = 0
    max_u_norm: float = 0.0
    max_g_tilde: float = 0.0
    max_g: float = 0.0
    wall_time: float = 0.0
    checkpoints: list = field(default_factory=list)

    @property
    def w_hat(self):
        return self.w_sum / self.T


def _finish_round(trace, rec, stream, body, check, keep):
    w, g = rec.w, rec.g
    trace.loss_sum += stream.value(w) if stream.depends_on_iterate else float(g @ w)
    trace.gsum += g
    trace.w_sum += w
    trace.max_g = max(trace.max_g, math.sqrt(g @ g))
    trace.max_g_tilde = max(trace.max_g_tilde, math.sqrt(rec.g_tilde @ rec.g_tilde))
    trace.max_u_norm = max(trace.max_u_norm, math.sqrt(rec.u @ rec.u))
    if check:
        gv = geometry.exact_gauge(body, w)
        trace.max_gauge = max(trace.max_gauge, gv)
        if gv > 1.0 + 1e-10:
            trace.feasibility_violations += 1
    if keep:
        if (rec.t - 1) % trace.stride == 0:
            trace.records.append(RoundRecord(rec.t, rec.u.copy(), rec.w.copy(), rec.g.copy(),
                                             rec.g_tilde.copy(), rec.S, rec.sep_calls))
        if rec.t % max(1, trace.T // CHECKPOINTS) == 0 or rec.t == trace.T:
            trace.checkpoints.append((rec.t, trace.loss_sum, trace.gsum.copy()))


def default_stride(T):
    return 1 if T <= 10_000 else 10


def run_oco(body, stream, T, subroutine="barrier_ons", params=None, keep_records=True,
            stride=None, check_feasibility=True, hook=None):
    """Run the reduction for T rounds and return a :class:`RunTrace`."""
    if subroutine not in SUBROUTINES:
        raise ValueError(f"unknown subroutine {subroutine!r}")
    if params is None:
        params = params_for(body, stream.G, T)
    d = body.d
    sub = make_subroutine(subroutine, params, d)
    trace = RunTrace("gauge_oco_bons" if subroutine == "barrier_ons" else "gauge_oco_ogd",
                     T, d, params.echo(), stride=stride or default_stride(T),
                     gsum=np.zeros(d), w_sum=np.zeros(d))
    stream = stream.clone()
    start = time.perf_counter()
    wrapper = GaugeOCO(body, params, sub, hook)
    for t in range(1, T + 1):
        g = stream.next_subgradient(wrapper.w, t)
        _, rec = wrapper.step(g)
        _finish_round(trace, rec, stream, body, check_feasibility, keep_records)
    trace.wall_time = time.perf_counter() - start
    # the final locate is for a round that is never played
    trace.sep_calls = wrapper.sep_calls - wrapper.calls
    trace.inversions = sub.inversion_count
    trace.z_updates = sub.z_update_count
    if stream.clipped:
        log.info("%d gradients clipped to G=%g", stream.clipped, stream.G)
    return trace


def run_ogd_projected(body, stream, T, G=None, keep_records=True, stride=None):
    """Projected OGD on K itself (closed-form projections only), step R/(G sqrt t)."""
    if not geometry.has_closed_form_projection(body):
        raise ValueError(f"{body.kind} has no closed-form projection")
    G = stream.G if G is None else G
    R = geometry.sandwich_radii(body)[1]
    d = body.d
    trace = RunTrace("ogd_exact_projection", T, d, {"T": T, "G": G, "R": R},
                     stride=stride or default_stride(T), gsum=np.zeros(d), w_sum=np.zeros(d))
    stream = stream.clone()
    start = time.perf_counter()
    w = np.zeros(d)
    for t in range(1, T + 1):
        g = stream.next_subgradient(w, t)
        rec = RoundRecord(t, w, w, g, g, 0.0, 0)
        _finish_round(trace, rec, stream, body, True, keep_records)
        if G > 0:
            w = geometry.project(body, w - R / (G * math.sqrt(t)) * g)[0]
    trace.wall_time = time.perf_counter() - start
    return trace
