"""Online-to-batch: stochastic and offline convex optimization via the reduction.

The averaged iterate of the projection-free learner run on noisy subgradients
of a fixed objective f is an approximate minimizer of f over K.
"""
from dataclasses import dataclass
import math
import time

import numpy as np

from . import geometry
from .losses import make_rng, noise_vector, objective_bound
from .reduction import GaugeOCO, OcoParams, RunTrace, default_stride, make_subroutine, RoundRecord


class BudgetExceeded(RuntimeError):
    """The round budget needed for the target accuracy is above the cap.

    ``partial`` is the averaged iterate after ``T_run`` rounds.
    """

    def __init__(self, msg, partial, T_needed, T_run):
        super().__init__(msg)
        self.partial = partial
        self.T_needed = T_needed
        self.T_run = T_run


@dataclass
class ScoParams:
    sigma: float
    G: float
    R: float
    r: float
    kappa: float
    d: int
    T: int
    eta: float
    nu: float
    c: float = 0.5
    m: int = None
    eta_branch: str = ""
    nu_branch: str = ""

    def oco(self):
        return OcoParams(T=self.T, G=self.G, R=self.R, r=self.r, kappa=self.kappa,
                         eta=self.eta, nu=self.nu, c=self.c, m=self.m,
                         eta_branch=self.eta_branch, nu_branch=self.nu_branch)


def tune_sco(G, R, kappa, d, T, sigma, r=None):
    if min(G, R, kappa, d, T) <= 0 or sigma < 0:
        raise ValueError("G, R, kappa, d, T must be positive and sigma >= 0")
    L = math.log(1.0 + T / d)
    eta_k = 1.0 / (10.0 * G * kappa)
    nu_k = 20.0 * G * kappa * d
    if sigma == 0:
        eta_b, nu_b = "kappa", "kappa"
        eta, nu = eta_k, nu_k
    else:
        eta_s = math.sqrt(2.0 * d * L / T) / sigma
        nu_s = sigma * math.sqrt(d * T / L)
        eta_b = "kappa" if eta_k <= eta_s else "noise"
        nu_b = "kappa" if nu_k >= nu_s else "noise"
        eta, nu = min(eta_k, eta_s), max(nu_k, nu_s)
    return ScoParams(sigma=sigma, G=G, R=R, r=R / kappa if r is None else r, kappa=kappa,
                     d=int(d), T=int(T), eta=eta / R, nu=R * nu, c=0.5,
                     eta_branch=eta_b, nu_branch=nu_b)


def sco_params_for(body, G, T, sigma, overrides=None):
    r, R = geometry.sandwich_radii(body)
    p = tune_sco(G, R, R / r, body.d, T, sigma, r=r)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in ("eta", "nu", "c", "m"):
            raise ValueError(f"cannot override {key!r}")
        setattr(p, key, val)
    return p


def run_sco(body, objective, sigma, seed, T, params=None, keep_records=False, stride=None,
            subroutine="barrier_ons", hook=None):
    """Averaged iterate of the reduction fed ``grad f(w_t) + noise``.

    ``objective`` needs ``G``, ``exact_subgradient(w)`` and ``value(w)``.
    Returns ``(w_hat, trace)``; ``trace.loss_sum`` is the sum of f(w_t).
    """
    G = objective.G
    if params is None:
        params = sco_params_for(body, objective_bound(objective), T, sigma)
    op = params.oco() if isinstance(params, ScoParams) else params
    d = body.d
    rng = make_rng(seed)
    sub = make_subroutine(subroutine, op, d)
    trace = RunTrace("gauge_sco_bons" if subroutine == "barrier_ons" else "gauge_sco_ogd",
                     T, d, dict(op.echo(), sigma=sigma), stride=stride or default_stride(T),
                     gsum=np.zeros(d), w_sum=np.zeros(d))
    start = time.perf_counter()
    wrapper = GaugeOCO(body, op, sub, hook)
    clipped = 0
    for t in range(1, T + 1):
        w = wrapper.w
        gbar = np.asarray(objective.exact_subgradient(w), dtype=float)
        n = math.sqrt(gbar @ gbar)
        if n > G:
            gbar = gbar * (G / n)
        xi, hit = noise_vector(rng, d, sigma)
        clipped += hit
        _, rec = wrapper.step(gbar + xi)
        trace.loss_sum += objective.value(w)
        trace.gsum += rec.g
        trace.w_sum += w
        trace.max_g = max(trace.max_g, math.sqrt(rec.g @ rec.g))
        trace.max_g_tilde = max(trace.max_g_tilde, math.sqrt(rec.g_tilde @ rec.g_tilde))
        trace.max_u_norm = max(trace.max_u_norm, math.sqrt(rec.u @ rec.u))
        gv = geometry.exact_gauge(body, w)
        trace.max_gauge = max(trace.max_gauge, gv)
        trace.feasibility_violations += gv > 1.0 + 1e-10
        if keep_records and (t - 1) % trace.stride == 0:
            trace.records.append(RoundRecord(t, rec.u.copy(), w.copy(), rec.g.copy(),
                                             rec.g_tilde.copy(), rec.S, rec.sep_calls))
    trace.wall_time = time.perf_counter() - start
    trace.sep_calls = wrapper.sep_calls - wrapper.calls
    trace.inversions = sub.inversion_count
    trace.z_updates = sub.z_update_count
    trace.params["noise_clipped"] = clipped
    return trace.w_hat, trace


def gap(objective, body, w):
    """f(w) - min over the body of f, with the comparator tolerance."""
    from .losses import offline_optimum
    best, _, tol = offline_optimum(objective, body)
    return objective.value(w) - best, tol


def log_factor(d, eps):
    return 100.0 * math.log(2.0 + d / eps)


def budget(eps_target, G, R, kappa, d):
    """Rounds needed for an eps-optimal averaged iterate, and the log factor used."""
    C = log_factor(d, eps_target)
    return math.ceil(C * G * R * kappa * d / eps_target), C


def solve_to_eps(body, objective, eps_target, G=None, R=None, kappa=None, d=None,
                 max_rounds=200_000, seed=0):
    """Noise-free averaged run long enough for an eps_target-optimal point."""
    if eps_target <= 0:
        raise ValueError("eps_target must be positive")
    r_b, R_b = geometry.sandwich_radii(body)
    G = objective_bound(objective) if G is None else G
    R = R_b if R is None else R
    kappa = R / r_b if kappa is None else kappa
    d = body.d if d is None else d
    T, _ = budget(eps_target, G, R, kappa, d)
    if T > max_rounds:
        w_hat, _ = run_sco(body, objective, 0.0, seed, max_rounds)
        raise BudgetExceeded(f"need T={T} rounds, cap is {max_rounds}", w_hat, T, max_rounds)
    w_hat, _ = run_sco(body, objective, 0.0, seed, T)
    return w_hat
