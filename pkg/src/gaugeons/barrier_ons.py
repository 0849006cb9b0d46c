"""Barrier-regularized online Newton steps over the ball B(R).

The learner tracks the minimizers of

    Phi_t(x) = -nu log(R^2 - |x|^2) + eta/2 sum_{s<t} <g_s, x - u_s>^2 + <x, sum_{s<t} g_s>

with one approximate Newton step per round.  The inverse Hessian is a
truncated Taylor series around an expansion point ``z`` that only moves when
``|u|^2`` drifts too far from ``|z|^2``; between moves the inverse is
maintained by rank-one updates.

:func:`bons_update` is the production path.  :func:`bons_update_reference`
re-inverts every round and :func:`ftrl_minimize` solves the FTRL problem
exactly; both exist to check the production path.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from . import _kernels as K

log = logging.getLogger(__name__)

DEFAULT_REINVERT_EVERY = 2048


class FeasibilityFault(RuntimeError):
    """An iterate left the open ball; carries a diagnostic dump."""

    def __init__(self, msg, dump=None):
        super().__init__(msg)
        self.dump = dump or {}


def default_taylor_order(d, T, c):
    """Smallest m with c^m <= (dT)^-4."""
    return max(1, math.ceil(4.0 * math.log(max(d * T, 2)) / math.log(1.0 / c)))


@dataclass
class BarrierOnsParams:
    T: int
    eta: float
    nu: float
    c: float = 0.5
    R: float = 1.0
    m: int = None
    full_reinversion_period: int = DEFAULT_REINVERT_EVERY

    def __post_init__(self):
        if not 0 < self.c < 1:
            raise ValueError("c must lie in (0, 1)")
        if self.eta <= 0 or self.nu <= 0 or self.R <= 0:
            raise ValueError("eta, nu and R must be positive")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be at least 1")

    def taylor_order(self, d):
        return self.m if self.m is not None else default_taylor_order(d, self.T, self.c)

    def validity(self, G_tilde, d):
        """Which preconditions of the regret guarantee hold for gradients bounded by ``G_tilde``."""
        GR = G_tilde * self.R
        tol = 1.0 + 1e-12
        flags = {
            "eta_ok": self.eta <= tol / (5.0 * GR),
            "nu_lower_ok": 10.0 * GR <= self.nu * tol,
            "nu_upper_ok": self.nu <= 10.0 * d * self.T * GR * tol,
        }
        flags["compliant"] = all(flags.values())
        return flags

    def check(self, G_tilde, d):
        flags = self.validity(G_tilde, d)
        if not flags["compliant"]:
            log.warning("Barrier-ONS parameters outside the guaranteed range: %s", flags)
        return flags


@dataclass
class BarrierOnsState:
    params: BarrierOnsParams
    m: int
    u: np.ndarray
    z: np.ndarray
    SigmaPrime: np.ndarray
    V: np.ndarray
    Sacc: np.ndarray
    Gacc: np.ndarray
    t: int = 0
    inversion_count: int = 0
    z_update_count: int = 0

    @property
    def d(self):
        return self.u.shape[0]


def bons_init(params, d):
    m = params.taylor_order(d)
    return BarrierOnsState(
        params=params, m=m,
        u=np.zeros(d), z=np.zeros(d),
        SigmaPrime=np.eye(d) * (params.R ** 2 / (2.0 * params.nu)),
        V=np.zeros((d, d)), Sacc=np.zeros(d), Gacc=np.zeros(d),
    )


def predict(state):
    return state.u.copy()


def grad_phi(state, g_new):
    """Gradient at the current iterate of the objective that includes ``g_new``."""
    p = state.params
    u = state.u
    gap = p.R ** 2 - u @ u
    if gap <= 0:
        raise FeasibilityFault("iterate is not inside the ball", {"u": u.copy()})
    gu = g_new @ u
    V = state.V + np.outer(g_new, g_new)
    Sacc = state.Sacc + g_new * gu
    Gacc = state.Gacc + g_new
    return 2.0 * p.nu * u / gap + p.eta * (V @ u) - p.eta * Sacc + Gacc


def taylor_apply(state, grad):
    """Approximate inverse-Hessian product, using ``state.SigmaPrime`` as the current Sigma'."""
    p = state.params
    return K.taylor_apply(state.SigmaPrime, state.u, state.z, np.ascontiguousarray(grad, dtype=float),
                          float(p.nu), float(p.R), int(state.m))


def sigma_matrix(state):
    """Materialize Sigma = (Sigma'^-1 + 4 nu uu^T / (R^2-|u|^2)^2)^-1 from Sigma'."""
    p = state.params
    u = state.u
    gap = p.R ** 2 - u @ u
    q = state.SigmaPrime @ u
    return state.SigmaPrime - 4 * p.nu * np.outer(q, q) / (gap ** 2 + 4 * p.nu * (u @ q))


def bons_update(state, g_tilde):
    """Feed one loss vector; advances ``state`` in place and returns it."""
    p = state.params
    g = np.ascontiguousarray(g_tilde, dtype=np.float64)
    u_before = state.u.copy()
    t = state.t + 1
    status, moved, inverted = K.bons_step(
        state.u, state.z, state.SigmaPrime, state.V, state.Sacc, state.Gacc, g,
        float(p.eta), float(p.nu), float(p.R), float(p.c), int(state.m), t,
        int(p.full_reinversion_period))
    state.t = t
    if status != K.OK:
        raise FeasibilityFault(
            f"Barrier-ONS iterate left B(R) at round {t}; check the eta/nu preconditions",
            {"round": t, "u_before": u_before, "u_after": state.u.copy(), "z": state.z.copy(),
             "g": g.copy(), "eta": p.eta, "nu": p.nu, "R": p.R})
    state.inversion_count += int(inverted)
    state.z_update_count += int(moved)
    return state


def sigma_prime_residual(state):
    """Spectral norm of Sigma' (2 nu I/(R^2-|z|^2) + eta V) - I."""
    p = state.params
    d = state.d
    M = 2.0 * p.nu / (p.R ** 2 - state.z @ state.z) * np.eye(d) + p.eta * state.V
    return float(np.linalg.norm(state.SigmaPrime @ M - np.eye(d), 2))


# ---------------------------------------------------------------- objective

def phi_parts(x, us, gs, params):
    """Value, gradient and Hessian of Phi at ``x`` for history ``(us, gs)``."""
    R2 = params.R ** 2
    nu, eta = params.nu, params.eta
    gap = R2 - x @ x
    if gap <= 0:
        return math.inf, None, None
    d = x.shape[0]
    value = -nu * math.log(gap)
    grad = 2 * nu * x / gap
    hess = 2 * nu / gap * np.eye(d) + 4 * nu * np.outer(x, x) / gap ** 2
    if len(gs):
        G = np.asarray(gs)
        U = np.asarray(us)
        inner = G @ x - np.einsum("ij,ij->i", G, U)
        value += 0.5 * eta * inner @ inner + x @ G.sum(axis=0)
        grad = grad + eta * G.T @ inner + G.sum(axis=0)
        hess = hess + eta * G.T @ G
    return value, grad, hess


def ftrl_minimize(history, params, x0=None, tol=1e-9, max_iter=200):
    """Exact minimizer of Phi for ``history = [(u_s, g_s), ...]`` by damped Newton.

    Stops once the Newton decrement is below ``tol * sqrt(nu)``.
    """
    us = [np.asarray(h[0], dtype=float) for h in history]
    gs = [np.asarray(h[1], dtype=float) for h in history]
    if x0 is None:
        d = len(gs[0]) if gs else None
        if d is None:
            raise ValueError("empty history needs x0 for the dimension")
        x = np.zeros(d)
    else:
        x = np.array(x0, dtype=float)
    sqnu = math.sqrt(params.nu)
    for _ in range(max_iter):
        _, grad, hess = phi_parts(x, us, gs, params)
        step = np.linalg.solve(hess, grad)
        lam = math.sqrt(max(grad @ step, 0.0))
        if lam <= tol * sqnu:
            return x
        # self-concordance constant 1/sqrt(nu): full step once close enough
        scaled = lam / sqnu
        x = x - (step if scaled < 0.25 else step / (1.0 + scaled))
    raise RuntimeError(f"FTRL Newton solve did not converge in {max_iter} iterations")


def newton_decrement(x, us, gs, params):
    _, grad, hess = phi_parts(x, us, gs, params)
    return math.sqrt(max(grad @ np.linalg.solve(hess, grad), 0.0))


# ---------------------------------------------------------------- reference

@dataclass
class ReferenceState:
    params: BarrierOnsParams
    m: int
    u: np.ndarray
    z: np.ndarray
    us: list = field(default_factory=list)
    gs: list = field(default_factory=list)
    Sigma: np.ndarray = None
    t: int = 0
    inversion_count: int = 0
    z_update_count: int = 0


def reference_init(params, d):
    return ReferenceState(params=params, m=params.taylor_order(d), u=np.zeros(d), z=np.zeros(d))


def bons_update_reference(state, g_tilde):
    """Literal round: fresh Sigma inverse, explicit H = sum gamma^{k-1} Sigma^k."""
    p = state.params
    R2 = p.R ** 2
    g = np.array(g_tilde, dtype=float)
    u, z = state.u, state.z
    d = u.shape[0]
    state.us.append(u.copy())
    state.gs.append(g)
    gap_u = R2 - u @ u
    gap_z = R2 - z @ z
    G = np.asarray(state.gs)
    Sigma = np.linalg.inv(2 * p.nu / gap_z * np.eye(d) + 4 * p.nu * np.outer(u, u) / gap_u ** 2
                          + p.eta * G.T @ G)
    state.inversion_count += 1
    gamma = 2 * p.nu / gap_z - 2 * p.nu / gap_u
    H = np.zeros((d, d))
    power = np.eye(d)
    for k in range(1, state.m + 2):
        power = power @ Sigma
        H += gamma ** (k - 1) * power
    _, grad, _ = phi_parts(u, state.us, state.gs, p)
    u_next = u - H @ grad
    state.t += 1
    state.Sigma = Sigma
    if not u_next @ u_next < R2:
        raise FeasibilityFault(f"reference iterate left B(R) at round {state.t}",
                               {"u_before": u.copy(), "u_after": u_next})
    if abs(u_next @ u_next - z @ z) > p.c * gap_z:
        state.z = u_next.copy()
        state.z_update_count += 1
    state.u = u_next
    return state


def hessian_phi_next(state, g_new=None):
    """Exact Hessian at the current iterate of the objective including all fed gradients (and ``g_new``)."""
    p = state.params
    u = state.u
    gap = p.R ** 2 - u @ u
    d = u.shape[0]
    V = state.V if g_new is None else state.V + np.outer(g_new, g_new)
    return 2 * p.nu / gap * np.eye(d) + 4 * p.nu * np.outer(u, u) / gap ** 2 + p.eta * V


def update_count_bound(T, d, eta, nu, c):
    """Bound on the number of expansion-point moves over T rounds."""
    return 52.0 / c * math.sqrt(T * (1.0 + d / (nu * eta) * math.log(1.0 + T / d)))


def surrogate_regret_bound(w, G_tilde, params, d, T):
    R = params.R
    return (G_tilde * R - params.nu * math.log(1.0 - (w @ w) / R ** 2)
            + 18.0 * d * math.log(1.0 + T / d) / (5.0 * params.eta))


def taylor_error_bound(params, m):
    return params.R ** 2 * params.c ** m / (2.0 * params.nu * (1.0 - params.c))


class BarrierONS:
    """Object wrapper used as the ball subroutine of the reduction."""

    name = "barrier_ons"

    def __init__(self, params, d):
        self.params = params
        self.state = bons_init(params, d)

    def predict(self):
        return self.state.u

    def update(self, g_tilde):
        bons_update(self.state, g_tilde)

    @property
    def inversion_count(self):
        return self.state.inversion_count

    @property
    def z_update_count(self):
        return self.state.z_update_count


def taylor_check(state, g_new, m=None):
    """Compare the Taylor inverse-Hessian product with an exact solve for the next round.

    Does not modify ``state``.  Returns ``(approx, exact, grad, alpha)`` where
    ``alpha = (|u|^2 - |z|^2) / (R^2 - |u|^2)``.
    """
    p = state.params
    g = np.asarray(g_new, dtype=float)
    grad = grad_phi(state, g)
    sg = state.SigmaPrime @ g
    sp = state.SigmaPrime - p.eta * np.outer(sg, sg) / (1.0 + p.eta * g @ sg)
    sp = np.ascontiguousarray(0.5 * (sp + sp.T))
    order = state.m if m is None else m
    approx = K.taylor_apply(sp, state.u, state.z, grad, float(p.nu), float(p.R), int(order))
    exact = np.linalg.solve(hessian_phi_next(state, g), grad)
    uu = state.u @ state.u
    alpha = (uu - state.z @ state.z) / (p.R ** 2 - uu)
    return approx, exact, grad, alpha
