"""Hot inner loops: separation oracles, gauge bisection, Barrier-ONS rounds.

Every function here is plain numpy-compatible Python so that it runs both
under numba and, with ``GAUGEONS_DISABLE_NUMBA=1``, as ordinary numpy code.
Bodies are passed unpacked as ``(kind, scal, va, vb, mat)``:

    ball       scal = radius
    box        va = lo, vb = hi
    ellipsoid  mat = A            {x : x'Ax <= 1}
    polytope   mat = rows a_i, va = b
    l1ball     scal = radius
"""
import math

import numpy as np

from ._accel import jit

BALL = 0
BOX = 1
ELLIPSOID = 2
POLYTOPE = 3
L1BALL = 4

# slack on normalized constraints below which a point counts as a member
MEMBER_TOL = 1e-12

# status codes returned by bons_step
OK = 0
LEFT_BALL = 1


@jit
def separate(kind, scal, va, vb, mat, w, normal):
    """Fill ``normal`` and return True iff ``w`` is in the body."""
    d = w.shape[0]
    for i in range(d):
        normal[i] = 0.0
    if kind == BALL:
        n = math.sqrt(np.dot(w, w))
        if n <= scal * (1.0 + MEMBER_TOL):
            return True
        for i in range(d):
            normal[i] = w[i] / n
        return False
    if kind == BOX:
        best = -1.0
        arg = 0
        for i in range(d):
            if w[i] > 0.0:
                ratio = w[i] / vb[i]
            else:
                ratio = w[i] / va[i]
            if ratio > best:
                best = ratio
                arg = i
        if best <= 1.0 + MEMBER_TOL:
            return True
        normal[arg] = 1.0 if w[arg] > 0.0 else -1.0
        return False
    if kind == ELLIPSOID:
        aw = np.dot(mat, w)
        q = np.dot(w, aw)
        if math.sqrt(max(q, 0.0)) <= 1.0 + MEMBER_TOL:
            return True
        n = math.sqrt(np.dot(aw, aw))
        for i in range(d):
            normal[i] = aw[i] / n
        return False
    if kind == POLYTOPE:
        vals = np.dot(mat, w)
        best = -np.inf
        arg = 0
        for j in range(vals.shape[0]):
            ratio = vals[j] / va[j]
            if ratio > best:
                best = ratio
                arg = j
        if best <= 1.0 + MEMBER_TOL:
            return True
        row = mat[arg]
        n = math.sqrt(np.dot(row, row))
        for i in range(d):
            normal[i] = row[i] / n
        return False
    # L1BALL
    total = 0.0
    nnz = 0
    for i in range(d):
        total += abs(w[i])
        if w[i] != 0.0:
            nnz += 1
    if total <= scal * (1.0 + MEMBER_TOL):
        return True
    inv = 1.0 / math.sqrt(nnz)
    for i in range(d):
        if w[i] > 0.0:
            normal[i] = inv
        elif w[i] < 0.0:
            normal[i] = -inv
    return False


@jit
def gauge_dist(kind, scal, va, vb, mat, w, eps, r, s_out):
    """Bisection for the gauge distance of ``w``.

    Returns ``(S, calls)`` and writes the approximate subgradient to ``s_out``.
    The loop also keeps going while the lower end is still 0, so that
    ``S = 1/alpha - 1`` is always finite.
    """
    d = w.shape[0]
    normal = np.zeros(d)
    calls = 1
    if separate(kind, scal, va, vb, mat, w, normal):
        for i in range(d):
            s_out[i] = 0.0
        return 0.0, calls
    v = normal.copy()
    width = r * r * eps / (2.0 * np.dot(w, w))
    alpha = 0.0
    beta = 1.0
    mu = 0.5
    probe = np.empty(d)
    while beta - alpha > width or alpha == 0.0:
        for i in range(d):
            probe[i] = mu * w[i]
        calls += 1
        if separate(kind, scal, va, vb, mat, probe, normal):
            alpha = mu
        else:
            beta = mu
            v[:] = normal
        mu = 0.5 * (alpha + beta)
    vw = np.dot(v, w)
    if vw <= 0.0:
        # roundoff only: re-query at the final outer end
        for i in range(d):
            probe[i] = beta * w[i]
        calls += 1
        separate(kind, scal, va, vb, mat, probe, v)
        vw = np.dot(v, w)
    if vw > 0.0:
        for i in range(d):
            s_out[i] = v[i] / (beta * vw)
    else:
        for i in range(d):
            s_out[i] = 0.0
    return 1.0 / alpha - 1.0, calls


@jit
def sigma_apply(sigma_p, p, coef, x):
    """Sigma x with Sigma = Sigma' - coef * (Sigma'u)(Sigma'u)^T and p = Sigma'u."""
    return np.dot(sigma_p, x) - (coef * np.dot(p, x)) * p


@jit
def taylor_apply(sigma_p, u, z, grad, nu, R, m):
    """sum_{k=1}^{m+1} gamma^{k-1} Sigma^k grad using m+1 matrix-vector products."""
    R2 = R * R
    du = R2 - np.dot(u, u)
    p = np.dot(sigma_p, u)
    coef = 4.0 * nu / (du * du + 4.0 * nu * np.dot(u, p))
    gamma = 2.0 * nu / (R2 - np.dot(z, z)) - 2.0 * nu / du
    term = sigma_apply(sigma_p, p, coef, grad)
    out = term.copy()
    if gamma == 0.0:
        return out
    for _ in range(m):
        term = gamma * sigma_apply(sigma_p, p, coef, term)
        out += term
    return out


@jit
def fresh_sigma_prime(V, radius_gap, eta, nu):
    d = V.shape[0]
    M = eta * V
    for i in range(d):
        M[i, i] += 2.0 * nu / radius_gap
    return np.linalg.inv(M)


@jit
def bons_step(u, z, sigma_p, V, s_acc, g_acc, g, eta, nu, R, c, m, t, reinvert_every):
    """One efficient Barrier-ONS round, in place.

    Returns ``(status, z_moved, inverted)``.  ``t`` is the 1-based round index
    of ``g``.
    """
    d = u.shape[0]
    R2 = R * R
    gu = np.dot(g, u)
    for i in range(d):
        g_acc[i] += g[i]
        s_acc[i] += g[i] * gu
        for j in range(d):
            V[i, j] += g[i] * g[j]
    du = R2 - np.dot(u, u)
    if du <= 0.0:
        return LEFT_BALL, False, False
    grad = (2.0 * nu / du) * u + eta * np.dot(V, u) - eta * s_acc + g_acc

    sg = np.dot(sigma_p, g)
    denom = 1.0 + eta * np.dot(g, sg)
    for i in range(d):
        for j in range(d):
            sigma_p[i, j] -= eta * sg[i] * sg[j] / denom
    for i in range(d):
        for j in range(i + 1, d):
            avg = 0.5 * (sigma_p[i, j] + sigma_p[j, i])
            sigma_p[i, j] = avg
            sigma_p[j, i] = avg

    step = taylor_apply(sigma_p, u, z, grad, nu, R, m)
    for i in range(d):
        u[i] -= step[i]
    nu2 = np.dot(u, u)
    if not nu2 < R2:
        return LEFT_BALL, False, False
    nz2 = np.dot(z, z)
    if abs(nu2 - nz2) <= c * (R2 - nz2):
        if reinvert_every > 0 and t % reinvert_every == 0:
            sigma_p[:, :] = fresh_sigma_prime(V, R2 - nz2, eta, nu)
            return OK, False, True
        return OK, False, False
    z[:] = u
    sigma_p[:, :] = fresh_sigma_prime(V, R2 - nu2, eta, nu)
    return OK, True, True


@jit
def ogd_ball_step(u, g, step, R):
    """u <- clip_R(u - step * g), in place."""
    d = u.shape[0]
    for i in range(d):
        u[i] -= step * g[i]
    n = math.sqrt(np.dot(u, u))
    if n > R:
        scale = R / n
        for i in range(d):
            u[i] *= scale
