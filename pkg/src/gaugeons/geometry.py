"""Convex bodies sandwiched between two Euclidean balls.

Each body answers separation queries (the only access the online algorithms
use) and also exposes closed-form gauge, support and projection maps that the
tests and regret comparators rely on.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize, spatial

from . import _kernels as K

KINDS = ("ball", "box", "ellipsoid", "polytope", "l1ball")
_CODES = {"ball": K.BALL, "box": K.BOX, "ellipsoid": K.ELLIPSOID,
          "polytope": K.POLYTOPE, "l1ball": K.L1BALL}

# largest dimension at which polytope vertices are enumerated
MAX_ENUM_DIM = 12

_EMPTY_VEC = np.zeros(0)
_EMPTY_MAT = np.zeros((0, 0))
_EMPTY_VEC.flags.writeable = False
_EMPTY_MAT.flags.writeable = False


class DimensionError(ValueError):
    pass


class ApproximateComparatorRequired(RuntimeError):
    """No exact support value is available for this body; use an iterative fallback."""


@dataclass(frozen=True)
class SeparationResult:
    is_member: bool
    normal: np.ndarray


def _frozen(a, ndim):
    a = np.array(a, dtype=np.float64, copy=True)
    if a.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("body parameters must be finite")
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """A convex body with 0 in its interior.

    Use the constructors :func:`ball`, :func:`box`, :func:`ellipsoid`,
    :func:`polytope`, :func:`l1ball` rather than building this directly.
    """

    kind: str
    d: int
    scal: float = 0.0
    va: np.ndarray = field(default_factory=lambda: _EMPTY_VEC)
    vb: np.ndarray = field(default_factory=lambda: _EMPTY_VEC)
    mat: np.ndarray = field(default_factory=lambda: _EMPTY_MAT)
    radii: tuple = (0.0, 0.0)

    @property
    def code(self):
        return _CODES[self.kind]

    @property
    def packed(self):
        return self.code, self.scal, self.va, self.vb, self.mat

    @property
    def kappa(self):
        r, R = self.radii
        return R / r

    def describe(self):
        """Short stable label used in reports."""
        if self.kind in ("ball", "l1ball"):
            return f"{self.kind}(d={self.d},radius={self.scal:g})"
        if self.kind == "box":
            return f"box(d={self.d},kappa={self.kappa:.6g})"
        return f"{self.kind}(d={self.d},kappa={self.kappa:.6g})"

    def __repr__(self):
        return f"ConvexBody<{self.describe()}>"


# ---------------------------------------------------------------- constructors

def ball(radius, d):
    if radius <= 0 or d < 1:
        raise ValueError("ball needs radius > 0 and d >= 1")
    radius = float(radius)
    return ConvexBody("ball", int(d), scal=radius, radii=(radius, radius))


def box(lo, hi):
    lo = _frozen(lo, 1)
    hi = _frozen(hi, 1)
    if lo.shape != hi.shape:
        raise ValueError("lo and hi must have the same length")
    if not (np.all(lo < 0) and np.all(hi > 0)):
        raise ValueError("box must contain 0 in its interior (lo < 0 < hi)")
    r = float(min(np.min(-lo), np.min(hi)))
    R = float(np.linalg.norm(np.maximum(-lo, hi)))
    return ConvexBody("box", lo.shape[0], va=lo, vb=hi, radii=(r, R))


def symmetric_box(half_widths):
    h = np.asarray(half_widths, dtype=np.float64)
    return box(-h, h)


def anisotropic_box(d, thin=1.0, wide=10.0):
    """Half-width ``thin`` on the first axis and ``wide`` on the remaining ones."""
    h = np.full(d, float(wide))
    h[0] = thin
    return symmetric_box(h)


def ellipsoid(A):
    """The set {x : x'Ax <= 1} for symmetric positive-definite A."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("ellipsoid matrix must be square")
    A = 0.5 * (A + A.T)
    lam = np.linalg.eigvalsh(A)
    if lam[0] <= 0:
        raise ValueError("ellipsoid matrix must be positive-definite")
    radii = (1.0 / math.sqrt(lam[-1]), 1.0 / math.sqrt(lam[0]))
    return ConvexBody("ellipsoid", A.shape[0], mat=_frozen(A, 2), radii=radii)


def polytope(A, b):
    """The set {x : Ax <= b} with every b_i > 0; must be bounded."""
    A = _frozen(A, 2)
    b = _frozen(b, 1)
    if A.shape[0] != b.shape[0]:
        raise ValueError("A and b disagree on the number of halfspaces")
    if np.any(b <= 0):
        raise ValueError("polytope offsets must be positive so that 0 is interior")
    d = A.shape[1]
    r = float(np.min(b / np.linalg.norm(A, axis=1)))
    # qhull happily returns vertices of an unbounded set, so check with LPs first
    ext = _lp_bounding_box(A, b)
    if d <= MAX_ENUM_DIM:
        R = float(np.max(np.linalg.norm(_vertices(A, b), axis=1)))
    else:
        R = float(np.linalg.norm(ext))
    return ConvexBody("polytope", d, va=b, mat=A, radii=(r, R))


def l1ball(radius, d):
    if radius <= 0 or d < 1:
        raise ValueError("l1ball needs radius > 0 and d >= 1")
    radius = float(radius)
    return ConvexBody("l1ball", int(d), scal=radius, radii=(radius / math.sqrt(d), radius))


def from_spec(spec):
    """Build a body from a config mapping such as ``{"kind": "ball", "d": 3, "radius": 1}``."""
    kind = spec.get("kind")
    if kind == "ball":
        return ball(spec.get("radius", 1.0), spec["d"])
    if kind == "l1ball":
        return l1ball(spec.get("radius", 1.0), spec["d"])
    if kind == "box":
        if "half_widths" in spec:
            return symmetric_box(spec["half_widths"])
        if "lo" in spec:
            return box(spec["lo"], spec["hi"])
        return anisotropic_box(spec["d"], spec.get("thin", 1.0), spec.get("wide", 10.0))
    if kind == "ellipsoid":
        if "semi_axes" in spec:
            return ellipsoid(np.diag(1.0 / np.asarray(spec["semi_axes"], dtype=float) ** 2))
        return ellipsoid(spec["A"])
    if kind == "polytope":
        return polytope(spec["A"], spec["b"])
    raise ValueError(f"unknown body kind {kind!r}")


def _vertices(A, b):
    hs = np.hstack([A, -b[:, None]])
    try:
        return spatial.HalfspaceIntersection(hs, np.zeros(A.shape[1])).intersections
    except spatial.QhullError as exc:  # pragma: no cover - degenerate input
        raise ValueError("polytope is unbounded or degenerate") from exc


def _lp_bounding_box(A, b):
    d = A.shape[1]
    ext = np.zeros(d)
    for i in range(d):
        for sign in (1.0, -1.0):
            c = np.zeros(d)
            c[i] = -sign
            res = optimize.linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * d, method="highs")
            if res.status != 0:
                raise ValueError("polytope is unbounded")
            ext[i] = max(ext[i], abs(res.x[i]))
    return ext


# ---------------------------------------------------------------- oracles

def _check(body, w):
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != body.d:
        raise DimensionError(f"expected a vector of length {body.d}, got shape {w.shape}")
    return w


def separate(body, w):
    w = _check(body, w)
    normal = np.zeros(body.d)
    member = K.separate(*body.packed, w, normal)
    return SeparationResult(bool(member), normal)


def exact_gauge(body, w):
    """Closed-form gauge (Minkowski functional) of ``w``."""
    w = _check(body, w)
    if body.kind == "ball":
        return float(np.linalg.norm(w) / body.scal)
    if body.kind == "l1ball":
        return float(np.sum(np.abs(w)) / body.scal)
    if body.kind == "box":
        return float(max(0.0, np.max(np.maximum(w / body.vb, w / body.va))))
    if body.kind == "ellipsoid":
        return float(math.sqrt(max(0.0, w @ body.mat @ w)))
    return float(max(0.0, np.max(body.mat @ w / body.va)))


def support(body, g):
    """sup over the body of <x, g>."""
    g = _check(body, g)
    if body.kind == "ball":
        return float(body.scal * np.linalg.norm(g))
    if body.kind == "l1ball":
        return float(body.scal * np.max(np.abs(g)))
    if body.kind == "box":
        return float(np.sum(np.maximum(g * body.vb, g * body.va)))
    if body.kind == "ellipsoid":
        return float(math.sqrt(max(0.0, g @ np.linalg.solve(body.mat, g))))
    if body.d > MAX_ENUM_DIM:
        raise ApproximateComparatorRequired(
            f"polytope in d={body.d} > {MAX_ENUM_DIM}: vertex enumeration disabled")
    return float(np.max(_vertices(body.mat, body.va) @ g))


def support_point(body, g):
    """A maximizer of <x, g> over the body (closed-form kinds and small polytopes)."""
    g = _check(body, g)
    if body.kind == "ball":
        n = np.linalg.norm(g)
        return np.zeros(body.d) if n == 0 else body.scal * g / n
    if body.kind == "l1ball":
        x = np.zeros(body.d)
        i = int(np.argmax(np.abs(g)))
        x[i] = body.scal * np.sign(g[i])
        return x
    if body.kind == "box":
        return np.where(g >= 0, body.vb, body.va)
    if body.kind == "ellipsoid":
        y = np.linalg.solve(body.mat, g)
        n = math.sqrt(max(0.0, g @ y))
        return np.zeros(body.d) if n == 0 else y / n
    if body.d > MAX_ENUM_DIM:
        raise ApproximateComparatorRequired(
            f"polytope in d={body.d} > {MAX_ENUM_DIM}: vertex enumeration disabled")
    V = _vertices(body.mat, body.va)
    return V[int(np.argmax(V @ g))]


def sandwich_radii(body):
    return body.radii


def contains(body, w, tol=1e-10):
    return exact_gauge(body, w) <= 1.0 + tol


def project(body, y):
    """Euclidean projection onto the body.

    Returns ``(x, tol)`` where ``tol`` bounds the optimality error (0 for the
    closed-form kinds).
    """
    y = _check(body, y)
    if exact_gauge(body, y) <= 1.0:
        return y.copy(), 0.0
    if body.kind == "ball":
        return body.scal * y / np.linalg.norm(y), 0.0
    if body.kind == "box":
        return np.clip(y, body.va, body.vb), 0.0
    if body.kind == "l1ball":
        return _project_l1(y, body.scal), 0.0
    if body.kind == "ellipsoid":
        return _project_ellipsoid(y, body.mat), 1e-12
    return _project_polytope(y, body.mat, body.va)


def has_closed_form_projection(body):
    return body.kind in ("ball", "box", "l1ball")


def _project_l1(y, radius):
    a = np.abs(y)
    mu = np.sort(a)[::-1]
    cs = np.cumsum(mu)
    k = np.arange(1, y.shape[0] + 1)
    rho = np.nonzero(mu - (cs - radius) / k > 0)[0][-1]
    theta = (cs[rho] - radius) / (rho + 1.0)
    return np.sign(y) * np.maximum(a - theta, 0.0)


def _project_ellipsoid(y, A):
    lam, Q = np.linalg.eigh(A)
    c = Q.T @ y

    def excess(t):
        return float(np.sum(lam * (c / (1.0 + t * lam)) ** 2) - 1.0)

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
    t = optimize.brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return Q @ (c / (1.0 + t * lam))


def _project_polytope(y, A, b):
    cons = {"type": "ineq", "fun": lambda x: b - A @ x, "jac": lambda x: -A}
    x0 = y / max(1.0, float(np.max(A @ y / b)))
    res = optimize.minimize(lambda x: 0.5 * np.sum((x - y) ** 2), x0,
                            jac=lambda x: x - y, constraints=[cons], method="SLSQP",
                            options={"ftol": 1e-14, "maxiter": 500})
    x = res.x
    x = x / max(1.0, float(np.max(A @ x / b)))
    # first-order residual of the KKT system as the reported tolerance
    tol = float(np.linalg.norm(x - res.x)) + (0.0 if res.success else 1e-6)
    return x, tol
