"""Norms, cone membership, Hölder alignment, support values and cone projection."""
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .instance import as_exponent


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class IndeterminateError(RuntimeError):
    """An iterative routine stopped before certifying its answer.

    `best` holds the last iterate and `residual` its certificate error.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class Membership(Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


def _pfloat(p):
    return float(as_exponent(p)) if not isinstance(p, float) else p


def _qfloat(p):
    pf = _pfloat(p)
    return pf / (pf - 1.0)


def lp_norm(x, p):
    """||x||_p for p > 1, scaled by max |x_i| so large p does not overflow."""
    pf = _pfloat(p)
    a = np.abs(np.asarray(x, dtype=float))
    if a.size == 0:
        return 0.0
    top = a.max()
    if top == 0.0 or not np.isfinite(top):
        return float(top)
    return float(top * np.sum((a / top) ** pf) ** (1.0 / pf))


def in_cone(x, z, p, tol=1e-9):
    """Classify (x, z) against ||x||_p <= z with a tolerance relative to the point scale."""
    nx = lp_norm(x, p)
    scale = max(1.0, abs(float(z)), nx)
    gap = float(z) - nx
    if gap > tol * scale:
        return Membership.INTERIOR
    if gap >= -tol * scale:
        return Membership.BOUNDARY
    return Membership.EXTERIOR


def holder_aligner(v, p):
    """Unit p-norm vector u maximising u^T v, so that u^T v = ||v||_q.

    u_i = sign(v_i) |v_i|^(q-1) / ||v||_q^(q-1).  Raises DomainError for v = 0.
    """
    v = np.asarray(v, dtype=float)
    top = np.abs(v).max() if v.size else 0.0
    if top == 0.0:
        raise DomainError("the aligner of the zero vector is undefined")
    q = _qfloat(p)
    w = v / top
    num = np.sign(w) * np.abs(w) ** (q - 1.0)
    return num / lp_norm(w, q) ** (q - 1.0)


def support_on_slice(f, g, R, p):
    """Minimum of f^T x + g z over ||x||_p <= z = R.

    Returns (value, x) with value = R (g - ||f||_q) and x = -R u, u the
    Hölder aligner of f (x = 0 when f = 0).
    """
    R = float(R)
    if R < 0:
        raise DomainError("slice height must be nonnegative")
    f = np.asarray(f, dtype=float)
    nq = lp_norm(f, _qfloat(p))
    if nq == 0.0:
        return R * float(g), np.zeros_like(f)
    return R * (float(g) - nq), -R * holder_aligner(f, p)


def support_on_cap(f, g, R, p):
    """Minimum of f^T x + g z over ||x||_p <= z <= R.

    Returns (value, x, z).  The value is min{0, R (g - ||f||_q)}; the
    minimiser is the apex when that minimum is 0.
    """
    val, x = support_on_slice(f, g, R, p)
    if val >= 0.0:
        return 0.0, np.zeros_like(np.asarray(f, dtype=float)), 0.0
    return val, x, float(R)


def _solve_monotone(a, logc, e):
    """Solve y + exp(logc) y^e = a componentwise for y >= 0 (a >= 0, e > 0).

    Newton on u = log y is monotone from the right because the map is a
    sum of exponentials in u; the start min(a, (a/c)^(1/e)) is an upper bound.
    """
    a = np.asarray(a, dtype=float)
    y = np.zeros_like(a)
    live = a > 0
    if not live.any():
        return y
    al = a[live]
    u = np.minimum(np.log(al), (np.log(al) - logc) / e)
    for _ in range(100):
        ey, ecy = np.exp(u), np.exp(logc + e * u)
        with np.errstate(invalid="ignore", divide="ignore"):
            step = (ey + ecy - al) / (ey + e * ecy)
        # both terms underflowed: the entry is negligible, keep it
        step = np.where(np.isfinite(step), step, 0.0)
        u = u - step
        if np.max(np.abs(step)) < 1e-15:
            break
    y[live] = np.exp(u)
    return y


def _project_free_cone(x0, z0, p):
    pf = _pfloat(p)
    nx = lp_norm(x0, pf)
    if nx <= z0:
        return x0.copy(), float(z0)
    if lp_norm(x0, _qfloat(pf)) <= -z0:
        return np.zeros_like(x0), 0.0
    if pf == 2.0:
        scale = 0.5 * (1.0 + z0 / nx)
        return scale * x0, scale * nx
    a = np.abs(x0)

    def y_of(z):
        if z <= z0:
            return a.copy()
        return _solve_monotone(a, np.log(z - z0) + (1.0 - pf) * np.log(z), pf - 1.0)

    def phi(z):
        return lp_norm(y_of(z), pf) - z

    if z0 > 0.0:
        lo = z0
    else:
        # phi > 0 just above the apex whenever the point is not in the polar cone
        lo = nx * 1e-12
        while phi(lo) <= 0.0 and lo > nx * 1e-300:
            lo *= 1e-12
    if phi(lo) <= 0.0:
        # only rounding separates the point from the cone
        return x0.copy(), float(nx)
    if phi(nx) >= 0.0:
        z = nx
    else:
        z = brentq(phi, lo, nx, xtol=1e-15 * nx, rtol=4 * np.finfo(float).eps)
    y = y_of(z)
    return np.sign(x0) * y, float(z)


def project_p_ball(x0, R, p):
    """Euclidean projection of x0 onto {x : ||x||_p <= R}."""
    pf = _pfloat(p)
    x0 = np.asarray(x0, dtype=float)
    if R < 0:
        raise DomainError("ball radius must be nonnegative")
    if lp_norm(x0, pf) <= R:
        return x0.copy()
    if R == 0:
        return np.zeros_like(x0)
    if pf == 2.0:
        return x0 * (R / lp_norm(x0, 2.0))
    a = np.abs(x0)

    def excess(lognu):
        return lp_norm(_solve_monotone(a, lognu, pf - 1.0), pf) - R

    lo, hi = -60.0, 0.0
    while excess(hi) > 0:
        lo, hi = hi, hi + 20.0
        if hi > 700:
            raise IndeterminateError("p-ball projection multiplier diverged")
    if excess(lo) <= 0:
        return np.sign(x0) * _solve_monotone(a, lo, pf - 1.0)
    lognu = brentq(excess, lo, hi, xtol=1e-14)
    y = _solve_monotone(a, lognu, pf - 1.0)
    ny = lp_norm(y, pf)
    if ny > R:
        y = y * (R / ny)
    return np.sign(x0) * y


def project_cone(x, z, p, R=None, tol=1e-8):
    """Euclidean projection of (x, z) onto ||x||_p <= z, optionally capped by z <= R.

    Off the trivial cases the free projection bisects on the height z and
    solves the separable stationarity y_i + mu z^(1-p) y_i^(p-1) = |x_i|.
    If the free projection overshoots the cap, the answer lies on the
    plane z = R and is the p-ball projection of x.  A KKT residual above
    `tol` (relative to the point scale) raises IndeterminateError.
    """
    pf = _pfloat(p)
    x0 = np.asarray(x, dtype=float)
    z0 = float(z)
    if R is not None and R < 0:
        raise DomainError("cap must be nonnegative")
    # the projection is positively homogeneous; work at unit scale
    scale = max(float(np.abs(x0).max(initial=0.0)), abs(z0))
    if scale == 0.0:
        return np.zeros_like(x0), 0.0
    if scale != 1.0:
        px, pz = project_cone(x0 / scale, z0 / scale, pf, None if R is None else R / scale, tol)
        return px * scale, pz * scale
    px, pz = _project_free_cone(x0, z0, pf)
    if R is not None and pz > R:
        px, pz = project_p_ball(x0, float(R), pf), float(R)
    else:
        res = _kkt_residual(x0, z0, px, pz, pf)
        scale = max(1.0, lp_norm(x0, 2.0), abs(z0))
        if res > tol * scale:
            raise IndeterminateError("cone projection KKT residual too large", (px, pz), res)
    return px, pz


def _kkt_residual(x0, z0, x, z, p):
    """Distance of (x0 - x, z0 - z) from the normal cone of K_p at (x, z)."""
    dx, dz = x0 - x, z0 - z
    nx = lp_norm(x, p)
    if z == 0.0 and nx == 0.0:
        # normal cone at the apex is the polar cone -K_q
        return max(0.0, lp_norm(dx, p / (p - 1.0)) + dz)
    if nx < z * (1.0 - 1e-12):
        return float(np.hypot(np.linalg.norm(dx), dz))
    grad = np.sign(x) * (np.abs(x) / nx) ** (p - 1.0)
    mu = -dz
    return float(np.hypot(np.linalg.norm(dx - mu * grad), min(mu, 0.0)))
