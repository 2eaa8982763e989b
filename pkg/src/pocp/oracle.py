"""Brute-force references for tiny instances.

Nothing here shares code with the solver beyond the instance type and the
closed-form dual value: the primal grid evaluates the rows directly at
points of the capped cone, so its value is an honest upper bound on the
discrepancy, and every simplex point gives an honest lower bound.
"""
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .geometry import lp_norm
from .instance import PocpInstance, as_exponent

MAX_POINTS = 10**6


class OracleBudgetError(ValueError):
    """Requested grid is larger than the oracle is meant to evaluate."""


@dataclass
class OracleEstimate:
    """A certified one-sided bound.

    `value` is attained at `point` (a cone point or a simplex vector);
    `gap` bounds its distance to the optimum from the coarse grid's
    Lipschitz bookkeeping; `coarse` is the value before local refinement.
    """

    value: float
    gap: float
    point: object
    coarse: float


def exact_membership(x, z, p):
    """Exact test of sum |x_j|^r <= z^r and z >= 0 for integer p = r."""
    p = as_exponent(p)
    if not p.is_integer:
        raise ValueError("exact membership needs an integer exponent")
    vals = list(x) + [z]
    for v in vals:
        if isinstance(v, (float, np.floating)) or not isinstance(v, (int, Fraction, np.integer)):
            raise TypeError(f"exact membership takes rationals only, got {v!r}")
    z = Fraction(z)
    if z < 0:
        return False
    r = p.r
    return sum(abs(Fraction(v)) ** r for v in x) <= z ** r


def _cube_directions(n, per_edge):
    """Points on the faces of [-1, 1]^n, spacing 2/(per_edge - 1) on each face."""
    ticks = np.linspace(-1.0, 1.0, per_edge)
    faces = []
    for axis in range(n):
        grid = np.array(list(product(ticks, repeat=n - 1))) if n > 1 else np.zeros((1, 0))
        for sign in (-1.0, 1.0):
            pts = np.insert(grid, axis, sign, axis=1)
            faces.append(pts)
    return np.unique(np.vstack(faces), axis=0)


def _rows(inst):
    F, G, H = inst.arrays()
    return F, G, H


def _violation(F, G, H, X, Z):
    return (X @ F.T + Z[:, None] * G[None, :] - H[None, :]).max(axis=1)


def _row_norms(X, p):
    A = np.abs(X)
    top = A.max(axis=1)
    safe = np.where(top > 0, top, 1.0)
    return top * ((A / safe[:, None]) ** p).sum(axis=1) ** (1.0 / p)


def _into_cap(X, Z, p, R):
    """Map arbitrary (x, z) into the capped cone without leaving the box much."""
    Z = np.clip(Z, 0.0, R)
    norms = _row_norms(X, p)
    over = norms > Z
    lift = over & (norms <= R)
    Z = np.where(lift, norms, Z)
    shrink = norms > R
    if shrink.any():
        X = X.copy()
        X[shrink] *= (R / norms[shrink])[:, None]
        Z = np.where(shrink, R, Z)
    return X, Z


def grid_theta(instance, R, resolution=200_000, refine_rounds=60):
    """Grid minimum of the largest row violation over ||x||_p <= z <= R.

    The coarse grid is z-levels x radial fractions x directions, the
    directions being cube-face points normalised to the unit p-sphere.
    The reported gap is Lipschitz(rows) times the covering radius of that
    grid; the returned value then comes from a shrinking local box search
    around the best grid point, which can only lower it.
    """
    if not isinstance(instance, PocpInstance):
        raise TypeError("grid_theta expects a PocpInstance")
    n = instance.n
    if n > 3:
        raise OracleBudgetError("grid oracle is limited to n <= 3")
    if resolution > MAX_POINTS:
        raise OracleBudgetError("resolution above 1e6 points")
    R = float(R)
    p = float(instance.p)
    F, G, H = _rows(instance)
    lip = float(np.sqrt((F ** 2).sum(axis=1) + G ** 2).max())

    per_edge = 9 if n == 3 else 41
    dirs = _cube_directions(n, per_edge)
    dirs = dirs / _row_norms(dirs, p)[:, None]
    levels = max(2, int((resolution / len(dirs)) ** 0.5))
    zs = np.linspace(0.0, R, levels)
    rhos = np.linspace(0.0, 1.0, levels)
    Zg, Rg = np.meshgrid(zs, rhos, indexing="ij")
    scal = (Zg * Rg).ravel()
    zcol = Zg.ravel()
    X = (scal[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    Z = np.repeat(zcol, len(dirs))
    vals = _violation(F, G, H, X, Z)
    k = int(np.argmin(vals))
    best_x, best_z, best = X[k].copy(), float(Z[k]), float(vals[k])
    coarse = best

    dz = R / (levels - 1)
    drho = 1.0 / (levels - 1)
    h = 2.0 / (per_edge - 1)
    d = np.sqrt(n - 1) * h / 2
    dir_err = d * (1 + np.sqrt(n) * n ** max(0.0, 1 / p - 0.5))
    u2 = n ** max(0.0, 0.5 - 1 / p)
    dx = (dz / 2 + R * drho / 2) * u2 + R * dir_err
    gap = lip * float(np.hypot(dx, dz / 2))

    width = max(dz, R * drho, R * h)
    ticks = np.linspace(-1.0, 1.0, 7 if n == 3 else 11)
    lattice = np.array(list(product(ticks, repeat=n + 1)))
    rng = np.random.default_rng(0)
    for _ in range(refine_rounds):
        # a fixed lattice plus random points, so kinks not aligned with the axes still get crossed
        offsets = np.vstack([lattice, rng.uniform(-1.0, 1.0, (2000, n + 1))])
        cand = np.concatenate([best_x, [best_z]])[None, :] + width * offsets
        Xc, Zc = _into_cap(cand[:, :n], cand[:, n], p, R)
        vc = _violation(F, G, H, Xc, Zc)
        k = int(np.argmin(vc))
        if vc[k] < best:
            moved = np.abs(offsets[k]).max() > 0
            best, best_x, best_z = float(vc[k]), Xc[k].copy(), float(Zc[k])
            if not moved:
                width *= 0.5
        else:
            width *= 0.5
        if width < 1e-13 * max(1.0, R):
            break
    return OracleEstimate(best, gap, (best_x, best_z), coarse)


def _dual_values(instance, lams, R):
    F, G, H = _rows(instance)
    q = float(instance.p.conjugate())
    A = lams @ F
    nq = _row_norms(A, q)
    return np.minimum(0.0, R * (lams @ G - nq)) - lams @ H


def _simplex_grid(m, N):
    if m == 1:
        return np.ones((1, 1))
    if m == 2:
        a = np.arange(N + 1) / N
        return np.stack([a, 1 - a], axis=1)
    i, j = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    keep = i + j <= N
    i, j = i[keep], j[keep]
    return np.stack([i, j, N - i - j], axis=1) / N


def dual_grid_theta(instance, R, resolution=200_000, refine_rounds=60):
    """Dense-simplex maximum of the closed-form dual value (a lower bound).

    The gap is the l1-Lipschitz constant of the dual function times the
    l1 covering radius m/N of the simplex grid.
    """
    if not isinstance(instance, PocpInstance):
        raise TypeError("dual_grid_theta expects a PocpInstance")
    m = instance.m
    if m > 3:
        raise OracleBudgetError("dual grid oracle is limited to m <= 3")
    if resolution > MAX_POINTS:
        raise OracleBudgetError("resolution above 1e6 points")
    R = float(R)
    N = int(resolution if m == 2 else (2 * resolution) ** 0.5) if m > 1 else 1
    lams = _simplex_grid(m, N)
    vals = _dual_values(instance, lams, R)
    k = int(np.argmax(vals))
    best, best_lam = float(vals[k]), lams[k].copy()
    coarse = best
    F, G, H = _rows(instance)
    q = float(instance.p.conjugate())
    lipd = R * (np.abs(G).max() + max(lp_norm(f, q) for f in F)) + np.abs(H).max()
    gap = 0.0 if m == 1 else float(lipd * m / N)

    if m > 1:
        width = 2.0 / N
        ticks = np.linspace(-1.0, 1.0, 21 if m == 3 else 41)
        offsets = np.array(list(product(ticks, repeat=m - 1)))
        for _ in range(refine_rounds):
            cand = np.repeat(best_lam[None, :], len(offsets), axis=0)
            cand[:, : m - 1] += width * offsets
            cand[:, m - 1] = 1.0 - cand[:, : m - 1].sum(axis=1)
            cand = cand[(cand >= 0).all(axis=1)]
            vc = _dual_values(instance, cand, R)
            k = int(np.argmax(vc))
            if vc[k] > best:
                moved = not np.allclose(cand[k], best_lam)
                best, best_lam = float(vc[k]), cand[k].copy()
                if not moved:
                    width *= 0.5
            else:
                width *= 0.5
            if width < 1e-14:
                break
    return OracleEstimate(best, gap, best_lam, coarse)
