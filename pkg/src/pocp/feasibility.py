"""Certified feasibility and discrepancy over capped p-order cones.

The discrepancy of an instance at radius R is

    theta* = min over ||x||_p <= z <= R of max_i (f_i^T x + g_i z - h_i),

so the rows are satisfiable on the capped cone exactly when theta* <= 0.
Every answer is bracketed by two certificates:

* an upper bound, the largest row violation at an explicit cone point;
* a lower bound, the concave dual value of a simplex weight vector,
  D(lam) = min{0, R (lam^T G - ||F^T lam||_q)} - lam^T H,
  which is exact because the support of the capped cone has that closed form.

The default solver follows the central path of a self-concordant barrier
(power-cone barriers on |x_j|^p <= t_j z^(p-1), plus sum_j t_j <= z) and
reads the dual weights off the row slacks.  Projected dual subgradient
ascent with ergodic primal averaging is kept as `method="subgradient"`.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import nnls

from .geometry import DomainError, lp_norm, support_on_cap, support_on_slice
from .instance import MultiConeInstance, PocpInstance

DEFAULT_EPS = 1e-6
DEFAULT_BUDGET = 10**6
AUTO_RADIUS_CAP = 1e6

CAP_NOTE = ("infeasible on the capped cone z <= R only; feasibility far out on the "
            "uncapped cone is ruled out only when R meets the radius bound")


class Status(Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INDETERMINATE = "indeterminate"


class Boundedness(Enum):
    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"
    INDETERMINATE = "indeterminate"


@dataclass
class Verdict:
    """Outcome of a feasibility run.

    `theta` is the best certified upper bound on the discrepancy (row
    violation at `primal`), `lower` the best dual value (at `dual`).
    For a single cone `primal` is an (x, z) pair; for several cones it is
    a list of such pairs.
    """

    status: Status
    theta: float
    lower: float
    primal: object
    dual: np.ndarray
    radius: object
    iterations: int
    method: str
    notes: tuple = field(default_factory=tuple)

    @property
    def gap(self):
        return self.theta - self.lower


@dataclass
class Bracket:
    lo: float
    hi: float
    status: Status
    verdict: Verdict

    @property
    def width(self):
        return self.hi - self.lo


@dataclass
class BoundednessVerdict:
    status: Boundedness
    verdict: Verdict


class _Conic:
    """Flattened multi-block data: rows A y <= H with y = (x_1, z_1, ...)."""

    def __init__(self, inst, radii, fixed=False):
        if isinstance(inst, PocpInstance):
            inst = inst.as_multi()
        if not isinstance(inst, MultiConeInstance):
            raise TypeError("expected a PocpInstance or MultiConeInstance")
        self.inst = inst
        self.blocks = inst.blocks
        if np.isscalar(radii):
            radii = [radii] * len(self.blocks)
        self.radii = [float(r) for r in radii]
        if len(self.radii) != len(self.blocks):
            raise ValueError("one radius per cone block is required")
        if any(r < 0 or not np.isfinite(r) for r in self.radii):
            raise ValueError("radii must be finite and nonnegative")
        self.fixed = fixed
        self.F = [np.array(Fk, dtype=float) for Fk in inst.F]
        self.G = [np.array(Gk, dtype=float) for Gk in inst.G]
        self.H = np.array(inst.H, dtype=float)
        self.p = [float(b.p) for b in self.blocks]
        self.q = [p / (p - 1.0) for p in self.p]
        self.m = inst.m
        rownorm = np.zeros(self.m)
        for Fk, Gk, R in zip(self.F, self.G, self.radii):
            rownorm += R * (np.sqrt((Fk ** 2).sum(axis=1) + Gk ** 2))
        self.scale = 1.0 + float(rownorm.max()) + float(np.abs(self.H).max())

    def rows(self, points):
        """Row values f_i^T x + g_i z - h_i at a list of block points."""
        val = -self.H.copy()
        for Fk, Gk, (x, z) in zip(self.F, self.G, points):
            val += Fk @ x + Gk * z
        return val

    def dual_value(self, lam):
        lam = np.asarray(lam, dtype=float)
        total = -float(lam @ self.H)
        for Fk, Gk, p, R in zip(self.F, self.G, self.p, self.radii):
            f, g = Fk.T @ lam, float(Gk @ lam)
            if self.fixed:
                total += support_on_slice(f, g, R, p)[0]
            else:
                total += support_on_cap(f, g, R, p)[0]
        return total

    def best_response(self, lam):
        pts = []
        for Fk, Gk, p, R in zip(self.F, self.G, self.p, self.radii):
            f, g = Fk.T @ lam, float(Gk @ lam)
            if self.fixed:
                _, x = support_on_slice(f, g, R, p)
                pts.append((x, R))
            else:
                _, x, z = support_on_cap(f, g, R, p)
                pts.append((x, z))
        return pts

    def clean(self, points):
        """Pull rounding excursions back into the cone and under the cap."""
        out = []
        for (x, z), p, R in zip(points, self.p, self.radii):
            x = np.array(x, dtype=float)
            z = min(float(z), R)
            z = max(z, 0.0)
            nx = lp_norm(x, p)
            if nx > z:
                x = x * (z / nx) if nx > 0 else x
            out.append((x, z))
        return out


def _apex_solution(prob):
    """All radii zero: the only point is the apex, solved exactly."""
    pts = [(np.zeros(b.n), 0.0) for b in prob.blocks]
    hi = float(np.max(prob.rows(pts)))
    lam = np.zeros(prob.m)
    lam[int(np.argmax(-prob.H))] = 1.0
    return hi, pts, prob.dual_value(lam), lam, 0


class _Barrier:
    """Central path for min theta s.t. rows <= theta on the capped cones."""

    def __init__(self, prob):
        self.prob = prob
        idx = 1
        self.layout = []
        for b, R in zip(prob.blocks, prob.radii):
            n = b.n
            if R == 0.0:
                self.layout.append(None)
                continue
            ix = slice(idx, idx + n)
            idx += n
            iz = None
            if not prob.fixed:
                iz = idx
                idx += 1
            it = slice(idx, idx + n)
            idx += n
            self.layout.append((ix, iz, it))
        self.N = idx
        M = np.zeros((prob.m, self.N))
        M[:, 0] = 1.0
        c0 = prob.H.copy()
        for k, lay in enumerate(self.layout):
            if lay is None:
                continue
            ix, iz, _ = lay
            M[:, ix] = -prob.F[k]
            if iz is None:
                c0 = c0 - prob.G[k] * prob.radii[k]
            else:
                M[:, iz] = -prob.G[k]
        self.M, self.c0 = M, c0
        self.nu = prob.m + sum(1 + (0 if prob.fixed else 1) + 3 * b.n
                               for b, lay in zip(prob.blocks, self.layout) if lay is not None)

    def start(self):
        prob = self.prob
        v = np.zeros(self.N)
        for k, lay in enumerate(self.layout):
            if lay is None:
                continue
            ix, iz, it = lay
            R, n = prob.radii[k], prob.blocks[k].n
            z = R if iz is None else 0.5 * R
            if iz is not None:
                v[iz] = z
            v[it] = z / (2.0 * n)
        s = self.M @ v + self.c0
        # margin relative to the data so it survives rounding on large rows
        v[0] = max(0.0, -float(s.min())) + max(1.0, 1e-3 * prob.scale)
        return v

    def z_of(self, v, k):
        ix, iz, it = self.layout[k]
        return self.prob.radii[k] if iz is None else v[iz]

    def points(self, v):
        pts = []
        for k, lay in enumerate(self.layout):
            if lay is None:
                pts.append((np.zeros(self.prob.blocks[k].n), 0.0))
            else:
                pts.append((v[lay[0]].copy(), float(self.z_of(v, k))))
        return pts

    def evaluate(self, v, tbar, need_derivs=True):
        """Value, gradient and Hessian of tbar*theta + barrier; value inf off the domain."""
        prob = self.prob
        s = self.M @ v + self.c0
        if np.any(s <= 0):
            return np.inf, None, None
        val = tbar * v[0] - np.sum(np.log(s))
        if need_derivs:
            g = np.zeros(self.N)
            g[0] = tbar
            inv = 1.0 / s
            g -= self.M.T @ inv
            Hm = (self.M * (inv ** 2)[:, None]).T @ self.M
        for k, lay in enumerate(self.layout):
            if lay is None:
                continue
            ix, iz, it = lay
            R, p = prob.radii[k], prob.p[k]
            a = 1.0 / p
            b = 1.0 - a
            x, t = v[ix], v[it]
            z = R if iz is None else v[iz]
            if z <= 0 or np.any(t <= 0):
                return np.inf, None, None
            if iz is not None:
                cap = R - z
                if cap <= 0:
                    return np.inf, None, None
                val -= np.log(cap)
            bud = z - t.sum()
            if bud <= 0:
                return np.inf, None, None
            val -= np.log(bud)
            logP = 2 * a * np.log(t) + 2 * b * np.log(z)
            P = np.exp(logP)
            psi = P - x * x
            if np.any(psi <= 0) or np.any(psi <= 1e-300 * P):
                return np.inf, None, None
            val -= np.sum(np.log(psi)) + (1 - a) * np.sum(np.log(t)) + len(t) * a * np.log(z)
            if not need_derivs:
                continue
            ipsi = 1.0 / psi
            Pt = 2 * a * P / t
            Pz = 2 * b * P / z
            Ptt = 2 * a * (2 * a - 1) * P / t ** 2
            Pzz = 2 * b * (2 * b - 1) * P / z ** 2
            Ptz = 4 * a * b * P / (t * z)
            jt = np.arange(it.start, it.stop)
            jx = np.arange(ix.start, ix.stop)
            # gradient
            g[jt] += -Pt * ipsi - (1 - a) / t
            g[jx] += 2 * x * ipsi
            # Hessian: grad psi grad psi^T / psi^2 - hess psi / psi + log terms
            Htt = Pt * Pt * ipsi ** 2 - Ptt * ipsi + (1 - a) / t ** 2
            Htx = Pt * (-2 * x) * ipsi ** 2
            Hxx = 4 * x * x * ipsi ** 2 + 2 * ipsi
            Hm[jt, jt] += Htt
            Hm[jx, jx] += Hxx
            Hm[jt, jx] += Htx
            Hm[jx, jt] += Htx
            db = np.zeros(self.N)
            db[jt] = -1.0
            if iz is not None:
                g[iz] += np.sum(-Pz * ipsi) - len(t) * a / z + 1.0 / cap
                Htz = Pt * Pz * ipsi ** 2 - Ptz * ipsi
                Hxz = (-2 * x) * Pz * ipsi ** 2
                Hm[jt, iz] += Htz
                Hm[iz, jt] += Htz
                Hm[jx, iz] += Hxz
                Hm[iz, jx] += Hxz
                Hm[iz, iz] += np.sum(Pz * Pz * ipsi ** 2 - Pzz * ipsi) + len(t) * a / z ** 2 + 1.0 / cap ** 2
                db[iz] = 1.0
            g -= db / bud
            Hm += np.outer(db, db) / bud ** 2
        if not need_derivs:
            return val, None, None
        return val, g, Hm

    def center(self, v, tbar, max_steps=60):
        steps = 0
        for _ in range(max_steps):
            f, g, Hm = self.evaluate(v, tbar)
            if g is None:
                raise FloatingPointError("central-path iterate left the barrier domain")
            diag = np.sqrt(np.abs(np.diag(Hm))) + 1e-300
            Hs = Hm / np.outer(diag, diag)
            try:
                d = -np.linalg.solve(Hs + 1e-14 * np.eye(self.N), g / diag) / diag
            except np.linalg.LinAlgError:
                d = -np.linalg.lstsq(Hs, g / diag, rcond=None)[0] / diag
            dec = -float(g @ d)
            steps += 1
            if dec < 1e-12 or not np.isfinite(dec):
                break
            step = 1.0
            while step > 1e-12:
                fn, _, _ = self.evaluate(v + step * d, tbar, need_derivs=False)
                if fn <= f - 0.25 * step * dec:
                    break
                step *= 0.5
            else:
                break
            v = v + step * d
            if dec < 1e-9 and step == 1.0:
                break
        return v, steps


def _stationary_weights(prob, pts, act):
    """Nonnegative weights on rows `act` meeting per-block stationarity, or None."""
    eqs, kap = [], 0
    blocks = []
    for (x, z), Fk, Gk, p, R in zip(pts, prob.F, prob.G, prob.p, prob.radii):
        if R == 0.0 or z <= 1e-12 * max(R, 1.0):
            continue
        nx = lp_norm(x, p)
        under_cap = (not prob.fixed) and z < R * (1 - 1e-9)
        if nx < z * (1 - 1e-7) or nx == 0.0:
            blocks.append((Fk[act], Gk[act], None, under_cap))
        else:
            w = -np.sign(x) * (np.abs(x) / nx) ** (p - 1.0)
            blocks.append((Fk[act], Gk[act], w, under_cap))
            kap += 1
    na = act.size
    ncol = na + kap
    ki = na
    for Fa, Ga, w, under_cap in blocks:
        if w is None:
            for row in Fa.T:
                eqs.append(np.concatenate([row, np.zeros(kap)]))
            if under_cap:
                eqs.append(np.concatenate([Ga, np.zeros(kap)]))
        else:
            for j, row in enumerate(Fa.T):
                e = np.concatenate([row, np.zeros(kap)])
                e[ki] = -w[j]
                eqs.append(e)
            if under_cap:
                e = np.concatenate([Ga, np.zeros(kap)])
                e[ki] = -lp_norm(w, p / (p - 1.0))
                eqs.append(e)
            ki += 1
    A = np.array(eqs).reshape(-1, ncol) if eqs else np.zeros((0, ncol))
    # the normalisation row carries weight comparable to the data rows
    wt = max(1.0, float(np.abs(A).max(initial=0.0)))
    A = np.vstack([A, wt * np.concatenate([np.ones(na), np.zeros(kap)])])
    b = np.zeros(A.shape[0])
    b[-1] = wt
    sol = nnls(A, b, maxiter=50 * ncol)[0]
    lam_a = sol[:na]
    if lam_a.sum() <= 0:
        return None
    lam = np.zeros(prob.m)
    lam[act] = lam_a / lam_a.sum()
    return lam


def polish_dual(prob, pts, hi, lo):
    """Re-solve the dual weights from stationarity at a near-optimal primal point.

    Rows within a band of the worst violation are taken as active, for a
    ladder of band widths.  Each block contributes its stationarity: zero
    aggregate row on strictly interior blocks, alignment with the p-norm
    gradient on boundary blocks, and a vanishing support value when the
    height is strictly under the cap.  Returns the best simplex vector by
    dual value, or None.
    """
    rows = prob.rows(pts)
    bands = {max(1e3 * max(hi - lo, 0.0), 1e-9 * prob.scale)}
    bands.update(f * prob.scale for f in (1e-12, 1e-10, 1e-8, 1e-6))
    best, best_val, seen = None, -np.inf, set()
    for band in sorted(bands):
        act = np.flatnonzero(rows >= hi - band)
        key = tuple(act)
        if act.size == 0 or key in seen:
            continue
        seen.add(key)
        try:
            lam = _stationary_weights(prob, pts, act)
        except (RuntimeError, ValueError, np.linalg.LinAlgError):
            continue
        if lam is None:
            continue
        val = prob.dual_value(lam)
        if val > best_val:
            best, best_val = lam, val
    return best


def _run_barrier(prob, stop, budget):
    """Follow the central path until stop(lo, hi) holds or progress stalls."""
    bar = _Barrier(prob)
    v = bar.start()
    tbar = 1.0 / prob.scale
    best_hi, best_pts = np.inf, None
    best_lo, best_lam = -np.inf, None
    iters = 0
    while iters < budget:
        v, steps = bar.center(v, tbar, max_steps=min(60, budget - iters))
        iters += steps
        pts = prob.clean(bar.points(v))
        hi = float(np.max(prob.rows(pts)))
        if hi < best_hi:
            best_hi, best_pts = hi, pts
        s = bar.M @ v + bar.c0
        lam = 1.0 / (tbar * s)
        lam = lam / lam.sum()
        lo = prob.dual_value(lam)
        if lo > best_lo:
            best_lo, best_lam = lo, lam
        if not stop(best_lo, best_hi) and best_hi - best_lo < 1e-4 * prob.scale:
            lam = polish_dual(prob, best_pts, best_hi, best_lo)
            if lam is not None:
                lo = prob.dual_value(lam)
                if lo > best_lo:
                    best_lo, best_lam = lo, lam
        assert best_lo <= best_hi + 1e-9 * prob.scale, "weak duality violated"
        if stop(best_lo, best_hi):
            break
        if bar.nu / tbar < 1e-15 * prob.scale:
            break
        tbar *= 8.0
    return best_hi, best_pts, best_lo, best_lam, iters


def project_simplex(v):
    """Euclidean projection onto the probability simplex by sort and threshold."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    cond = u - css / k > 0
    rho = k[cond][-1]
    return np.maximum(v - css[rho - 1] / rho, 0.0)


def _run_subgradient(prob, stop, budget, check_every=50):
    """Projected supergradient ascent on D over the simplex, step a/sqrt(t)."""
    m = prob.m
    lam = np.full(m, 1.0 / m)
    A_norm = max(prob.scale, 1.0)
    a = A_norm
    best_hi, best_pts = np.inf, None
    best_lo, best_lam = -np.inf, None
    avg = None
    weight = 0.0
    it = 0
    for it in range(1, budget + 1):
        pts = prob.best_response(lam)
        lo = prob.dual_value(lam)
        if lo > best_lo:
            best_lo, best_lam = lo, lam.copy()
        step = a / np.sqrt(it)
        # ergodic average of best responses with step weights
        if avg is None:
            avg = [(x * step, z * step) for x, z in pts]
        else:
            avg = [(ax + x * step, az + z * step) for (ax, az), (x, z) in zip(avg, pts)]
        weight += step
        grad = prob.rows(pts)
        lam = project_simplex(lam + step * grad / A_norm ** 2)
        if it % check_every == 0 or it == budget:
            mean = prob.clean([(ax / weight, az / weight) for ax, az in avg])
            hi = float(np.max(prob.rows(mean)))
            if hi < best_hi:
                best_hi, best_pts = hi, mean
            assert best_lo <= best_hi + 1e-9 * prob.scale, "weak duality violated"
            if stop(best_lo, best_hi):
                break
    return best_hi, best_pts, best_lo, best_lam, it


def _solve(prob, stop, budget, method):
    if all(r == 0.0 for r in prob.radii):
        return _apex_solution(prob)
    if method == "barrier":
        return _run_barrier(prob, stop, budget)
    if method == "subgradient":
        return _run_subgradient(prob, stop, budget)
    raise ValueError(f"unknown method {method!r}")


def resolve_radius(instance, R):
    """Numeric radius; 'auto' evaluates the radius bound, capped for floating point."""
    notes = ()
    if R is None or (isinstance(R, str) and R == "auto"):
        from .bounds import radius_bound

        inst = instance if isinstance(instance, PocpInstance) else None
        if inst is None:
            raise ValueError("radius 'auto' needs a single-cone instance")
        logR = radius_bound(inst).logR_value
        R = AUTO_RADIUS_CAP if logR >= np.log2(AUTO_RADIUS_CAP) else 2.0 ** logR
        notes = (f"radius from the bound 2^{logR} capped at {AUTO_RADIUS_CAP:g} (heuristic)",)
    R = float(R)
    if not R > 0:
        raise DomainError("radius must be positive")
    return R, notes


def _check_radii(radii):
    radii = [radii] if np.isscalar(radii) else list(radii)
    if not all(float(r) > 0 for r in radii):
        raise DomainError("radii must be positive")


def _finish(status, prob, res, method, notes, single):
    hi, pts, lo, lam, iters = res
    if status is Status.INFEASIBLE and not prob.fixed:
        notes = notes + (CAP_NOTE,)
    primal = pts[0] if (single and pts is not None) else pts
    radius = prob.radii[0] if single else list(prob.radii)
    return Verdict(status, hi, lo, primal, lam, radius, iters, method, notes)


def _decide(prob, eps, budget, method, notes, single):
    if not eps > 0:
        raise DomainError("eps must be positive")

    def stop(lo, hi):
        return hi <= eps or lo >= eps

    res = _solve(prob, stop, budget, method)
    hi, _, lo, _, _ = res
    if hi <= eps:
        status = Status.FEASIBLE
    elif lo >= eps:
        status = Status.INFEASIBLE
    else:
        status = Status.INDETERMINATE
    return _finish(status, prob, res, method, notes, single)


def decide(instance, R="auto", eps=DEFAULT_EPS, budget=DEFAULT_BUDGET, method="barrier"):
    """Decide Fx + Gz <= H on ||x||_p <= z <= R up to tolerance eps.

    Feasible: a cone point violates no row by more than eps.
    Infeasible: a dual weight vector certifies discrepancy >= eps.
    Indeterminate: neither certificate was reached within the budget.
    """
    R, notes = resolve_radius(instance, R)
    return _decide(_Conic(instance, R), eps, budget, method, notes, True)


def decide_multi(instance, radii, eps=DEFAULT_EPS, budget=DEFAULT_BUDGET, method="barrier"):
    """`decide` for several independent cones, one radius per block."""
    _check_radii(radii)
    return _decide(_Conic(instance, radii), eps, budget, method, (), False)


def _discrepancy(prob, eps, budget, method, notes, single):
    if not eps > 0:
        raise DomainError("eps must be positive")

    def stop(lo, hi):
        return hi - lo <= eps

    res = _solve(prob, stop, budget, method)
    hi, _, lo, _, _ = res
    status = Status.FEASIBLE if hi <= 0 else Status.INFEASIBLE if lo > 0 else Status.INDETERMINATE
    if hi - lo > eps:
        status = Status.INDETERMINATE
    verdict = _finish(status, prob, res, method, notes, single)
    return Bracket(lo, hi, status, verdict)


def discrepancy(instance, R="auto", eps=DEFAULT_EPS, budget=DEFAULT_BUDGET, method="barrier"):
    """Bracket [lo, hi] around the smallest uniform row relaxation on the capped cone.

    Status is Indeterminate when the bracket is wider than eps.
    """
    R, notes = resolve_radius(instance, R)
    return _discrepancy(_Conic(instance, R), eps, budget, method, notes, True)


def discrepancy_multi(instance, radii, eps=DEFAULT_EPS, budget=DEFAULT_BUDGET, method="barrier"):
    _check_radii(radii)
    return _discrepancy(_Conic(instance, radii), eps, budget, method, (), False)


def dual_value(instance, lam, R, fixed=False):
    """Closed-form dual value of simplex weights `lam` (a lower bound on the discrepancy)."""
    return _Conic(instance, R, fixed=fixed).dual_value(lam)


def primal_value(instance, points, R=None):
    """Largest row violation at a cone point (or list of block points)."""
    prob = _Conic(instance, 0.0 if R is None else R)
    if isinstance(instance, PocpInstance) or (isinstance(points, tuple) and len(points) == 2
                                              and np.isscalar(points[1])):
        points = [points]
    return float(np.max(prob.rows(points)))


def is_bounded(instance, eps=DEFAULT_EPS, budget=DEFAULT_BUDGET, method="barrier"):
    """Boundedness of {Fx + Gz <= H} on the cone via its recession system.

    The recession cone is nontrivial exactly when Fx + Gz <= 0 has a
    solution on the slice z = 1; a feasible slice means Unbounded.
    """
    if not isinstance(instance, PocpInstance):
        raise TypeError("is_bounded expects a PocpInstance")
    prob = _Conic(instance.homogenized(), 1.0, fixed=True)
    v = _decide(prob, eps, budget, method, ("recession slice z = 1",), True)
    status = {Status.FEASIBLE: Boundedness.UNBOUNDED, Status.INFEASIBLE: Boundedness.BOUNDED,
              Status.INDETERMINATE: Boundedness.INDETERMINATE}[v.status]
    return BoundednessVerdict(status, v)
