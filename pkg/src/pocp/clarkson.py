"""Randomised row sampling for instances with many more rows than dimensions.

Sub-instances on row subsets I are solved with the feasibility engine;
violators of a subset are the rows whose violation at the least-norm point
of I exceeds theta(I) + eps.  Multiplicities of violating rows are doubled
when their weight is small, until a sample has no violators.
"""
from dataclasses import dataclass, field

import numpy as np

from .feasibility import CAP_NOTE, DEFAULT_BUDGET, DEFAULT_EPS, Status, Verdict, discrepancy, resolve_radius
from .geometry import DomainError, IndeterminateError, project_cone
from .instance import PocpInstance

SAMPLE_FACTOR = 6
MAX_ROUNDS = 200


@dataclass
class BasisState:
    I: list
    theta_lo: float
    theta_hi: float
    point: tuple
    violated: list = field(default_factory=list)

    @property
    def theta_I(self):
        return 0.5 * (self.theta_lo + self.theta_hi)


def theta_of(I, instance, R, eps=DEFAULT_EPS, budget=DEFAULT_BUDGET):
    """Discrepancy bracket of the instance restricted to rows I."""
    I = sorted(set(I))
    if not I:
        raise ValueError("row subset must be nonempty")
    return discrepancy(instance.subset(I), R=R, eps=eps, budget=budget)


def _row_data(instance, I):
    F, G, H = instance.arrays()
    A = np.hstack([F[I], G[I, None]])
    return A, H[I]


def least_norm_point(I, theta, instance, R, eps=DEFAULT_EPS, budget=DEFAULT_BUDGET,
                     fallback=None, max_cycles=3000):
    """Smallest-norm (x, z) in the capped cone meeting rows I at level theta.

    Dykstra's alternating projections from the origin over the row
    halfspaces and the capped cone converge to the projection of the origin
    onto their intersection.  If they stall before reaching rows within
    eps/2, `fallback` (a certified point at that level) is returned instead;
    without one the run is Indeterminate.
    """
    I = sorted(set(I))
    A, h = _row_data(instance, I)
    b = h + float(theta)
    p = instance.p
    R = float(R)
    n = instance.n
    y = np.zeros(n + 1)
    if np.all(b >= 0):
        return np.zeros(n), 0.0
    norms2 = (A ** 2).sum(axis=1)
    k = len(I)
    corr = np.zeros((k + 1, n + 1))
    for _ in range(max_cycles):
        prev = y.copy()
        for i in range(k):
            w = y + corr[i]
            if norms2[i] == 0.0:
                new = w
            else:
                excess = A[i] @ w - b[i]
                new = w - max(excess, 0.0) / norms2[i] * A[i] if excess > 0 else w
            corr[i] = w - new
            y = new
        w = y + corr[k]
        px, pz = project_cone(w[:n], w[n], p, R=R)
        new = np.concatenate([px, [pz]])
        corr[k] = w - new
        y = new
        if np.linalg.norm(y - prev) <= 1e-12 * max(1.0, np.linalg.norm(y)):
            break
    if np.max(A @ y - b) <= eps / 2:
        return y[:n], float(y[n])
    if fallback is not None:
        fx, fz = fallback
        if np.max(A @ np.concatenate([fx, [fz]]) - b) <= eps:
            return np.asarray(fx, dtype=float), float(fz)
        raise DomainError("fallback point does not meet the rows at this level")
    raise IndeterminateError("least-norm iteration did not converge", best=(y[:n], float(y[n])))


def _violators(instance, I, point, theta, eps):
    F, G, H = instance.arrays()
    x, z = point
    slack = F @ x + G * z - H - theta
    inside = set(I)
    return [j for j in range(instance.m) if j not in inside and slack[j] > eps]


def violation_test(I, j, instance, R, eps=DEFAULT_EPS, budget=DEFAULT_BUDGET):
    """Whether row j is violated by more than eps at the least-norm point of I."""
    if j in set(I):
        raise ValueError("j must lie outside I")
    state = _state(I, instance, R, eps, budget)
    return j in _violators(instance, I, state.point, state.theta_hi, eps)


def _state(I, instance, R, eps, budget):
    br = theta_of(I, instance, R, eps / 4, budget)
    if br.hi - br.lo > eps:
        raise IndeterminateError("sub-instance bracket did not close", best=list(I),
                                 residual=br.hi - br.lo)
    pt = least_norm_point(I, br.hi, instance, R, eps, budget, fallback=br.verdict.primal)
    return BasisState(sorted(set(I)), br.lo, br.hi, pt)


def extract_basis(S, instance, R, eps=DEFAULT_EPS, budget=DEFAULT_BUDGET):
    """Inclusion-minimal J within S with theta(J) >= theta(S) - eps.

    The shortest prefix by decreasing dual weight that reaches the value is
    found by bisection; rows are then dropped one at a time while it is kept.
    """
    S = sorted(set(S))
    full = theta_of(S, instance, R, eps / 4, budget)
    target = full.lo - eps
    lam = np.asarray(full.verdict.dual, dtype=float)
    order = [S[k] for k in np.argsort(-lam, kind="stable")]
    # smallest prefix reaching the value: doubling, then bisection
    def reaches(k):
        return theta_of(order[:k], instance, R, eps / 4, budget).hi >= target

    hi = 1
    while hi < len(order) and not reaches(hi):
        hi *= 2
    hi = min(hi, len(order))
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if reaches(mid):
            hi = mid
        else:
            lo = mid
    J = list(order[:hi])
    for i in list(J):
        if len(J) == 1:
            break
        trial = [j for j in J if j != i]
        if theta_of(trial, instance, R, eps / 4, budget).hi >= target:
            J = trial
    return sorted(J), full


def clarkson_solve(instance, R="auto", eps=DEFAULT_EPS, budget=DEFAULT_BUDGET, seed=0):
    """Decide the instance through sampled sub-instances.

    Returns (Verdict, BasisState).  The verdict bracket combines the dual
    bound of the final sample (valid for every superset) with the row
    violation of its point over all rows.
    """
    if not isinstance(instance, PocpInstance):
        raise TypeError("clarkson_solve expects a PocpInstance")
    R, notes = resolve_radius(instance, R)
    m, D = instance.m, instance.n + 1
    size = SAMPLE_FACTOR * D * D
    rng = np.random.default_rng(seed)
    mult = np.ones(m)
    rounds = 0
    if m <= D or m <= size:
        S = list(range(m))
        state = _state(S, instance, R, eps, budget)
    else:
        state = None
        while True:
            rounds += 1
            if rounds > MAX_ROUNDS:
                raise IndeterminateError("sampling rounds exhausted", best=state)
            S = sorted(rng.choice(m, size=size, replace=False, p=mult / mult.sum()).tolist())
            state = _state(S, instance, R, eps, budget)
            V = _violators(instance, S, state.point, state.theta_hi, eps)
            state.violated = V
            if not V:
                break
            if mult[V].sum() <= mult.sum() / (3 * D):
                mult[V] *= 2
    F, G, H = instance.arrays()
    x, z = state.point
    hi = float(np.max(F @ x + G * z - H))
    lo = state.theta_lo
    if hi <= eps:
        status = Status.FEASIBLE
    elif lo >= eps:
        status = Status.INFEASIBLE
    else:
        status = Status.INDETERMINATE
    if status is Status.INFEASIBLE:
        notes = tuple(notes) + (CAP_NOTE,)
    J, _ = extract_basis(state.I, instance, R, eps, budget)
    basis = _state(J, instance, R, eps, budget)
    basis.violated = _violators(instance, J, basis.point, basis.theta_hi, eps)
    verdict = Verdict(status, hi, lo, (x, z), None, R, rounds, "clarkson", tuple(notes))
    return verdict, basis
