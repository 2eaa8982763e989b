"""Linear objectives over p-order cone constraints by bisection on the objective level."""
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, lcm, log2

import numpy as np

from .feasibility import DEFAULT_BUDGET, DEFAULT_EPS, Status, decide, decide_multi
from .geometry import IndeterminateError
from .instance import MultiConeInstance, PocpInstance, integer_row


class InfeasibleError(RuntimeError):
    """The constraints admit no point with objective at or below the upper level."""


@dataclass
class ObjectiveProblem:
    """Minimise c^T y + offset over the instance, y the stacked (x, z) vector.

    lb and ub bracket the optimum of c^T y (offset excluded); eps is the
    final bracket width.
    """

    base: object
    c: tuple
    lb: object = None
    ub: object = None
    eps: float = 1e-4
    offset: Fraction = Fraction(0)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        dim = self.base.n + 1 if isinstance(self.base, PocpInstance) else self.base.dim
        if len(self.c) != dim:
            raise ValueError(f"objective has {len(self.c)} entries, instance has {dim} variables")
        self.c = tuple(Fraction(v) for v in self.c)


@dataclass
class OptimizeResult:
    lo: Fraction
    hi: Fraction
    point: object
    calls: int
    notes: list

    @property
    def value(self):
        return float((self.lo + self.hi) / 2)


def with_level(base, c, level):
    """Instance with the extra row c^T y <= level (scaled to integers)."""
    coeffs, rhs = integer_row(c, level)
    if isinstance(base, PocpInstance):
        n = base.n
        return base.with_rows([coeffs[:n]], [coeffs[n]], [rhs])
    return base.with_rows([coeffs], [rhs])


def level_instance(base, c, level):
    """with_level with every row scaled alike; returns (instance, factor).

    A dyadic level makes the new row's integer scaling large; scaling the
    other rows by the same factor keeps the system's conditioning, and an
    oracle tolerance eps * factor means eps in the original units.
    """
    vals = [Fraction(v) for v in c] + [Fraction(level)]
    k = 1
    for v in vals:
        k = lcm(k, v.denominator)
    coeffs = [int(v * k) for v in vals[:-1]]
    rhs = int(vals[-1] * k)
    big = base.scaled(k)
    if isinstance(base, PocpInstance):
        n = base.n
        return big.with_rows([coeffs[:n]], [coeffs[n]], [rhs]), k
    return big.with_rows([coeffs], [rhs]), k


def _default_bracket(prob, radius):
    # on the capped cone every |y_k| <= R, so |c^T y| <= ||c||_1 R
    if isinstance(prob.base, PocpInstance):
        span = sum(abs(v) for v in prob.c) * Fraction(radius)
    else:
        span = Fraction(0)
        for k, at in enumerate(prob.base.offsets()):
            nk = prob.base.blocks[k].n + 1
            span += sum(abs(v) for v in prob.c[at:at + nk]) * Fraction(radius[k])
    return -span, span


def expected_calls(lb, ub, eps):
    width = Fraction(ub) - Fraction(lb)
    if width <= 0:
        return 0
    return max(0, ceil(log2(float(width / Fraction(eps)))))


def minimize(prob, R, budget=DEFAULT_BUDGET, oracle_eps=None):
    """Bisection on c^T y <= level with exact dyadic levels.

    One feasibility probe at ub precedes the search and is not counted;
    the search then makes exactly ceil(log2((ub - lb) / eps)) oracle calls.
    Returns an OptimizeResult whose [lo, hi] brackets the optimum of
    c^T y + offset, with a point certified at level hi.
    """
    multi = isinstance(prob.base, MultiConeInstance)
    if not multi and not isinstance(prob.base, PocpInstance):
        raise TypeError("base must be a PocpInstance or MultiConeInstance")
    radius = [float(r) for r in R] if multi else float(R)
    if multi and len(radius) != len(prob.base.blocks):
        raise ValueError("need one radius per cone block")
    notes = list(prob.notes)
    lb, ub = prob.lb, prob.ub
    if lb is None or ub is None:
        dlb, dub = _default_bracket(prob, radius)
        lb = dlb if lb is None else lb
        ub = dub if ub is None else ub
        notes.append("bracket from the cap: |c^T y| <= ||c||_1 R")
    lb = Fraction(lb).limit_denominator(2**40) if isinstance(lb, float) else Fraction(lb)
    ub = Fraction(ub).limit_denominator(2**40) if isinstance(ub, float) else Fraction(ub)
    if lb > ub:
        raise ValueError("lb must not exceed ub")
    eps_o = DEFAULT_EPS if oracle_eps is None else oracle_eps

    def oracle(level):
        inst, k = level_instance(prob.base, prob.c, level)
        if multi:
            return decide_multi(inst, radius, eps=eps_o * k, budget=budget)
        return decide(inst, R=radius, eps=eps_o * k, budget=budget)

    top = oracle(ub)
    if top.status is Status.INFEASIBLE:
        raise InfeasibleError(f"no feasible point with objective <= {float(ub)}")
    if top.status is Status.INDETERMINATE:
        raise IndeterminateError("feasibility at the upper level is undecided", best=(lb, ub))
    point = top.primal
    lo, hi = lb, ub
    n_calls = expected_calls(lb, ub, prob.eps)
    for _ in range(n_calls):
        mid = (lo + hi) / 2
        v = oracle(mid)
        if v.status is Status.FEASIBLE:
            hi, point = mid, v.primal
        elif v.status is Status.INFEASIBLE:
            lo = mid
        else:
            err = IndeterminateError(f"oracle undecided at level {float(mid)}",
                                     best=(lo + prob.offset, hi + prob.offset))
            raise err
    assert hi - lo <= Fraction(prob.eps) or n_calls == 0
    return OptimizeResult(lo + prob.offset, hi + prob.offset, point, n_calls, notes)


def objective_value(prob, point):
    """c^T y + offset at a point (single (x, z) or a list of block points)."""
    if isinstance(prob.base, PocpInstance):
        y = np.concatenate([np.asarray(point[0], dtype=float), [float(point[1])]])
    else:
        y = np.concatenate([np.concatenate([np.asarray(x, dtype=float), [float(z)]]) for x, z in point])
    return float(np.dot([float(v) for v in prob.c], y) + float(prob.offset))
