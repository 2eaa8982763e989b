"""Solution-radius and discrepancy bound families, root separation, active-set reduction.

The asymptotic bounds hide a constant in the exponent; it is exposed as `c`
(default 1) and every report keeps the expression next to its evaluation.
Values are log2 quantities.
"""
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .geometry import IndeterminateError
from .instance import as_exponent


class Regime(Enum):
    EVEN_INTEGER = "EvenInteger"
    DUAL_EVEN = "DualEven"
    GENERAL = "General"


@dataclass(frozen=True)
class BoundReport:
    """log2 radius bound and log2 discrepancy bound of one instance shape.

    `logR_value` bounds log2 of a feasible solution's norm; a positive
    infeasible discrepancy is at least 2 ** (-log_disc_value).
    """

    regime: Regime
    logR_expr: str
    logR_value: float
    log_disc_expr: str
    log_disc_value: float
    n: int
    m: int
    r: int
    s: int
    tau: int
    c: float


def regime_of(p):
    p = as_exponent(p)
    r, s = p.r, p.s
    # p = 2 sits in both even cases; the dual-even exponent min{m, n} is the smaller one
    if s == r - 1 and r % 2 == 0:
        return Regime.DUAL_EVEN
    if s == 1 and r % 2 == 0:
        return Regime.EVEN_INTEGER
    return Regime.GENERAL


def _power(base, expo):
    if isinstance(expo, int) or (isinstance(expo, Fraction) and expo.denominator == 1):
        return base ** int(expo)
    return float(base) ** float(expo)


def bound_exponents(n, m, tau, p, c=1):
    """(regime, base, exponent, text) with log2 R = tau * base ** exponent."""
    p = as_exponent(p)
    r = p.r
    k = min(m, n)
    reg = regime_of(p)
    if reg is Regime.EVEN_INTEGER:
        return reg, r * k, c * n, f"tau*(r*min(m,n))^(c*n) = {tau}*({r}*{k})^({c}*{n})"
    if reg is Regime.DUAL_EVEN:
        return reg, r * k, c * k, f"tau*(r*min(m,n))^(c*min(m,n)) = {tau}*({r}*{k})^({c}*{k})"
    return (reg, r * n, c * n * k,
            f"tau*(r*n)^(c*n*min(m,n)) = {tau}*({r}*{n})^({c}*{n}*{k})")


def _shape(instance):
    if hasattr(instance, "blocks"):
        # several cones: take the worst exponent and the total cone dimension
        n = sum(b.n for b in instance.blocks)
        p = max((b.p for b in instance.blocks), key=lambda e: (e.r, e.s))
        return n, instance.m, instance.tau, p
    return instance.n, instance.m, instance.tau, instance.p


def radius_bound(instance, c=1):
    """Bound report for the instance with hidden constant `c` (> 0)."""
    if c <= 0:
        raise ValueError("hidden constant c must be positive")
    n, m, tau, p = _shape(instance)
    reg, base, expo, text = bound_exponents(n, m, tau, p, c)
    val = tau * _power(base, expo)
    return BoundReport(reg, "log2 R <= " + text, float(val), "log2 theta >= -(" + text + ")",
                       float(val), n, m, p.r, p.s, tau, c)


def mignotte_bound(h):
    """Lower bound 1/(1+h) on |alpha| for nonzero roots of an integer polynomial of height h."""
    h = int(h)
    if h < 1:
        raise ValueError("height must be a positive integer")
    return Fraction(1, 1 + h)


def height(coeffs):
    return max(abs(int(a)) for a in coeffs)


def reduce_active_set(instance, oracle):
    """Greedy row elimination keeping the oracle verdict.

    `oracle(sub_instance)` returns a Status-like value (or something with a
    `.status`).  A row is dropped when the verdict of the remaining rows
    matches the full system.  The result is inclusion-minimal.
    """
    def verdict(rows):
        out = oracle(instance.subset(rows))
        status = getattr(out, "status", out)
        if getattr(status, "name", "") == "INDETERMINATE":
            raise IndeterminateError("oracle returned Indeterminate", best=list(rows))
        return status

    keep = list(range(instance.m))
    target = verdict(keep)
    for i in list(keep):
        if len(keep) == 1:
            break
        trial = [j for j in keep if j != i]
        try:
            same = verdict(trial) == target
        except IndeterminateError as err:
            raise IndeterminateError("oracle returned Indeterminate", best=list(keep)) from err
        if same:
            keep = trial
    return keep
