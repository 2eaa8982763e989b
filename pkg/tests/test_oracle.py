from fractions import Fraction

import numpy as np
import pytest

from pocp.feasibility import discrepancy
from pocp.geometry import Membership, in_cone
from pocp.instance import PocpInstance
from pocp.oracle import OracleBudgetError, dual_grid_theta, exact_membership, grid_theta


def test_exact_membership_examples():
    assert exact_membership([3, 4], 5, 2)
    assert not exact_membership([1, 1], 1, 4)
    with pytest.raises(TypeError):
        exact_membership([1, 1], 2 ** 0.25, 4)
    with pytest.raises(ValueError):
        exact_membership([1, 1], 2, "3/2")
    assert not exact_membership([0, 0], Fraction(-1, 3), 2)


def test_exact_membership_agrees_with_in_cone():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(10_000):
        p = int(rng.integers(2, 9))
        n = int(rng.integers(2, 5))
        x = [Fraction(int(a), int(b)) for a, b in zip(rng.integers(-50, 51, n), rng.integers(1, 20, n))]
        z = Fraction(int(rng.integers(-5, 60)), int(rng.integers(1, 20)))
        nx = float(sum(abs(v) ** p for v in x)) ** (1 / p)
        if abs(float(z) - nx) <= 1e-8 * max(1.0, nx):
            continue
        checked += 1
        inside = in_cone([float(v) for v in x], float(z), p, tol=1e-9) is not Membership.EXTERIOR
        assert exact_membership(x, z, p) == inside
    assert checked > 9_000


def test_grid_theta_examples():
    slack = PocpInstance([[0, 0]], [0], [1], 2)
    est = grid_theta(slack, 3.0, resolution=10_000, refine_rounds=5)
    assert est.value == pytest.approx(-1.0)
    contra = PocpInstance([[0, 0]], [0], [-1], 3)
    assert grid_theta(contra, 3.0, resolution=10_000, refine_rounds=5).value == 1.0


def test_dual_grid_examples():
    inst = PocpInstance([[2, 1]], [1], [3], 2)
    est = dual_grid_theta(inst, 4.0, resolution=1000)
    # m = 1: the single weight is exact
    assert est.gap == 0 and est.value == pytest.approx(min(0, 4 * (1 - 5 ** 0.5)) - 3)
    sym = PocpInstance([[1, 0], [-1, 0]], [0, 0], [-1, -1], 2)
    est = dual_grid_theta(sym, 4.0, resolution=1000)
    assert np.asarray(est.point) == pytest.approx([0.5, 0.5], abs=1e-6)
    slack = PocpInstance([[0, 0], [0, 0]], [0, 0], [1, 2], 2)
    assert dual_grid_theta(slack, 4.0, resolution=1000).value <= 0


def test_budgets():
    big = PocpInstance([[1, 1, 1, 1]], [0], [0], 2)
    with pytest.raises(OracleBudgetError):
        grid_theta(big, 1.0)
    small = PocpInstance([[1, 1]], [0], [0], 2)
    with pytest.raises(OracleBudgetError):
        grid_theta(small, 1.0, resolution=2 * 10 ** 6)
    many = PocpInstance([[1, 1]] * 4, [0] * 4, [0] * 4, 2)
    with pytest.raises(OracleBudgetError):
        dual_grid_theta(many, 1.0)


def test_weak_duality_between_oracles():
    rng = np.random.default_rng(4)
    for k in range(10):
        n, m = 2 + k % 2, 1 + k % 3
        inst = PocpInstance(rng.integers(-6, 7, (m, n)).tolist(), rng.integers(-6, 7, m).tolist(),
                            rng.integers(-6, 7, m).tolist(), ["2", "3", "3/2", "4/3", "4"][k % 5])
        up = grid_theta(inst, 5.0, resolution=20_000, refine_rounds=10)
        low = dual_grid_theta(inst, 5.0, resolution=5_000, refine_rounds=10)
        assert up.value >= low.value - 1e-9
        assert up.value - up.gap <= low.value + low.gap + 1e-9
        br = discrepancy(inst, R=5.0)
        assert max(br.lo, low.value - low.gap) <= min(br.hi, up.value + up.gap) + 1e-9
