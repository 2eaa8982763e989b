import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pocp.geometry import (DomainError, Membership, holder_aligner, in_cone, lp_norm, project_cone,
                           support_on_cap, support_on_slice)
from pocp.instance import RationalExponent

EXPS = ["2", "3", "4", "3/2", "4/3", "5/2"]
vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=5)


def test_lp_norm_examples():
    assert lp_norm([3, 4], "2") == 5.0
    for p in EXPS:
        assert lp_norm(np.ones(4), p) == pytest.approx(4 ** (1 / float(RationalExponent.parse(p))))
    assert lp_norm([0, 0], "3") == 0.0


def test_in_cone_examples():
    assert in_cone([3, 4], 5, "2", tol=0) is Membership.BOUNDARY
    for p in EXPS:
        assert in_cone([0, 0], 1, p) is Membership.INTERIOR
    assert in_cone([1, 1], 1, "2") is Membership.EXTERIOR
    assert in_cone([0, 0], -1, "2") is Membership.EXTERIOR


def test_holder_aligner_examples():
    assert holder_aligner([1, 0], "2") == pytest.approx([1, 0])
    assert holder_aligner([3, 4], "2") == pytest.approx([0.6, 0.8])
    u = holder_aligner([1, 1], "4")
    # maximiser of u.v over the unit 4-sphere by a dense angular grid
    t = np.linspace(0, 2 * np.pi, 200_001)
    pts = np.stack([np.cos(t), np.sin(t)], axis=1)
    pts /= (np.abs(pts) ** 4).sum(axis=1, keepdims=True) ** 0.25
    best = pts[np.argmax(pts.sum(axis=1))]
    assert u == pytest.approx(best, abs=1e-4)
    assert u == pytest.approx([2 ** -0.25, 2 ** -0.25], abs=1e-12)
    assert u.sum() == pytest.approx(2 ** 0.75)
    with pytest.raises(DomainError):
        holder_aligner([0, 0], "2")


@given(vec.filter(lambda v: max(abs(a) for a in v) > 1e-3), st.sampled_from(EXPS))
def test_holder_certificate(v, p):
    u = holder_aligner(v, p)
    q = float(RationalExponent.parse(p).conjugate())
    assert abs(u @ np.asarray(v) - lp_norm(v, q)) <= 1e-10 * max(1, lp_norm(v, q))
    assert abs(lp_norm(u, p) - 1) <= 1e-10


@given(vec, st.floats(0, 10), vec, st.floats(0, 10), st.sampled_from(EXPS))
def test_dual_cone_pairing(x, zx, y, zy, p):
    n = min(len(x), len(y))
    x, y = np.asarray(x[:n]), np.asarray(y[:n])
    pe = RationalExponent.parse(p)
    z = lp_norm(x, p) + zx
    w = lp_norm(y, float(pe.conjugate())) + zy
    assert x @ y + z * w >= -1e-9 * max(1.0, z * w)


def test_support_on_slice_examples():
    val, x = support_on_slice([0, 0], 1, 3, "2")
    assert val == 3 and x.tolist() == [0, 0]
    val, x = support_on_slice([3, 4], 0, 1, "2")
    # dense angular grid of the unit disk boundary
    t = np.linspace(0, 2 * np.pi, 1_000_001)
    grid = 3 * np.cos(t) + 4 * np.sin(t)
    assert val == pytest.approx(grid.min(), abs=1e-9) and val == pytest.approx(-5)
    assert x == pytest.approx([-0.6, -0.8])
    val, x, z = support_on_cap([3, 4], 10, 7, "2")
    assert val == 0 and z == 0 and x.tolist() == [0, 0]


def test_support_on_cap_negative_branch():
    val, x, z = support_on_cap([3, 4], 1, 2, "2")
    assert val == pytest.approx(2 * (1 - 5)) and z == 2


def test_project_cone_examples():
    for p in EXPS:
        x, z = project_cone([0.1, 0.2], 1.0, p)
        assert x.tolist() == [0.1, 0.2] and z == 1.0
        x, z = project_cone([0, 0], -5, p)
        assert x.tolist() == [0, 0] and z == 0
    x, z = project_cone([2, 0], 0, "2")
    assert x == pytest.approx([1, 0]) and z == pytest.approx(1)


def _cvx_projection(x0, z0, p, R=None):
    x = cp.Variable(len(x0))
    z = cp.Variable()
    cons = [cp.pnorm(x, float(RationalExponent.parse(p))) <= z]
    if R is not None:
        cons.append(z <= R)
    cp.Problem(cp.Minimize(cp.sum_squares(x - x0) + cp.square(z - z0)), cons).solve(solver=cp.CLARABEL)
    return x.value, float(z.value)


def _dist(x, z, x0, z0):
    return float(np.sum((np.asarray(x) - x0) ** 2) + (z - z0) ** 2)


@pytest.mark.parametrize("p", ["2", "3", "3/2", "4/3", "5/2"])
def test_project_cone_matches_cvxpy(p, rng):
    for _ in range(8):
        x0 = rng.normal(size=3) * 3
        z0 = float(rng.normal() * 3)
        for R in (None, 1.0):
            px, pz = project_cone(x0, z0, p, R=R)
            cx, cz = _cvx_projection(x0, z0, p, R=R)
            # the conic solver stops slightly suboptimal; compare distances, then points loosely
            assert _dist(px, pz, x0, z0) <= _dist(cx, cz, x0, z0) + 1e-6
            assert lp_norm(px, p) <= pz * (1 + 1e-9) + 1e-12
            assert R is None or pz <= R
            assert np.concatenate([px, [pz]]) == pytest.approx(np.concatenate([cx, [cz]]), abs=1e-3)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(-5, 5),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(-5, 5), st.sampled_from(EXPS))
def test_projection_idempotent_and_nonexpansive(a, za, b, zb, p):
    pa = project_cone(a, za, p)
    pb = project_cone(b, zb, p)
    again = project_cone(*pa, p)
    ya, yb = np.append(pa[0], pa[1]), np.append(pb[0], pb[1])
    assert np.linalg.norm(np.append(again[0], again[1]) - ya) <= 2e-8 * max(1, np.linalg.norm(ya))
    assert np.linalg.norm(ya - yb) <= np.linalg.norm(np.append(a, za) - np.append(b, zb)) + 1e-9
    assert in_cone(*pa, p, tol=1e-8) is not Membership.EXTERIOR
