"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""
import time
from decimal import Decimal, localcontext
from fractions import Fraction
from math import ceil, gcd, log2
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

import pocp.optimize as opt
from pocp.apps import build_nmp, build_robust_lp, build_weber, solve
from pocp.bounds import Regime, height, mignotte_bound, radius_bound
from pocp.clarkson import clarkson_solve, theta_of
from pocp.feasibility import Status, decide, decide_multi, discrepancy
from pocp.formulas import coefficient_bound, emit_text, membership_formula, phi_formula, stats
from pocp.geometry import Membership, in_cone, support_on_slice
from pocp.instance import PocpInstance
from pocp.optimize import ObjectiveProblem, expected_calls, minimize, with_level
from pocp.oracle import dual_grid_theta, grid_theta
from pocp.reformulate import (arrow_psd, block_satisfiable, build_mediated_graph, certificate_exponents,
                              compile_soc, log2_ceil, witness)

GOLDEN = Path(__file__).parent / "golden"


def _coprime_pairs(rmax):
    return [(r, s) for r in range(2, rmax + 1) for s in range(1, r) if gcd(r, s) == 1]


def _decimal_member(x, z, r, s):
    """sum |x_j|^(r/s) <= z^(r/s) in 60-digit decimal arithmetic."""
    with localcontext() as ctx:
        ctx.prec = 60
        e = Decimal(r) / Decimal(s)
        z = Decimal(z.numerator) / Decimal(z.denominator)
        if z < 0:
            return False
        lhs = sum((abs(Decimal(v.numerator) / Decimal(v.denominator)) ** e if v else Decimal(0))
                  for v in x)
        return lhs <= (z ** e if z else Decimal(0))


# 1 -------------------------------------------------------------------------
def test_criterion_1_reformulation_soundness(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(101)
    pairs = _coprime_pairs(16)
    progs = {}
    bad, members = [], 0
    for k in range(500):
        r, s = pairs[int(rng.integers(len(pairs)))]
        n = int(rng.integers(2, 5))
        x = [Fraction(int(rng.integers(-40, 41)), int(rng.integers(1, 9))) for _ in range(n)]
        pf = r / s
        nx = float(sum(abs(float(v)) ** pf for v in x) ** (1 / pf))
        z = Fraction(nx * float(rng.choice([0.5, 0.9, 0.99, 1.01, 1.1, 2.0]))).limit_denominator(10**6)
        if k % 25 == 0:
            z = -z
        if (r, s, n) not in progs:
            progs[(r, s, n)] = compile_soc(PocpInstance([[0] * n], [0], [1], (r, s)))
        prog = progs[(r, s, n)]
        want = _decimal_member(x, z, r, s)
        geo = in_cone([float(v) for v in x], float(z), (r, s)) is not Membership.EXTERIOR
        blk = block_satisfiable(prog, [float(v) for v in x], float(z), tol=1e-8)
        ok = want == geo == blk
        if want and float(z) > 0:
            members += 1
            vals = witness(prog, [float(v) for v in x], float(z))
            names = [nm for nm, _ in prog.variables]
            for j, v in enumerate(x):
                t = abs(float(v)) ** pf * float(z) ** (1 - pf)
                ok = ok and abs(vals[names.index(f"t{j}")] - t) <= 1e-9 * max(1.0, t)
        if not ok:
            bad.append((r, s, x, z, want, geo, blk))
    dt = time.time() - t0
    ok = not bad and dt < 60
    acceptance("criterion 1 reformulation soundness", ok,
               f"500 tuples, {members} members, {len(bad)} disagreements, {dt:.1f}s")
    assert ok, bad[:3]


# 2 -------------------------------------------------------------------------
def test_criterion_2_mediated_graph_minimality(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(202)
    worst, too_big = 0.0, []
    for r, s in _coprime_pairs(32):
        g = build_mediated_graph(r, s, "ExhaustiveMinimal")
        if len(g.V) > log2_ceil(r):
            too_big.append((r, s, len(g.V)))
        c = {v: float(w) for v, w in certificate_exponents(g).items()}
        # 1000 random positive points: logs of x, z and t with x^r <= z^(r-s) t^s
        lx = rng.normal(size=1000)
        lz = rng.normal(size=1000)
        lt = (r * lx - (r - s) * lz) / s + np.abs(rng.normal(size=1000))
        logs = {0: lz, r: lt, s: lx}
        for v in sorted(g.V):
            if v != s:
                logs[v] = (v / s) * lx + (1 - v / s) * lz
        lhs = sum(cv * (logs[g.arcs[v][0]] + logs[g.arcs[v][1]] - 2 * logs[v]) for v, cv in c.items())
        rhs = (r - s) * lz + s * lt - r * lx
        rel = np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))
        worst = max(worst, float(rel.max()))
        # with the blocks holding, the chain forces the power inequality
        assert np.all(rhs >= -1e-9 * np.maximum(1.0, np.abs(lhs)))
    dt = time.time() - t0
    ok = not too_big and worst <= 1e-9 and dt < 300
    acceptance("criterion 2 mediated-graph minimality", ok,
               f"{len(_coprime_pairs(32))} pairs, worst relative error {worst:.1e}, {dt:.1f}s")
    assert ok, too_big


# 3 -------------------------------------------------------------------------
def test_criterion_3_arrow_schur(acceptance):
    rng = np.random.default_rng(303)
    bad = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 7))
        x = rng.normal(size=n) * rng.choice([0.01, 1, 100])
        nx = float(np.linalg.norm(x))
        z = nx * float(rng.uniform(-0.5, 2.0))
        if abs(z - nx) <= 1e-7 * max(1.0, nx):
            continue
        if arrow_psd(x, z, tol=1e-9) != (in_cone(x, z, 2, tol=1e-9) is not Membership.EXTERIOR):
            bad += 1
    acceptance("criterion 3 arrow/Schur equivalence", bad == 0, f"10^4 points, {bad} disagreements")
    assert bad == 0


# 4 -------------------------------------------------------------------------
def test_criterion_4_engine_vs_oracles(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(1)
    ps = ["2", "3", "4", "3/2", "4/3"]
    miss, wrong, indet, checked = [], 0, 0, 0
    for k in range(200):
        n = int(rng.integers(2, 4))
        m = int(rng.integers(1, 4))
        inst = PocpInstance(rng.integers(-7, 8, (m, n)).tolist(), rng.integers(-7, 8, m).tolist(),
                            rng.integers(-7, 8, m).tolist(), ps[k % 5])
        br = discrepancy(inst, R=10, eps=1e-6)
        verdict = decide(inst, R=10, eps=1e-6)
        indet += (br.status is Status.INDETERMINATE) + (verdict.status is Status.INDETERMINATE)
        up = grid_theta(inst, 10)
        lo = dual_grid_theta(inst, 10)
        lo_b, up_b = lo.value - lo.gap, up.value + up.gap
        if br.lo > up_b or br.hi < lo_b:
            miss.append(k)
        if lo_b > 1e-4:
            checked += 1
            wrong += verdict.status is not Status.INFEASIBLE
        elif up_b < -1e-4:
            checked += 1
            wrong += verdict.status is not Status.FEASIBLE
    dt = time.time() - t0
    ok = not miss and not wrong and indet == 0 and dt < 600
    acceptance("criterion 4 minimax engine vs oracles", ok,
               f"{len(miss)} disjoint brackets, {wrong}/{checked} sign mismatches, "
               f"{indet} indeterminate, {dt:.0f}s")
    assert ok


# 5 -------------------------------------------------------------------------
def test_criterion_5_slice_closed_form(acceptance):
    rng = np.random.default_rng(505)
    ang = np.linspace(0, 2 * np.pi, 2_000_001)
    U = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    worst = 0.0
    for k in range(100):
        p = ["2", "3", "4", "3/2", "4/3", "5/2"][k % 6]
        pf = float(Fraction(p))
        f = rng.uniform(-10, 10, 2)
        g = float(rng.uniform(-10, 10))
        R = float(rng.uniform(0, 10))
        X = R * U / (np.sum(np.abs(U) ** pf, axis=1) ** (1 / pf))[:, None]
        grid = float(np.min(X @ f)) + g * R
        val, arg = support_on_slice(f, g, R, p)
        worst = max(worst, abs(val - grid))
    ok = worst <= 1e-5
    acceptance("criterion 5 slice closed form vs dense grid", ok, f"worst deviation {worst:.1e}")
    assert ok


# 6 -------------------------------------------------------------------------
def _point_centred(rng, k):
    ps = ["2", "3", "3/2"]
    p = ps[k % 3]
    pf = float(Fraction(p))
    n = int(rng.integers(2, 4))
    m = int(rng.integers(50, 201))
    x0 = rng.uniform(-2, 2, n)
    z0 = float(np.sum(np.abs(x0) ** pf) ** (1 / pf)) + rng.uniform(0, 2)
    F = rng.integers(-9, 10, (m, n))
    G = rng.integers(-9, 10, m)
    F[(F == 0).all(axis=1) & (G == 0), 0] = 1
    base = F @ x0 + G * z0
    if k % 2 == 0:
        H = np.ceil(base + rng.uniform(0, 6, m))            # x0 strictly feasible
    else:
        H = np.floor(base + rng.uniform(-1, 6, m))
    return PocpInstance(F.tolist(), G.tolist(), H.astype(int).tolist(), p)


def test_criterion_6_clarkson_equivalence(acceptance):
    rng = np.random.default_rng(606)
    eps = 1e-6
    verdict_bad, value_bad, sizes = 0, 0, []
    for k in range(50):
        inst = _point_centred(rng, k)
        v, basis = clarkson_solve(inst, R=10, eps=eps, seed=k)
        d = decide(inst, R=10, eps=eps)
        verdict_bad += v.status is not d.status
        full = theta_of(range(inst.m), inst, 10, eps)
        value_bad += abs(basis.theta_I - 0.5 * (full.lo + full.hi)) > 3 * eps
        sizes.append(len(basis.I) - inst.n)
    over = sum(s > 1 for s in sizes)
    ok = verdict_bad == 0 and value_bad == 0 and over == 0
    acceptance("criterion 6 Clarkson equivalence", ok,
               f"verdict mismatches {verdict_bad}, value mismatches {value_bad}, "
               f"basis larger than n+1 on {over}/50 (largest n+{max(sizes)})")
    assert verdict_bad == 0 and value_bad == 0, "verdict or value disagreement"
    assert over == 0, f"basis size exceeds n + 1 on {over} of 50 instances"


# 7 -------------------------------------------------------------------------
def test_criterion_7_applications(acceptance):
    notes = []
    nmp_worst = 0.0
    for p in (2, 3, 4):
        for n in (2, 3, 4):
            A = (-np.eye(n, dtype=int)).tolist()
            res, _ = solve(build_nmp(A, [-1] * n, p, eps=1e-5), oracle_eps=1e-8)
            nmp_worst = max(nmp_worst, abs(res.value - n ** (1 / p)))
    notes.append(f"NMP worst {nmp_worst:.1e}")
    rng = np.random.default_rng(707)
    weber_worst = 0.0
    for _ in range(4):
        a, b = rng.integers(-4, 5, (2, 2))
        res, _ = solve(build_weber([a.tolist(), b.tolist()], [1, 1], 2, eps=1e-5), oracle_eps=1e-8)
        weber_worst = max(weber_worst, abs(res.value - float(np.linalg.norm(a - b))))
    notes.append(f"Weber worst {weber_worst:.1e}")
    lp_bad, feas_count = 0, 0
    for _ in range(50):
        n = int(rng.integers(2, 4))
        A = rng.integers(-4, 5, (4, n))
        b = rng.integers(-6, 7, 4)
        A = np.vstack([A, np.eye(n, dtype=int), -np.eye(n, dtype=int)])
        b = np.concatenate([b, [3] * (2 * n)])
        ref = linprog(np.zeros(n), A_ub=A, b_ub=b, bounds=[(None, None)] * n)
        lp_feasible = ref.status == 0
        a_bar = np.hstack([A, b[:, None]]).tolist()
        zero = [[[0] * (n + 1) for _ in range(n + 1)] for _ in A]
        model = build_robust_lp([0] * n, a_bar, zero)
        v = decide_multi(model.instance, model.radii, eps=1e-7)
        lp_bad += (v.status is Status.FEASIBLE) != lp_feasible or v.status is Status.INDETERMINATE
        feas_count += lp_feasible
    notes.append(f"robust LP {lp_bad}/50 mismatches ({feas_count} feasible)")
    ok = nmp_worst <= 1e-4 and weber_worst <= 1e-4 and lp_bad == 0
    acceptance("criterion 7 applications", ok, ", ".join(notes))
    assert ok


# 8 -------------------------------------------------------------------------
def test_criterion_8_formula_stats(acceptance):
    problems = []
    rng = np.random.default_rng(808)
    for _ in range(30):
        n = int(rng.integers(2, 4))
        m = int(rng.integers(1, 5))
        F = rng.integers(-9, 10, (m, n)).tolist()
        G = rng.integers(-9, 10, m).tolist()
        H = rng.integers(-9, 10, m).tolist()
        general = stats(phi_formula(PocpInstance(F, G, H, "3/2")))
        if (general.omega, general.num_free, general.block_dims) != (2, 1, (m, n + 1)):
            problems.append(("phi", general))
        even = stats(phi_formula(PocpInstance(F, G, H, "4/3")))
        if (even.omega, even.num_free, even.block_dims) != (2, 1, (m, 1)):
            problems.append(("phi dual-even", even))
    for p in ("2", "3", "4", "3/2", "5/3", "7/4", "6/5"):
        r = int(p.split("/")[0])
        for n in (2, 3, 4):
            if stats(membership_formula(n, p)).max_degree != r:
                problems.append(("membership degree", p, n))
    for _ in range(60):
        r = int(rng.integers(2, 7))
        s = int(rng.choice([v for v in range(1, r) if gcd(v, r) == 1]))
        m = int(rng.integers(1, 5))
        n = int(rng.integers(2, 4))
        top = int(rng.integers(1, 16))
        inst = PocpInstance(rng.integers(-top, top + 1, (m, n)).tolist(),
                            rng.integers(-top, top + 1, m).tolist(),
                            rng.integers(-top, top + 1, m).tolist(), (r, s))
        st = stats(phi_formula(inst))
        if not st.expanded or st.max_coeff_bits > coefficient_bound(inst):
            problems.append(("bits", r, s, m, st.max_coeff_bits, coefficient_bound(inst)))
    golden = {
        "membership_2_3-2.prenex": lambda: emit_text(membership_formula(2, "3/2")),
        "phi_m2_n2_3-2.prenex": lambda: emit_text(phi_formula(
            PocpInstance([[1, 2], [0, -1]], [1, 0], [3, 1], "3/2"))),
        "phi_m1_n2_2.smt2": lambda: emit_text(phi_formula(PocpInstance([[1, 2]], [1], [3], 2)), "SmtLike"),
    }
    for name, fn in golden.items():
        if not (fn() == fn() == (GOLDEN / name).read_text()):
            problems.append(("golden", name))
    acceptance("criterion 8 formula stats", not problems, f"{len(problems)} problems")
    assert not problems, problems[:5]


# 9 -------------------------------------------------------------------------
def test_criterion_9_binary_search_contract(acceptance, monkeypatch):
    calls = []
    real = opt.decide

    def counting(*a, **k):
        calls.append(1)
        return real(*a, **k)

    monkeypatch.setattr(opt, "decide", counting)
    cases = [
        (PocpInstance([[-1, 0, 0], [0, -1, 0], [0, 0, -1]], [0, 0, 0], [-1, -1, -1], 2), [0, 0, 0, 1], 0, 4, 1e-4),
        (PocpInstance([[-1, -2], [1, 0]], [0, 0], [-2, 3], "3"), [0, 0, 1], -1, 10, 1e-3),
        (PocpInstance([[0, 0]], [-1], [-1], "3/2"), [0, 0, 1], 0, 10, 1e-5),
        (PocpInstance([[1, 1], [-1, 0]], [-1, 0], [0, 2], "4/3"), [1, -1, 0], -20, 20, 1e-3),
    ]
    bad = []
    for inst, c, lb, ub, eps in cases:
        calls.clear()
        prob = ObjectiveProblem(inst, c, lb=lb, ub=ub, eps=eps)
        res = minimize(prob, 10.0, oracle_eps=1e-8)
        want = ceil(log2((ub - lb) / eps))
        if res.calls != want or len(calls) != want + 1 or want != expected_calls(lb, ub, eps):
            bad.append(("calls", res.calls, len(calls), want))
        gap = Fraction(str(eps))
        below = decide(with_level(inst, prob.c, res.lo - gap), R=10.0, eps=1e-8).status
        above = decide(with_level(inst, prob.c, res.hi + gap), R=10.0, eps=1e-8).status
        if below is not Status.INFEASIBLE or above is not Status.FEASIBLE:
            bad.append(("bracket", float(res.lo), float(res.hi), below, above))
    acceptance("criterion 9 binary-search contract", not bad, f"{len(cases)} problems, {len(bad)} failures")
    assert not bad, bad


# 10 ------------------------------------------------------------------------
# (p, n, m, tau, c) -> (regime, log2 R) from the three-case formula, by hand
HAND = [
    (("4", 3, 2, 1, 1), (Regime.EVEN_INTEGER, 512)),           # (4*2)^3
    (("2", 3, 2, 1, 1), (Regime.DUAL_EVEN, 16)),               # (2*2)^2
    (("3/2", 2, 2, 2, 1), (Regime.GENERAL, 2592)),             # 2*(3*2)^(2*2)
    (("4/3", 3, 5, 2, 1), (Regime.DUAL_EVEN, 3456)),           # 2*(4*3)^3
    (("6", 2, 4, 3, 1), (Regime.EVEN_INTEGER, 432)),           # 3*(6*2)^2
    (("3", 2, 1, 1, 1), (Regime.GENERAL, 36)),                 # (3*2)^(2*1)
    (("5/2", 3, 2, 2, 1), (Regime.GENERAL, 22781250)),         # 2*(5*3)^(3*2)
    (("2", 4, 1, 4, 1), (Regime.DUAL_EVEN, 8)),                # 4*(2*1)^1
    (("6/5", 2, 3, 1, 1), (Regime.DUAL_EVEN, 144)),            # (6*2)^2
    (("7/3", 2, 2, 1, 1), (Regime.GENERAL, 38416)),            # (7*2)^(2*2)
]


def test_criterion_10_bound_expressions(acceptance):
    bad = []
    for (p, n, m, tau, c), want in HAND:
        F = [[1] * n for _ in range(m)]
        H = [2 ** (tau - 1)] + [0] * (m - 1)
        rep = radius_bound(PocpInstance(F, [0] * m, H, p), c=c)
        if (rep.regime, rep.logR_value) != want:
            bad.append((p, n, m, tau, rep.regime, rep.logR_value, want))
    rng = np.random.default_rng(1010)
    under = 0
    for _ in range(200):
        deg = int(rng.integers(1, 8))
        coeffs = rng.integers(-100, 101, size=deg + 1)
        coeffs[0] = coeffs[0] or 1
        roots = np.roots(coeffs)
        roots = roots[np.abs(roots) > 1e-12]
        bound = float(mignotte_bound(height(coeffs)))
        under += bool(np.all(np.abs(roots) > bound * (1 - 1e-9)))
    ok = not bad and under == 200
    acceptance("criterion 10 bound expressions", ok,
               f"{len(HAND) - len(bad)}/{len(HAND)} hand tuples, Mignotte below all roots on {under}/200")
    assert ok, bad
