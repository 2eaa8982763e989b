"""POCP file format, CBF/SDPA exporters and the `pocp` command line.

POCP format (ASCII, LF, `#` comment lines)::

    POCP 1
    p <r>/<s>                       single cone, or
    blocks <d>                      d cones, followed by d lines
    block <n_k> <r_k>/<s_k>
    dims <n> <m>
    <m rows>

A single-cone row is n integers of F, then G, then H.  A multi-cone row
lists the stacked coefficients (x_1, z_1, ..., x_d, z_d), then H, so it
has n + d + 1 entries with n = sum n_k.

Every command prints one JSON report.  Exit codes: 0 feasible or solved,
1 infeasible, 2 indeterminate, 64 usage, 65 parse error.
"""
import argparse
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import apps, bounds, clarkson, feasibility, formulas, oracle, reformulate
from .feasibility import Boundedness, Status
from .geometry import DomainError, IndeterminateError
from .instance import ConeBlock, InstanceError, MultiConeInstance, PocpInstance, RationalExponent

EXIT_OK, EXIT_INFEASIBLE, EXIT_INDETERMINATE, EXIT_USAGE, EXIT_PARSE = 0, 1, 2, 64, 65
CBF_VERSION = 3


class ParseError(ValueError):
    def __init__(self, msg, line=None, col=None):
        where = "" if line is None else f"line {line}" + ("" if col is None else f", column {col}")
        super().__init__(f"{where}: {msg}" if where else msg)
        self.line, self.col = line, col


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- POCP format

def _content_lines(text):
    for k, raw in enumerate(text.split("\n"), start=1):
        s = raw.strip()
        if s and not s.startswith("#"):
            yield k, raw


def _ints(raw, lineno):
    out = []
    col = 1
    for tok in raw.split():
        col = raw.index(tok, col - 1) + 1
        try:
            out.append(int(tok))
        except ValueError:
            raise ParseError(f"expected an integer, got {tok!r}", lineno, col) from None
        col += len(tok)
    return out


def _exponent(tok, lineno, col):
    try:
        return RationalExponent.parse(tok)
    except (ValueError, InstanceError) as exc:
        raise ParseError(f"bad exponent {tok!r}: {exc}", lineno, col) from None


def parse_pocp(text):
    """Exact parse of POCP text into a PocpInstance or MultiConeInstance."""
    lines = list(_content_lines(text))
    if not lines:
        raise ParseError("empty file", 1)
    it = iter(lines)
    k, raw = next(it)
    if raw.split() != ["POCP", "1"]:
        raise ParseError("header must be 'POCP 1'", k, 1)

    def need(what):
        try:
            return next(it)
        except StopIteration:
            raise ParseError(f"unexpected end of file, expected {what}", len(text.split("\n"))) from None

    k, raw = need("'p' or 'blocks'")
    parts = raw.split()
    blocks = None
    if parts[0] == "p" and len(parts) == 2:
        p = _exponent(parts[1], k, raw.index(parts[1]) + 1)
    elif parts[0] == "blocks" and len(parts) == 2:
        try:
            d = int(parts[1])
        except ValueError:
            raise ParseError("block count must be an integer", k, raw.index(parts[1]) + 1) from None
        if d < 1:
            raise ParseError("need at least one block", k)
        blocks = []
        for _ in range(d):
            k, raw = need("a 'block' line")
            bp = raw.split()
            if len(bp) != 3 or bp[0] != "block":
                raise ParseError("expected 'block <n> <r>/<s>'", k, 1)
            try:
                nk = int(bp[1])
            except ValueError:
                raise ParseError("block size must be an integer", k, raw.index(bp[1]) + 1) from None
            try:
                blocks.append(ConeBlock(nk, _exponent(bp[2], k, raw.index(bp[2]) + 1)))
            except InstanceError as exc:
                raise ParseError(str(exc), k) from None
    else:
        raise ParseError("expected 'p <r>/<s>' or 'blocks <d>'", k, 1)

    k, raw = need("'dims <n> <m>'")
    dp = raw.split()
    if len(dp) != 3 or dp[0] != "dims":
        raise ParseError("expected 'dims <n> <m>'", k, 1)
    n, m = _ints(" ".join(dp[1:]), k)
    if blocks is not None and n != sum(b.n for b in blocks):
        raise ParseError(f"dims n = {n} but blocks sum to {sum(b.n for b in blocks)}", k)
    width = n + 2 if blocks is None else n + len(blocks) + 1
    rows = []
    for _ in range(m):
        k, raw = need(f"{m} data rows")
        vals = _ints(raw, k)
        if len(vals) != width:
            raise ParseError(f"row has {len(vals)} entries, expected {width}", k)
        rows.append(vals)
    extra = next(it, None)
    if extra is not None:
        raise ParseError(f"more rows than m = {m}", extra[0])
    try:
        if blocks is None:
            return PocpInstance([r[:n] for r in rows], [r[n] for r in rows], [r[n + 1] for r in rows], p)
        F, G, at = [], [], 0
        for b in blocks:
            F.append([r[at:at + b.n] for r in rows])
            G.append([r[at + b.n] for r in rows])
            at += b.n + 1
        return MultiConeInstance(tuple(blocks), F, G, [r[-1] for r in rows])
    except InstanceError as exc:
        raise ParseError(str(exc)) from None


def emit_pocp(instance):
    out = ["POCP 1"]
    if isinstance(instance, PocpInstance):
        out.append(f"p {instance.p.r}/{instance.p.s}")
        out.append(f"dims {instance.n} {instance.m}")
        for f, g, h in zip(instance.F, instance.G, instance.H):
            out.append(" ".join(str(v) for v in list(f) + [g, h]))
    else:
        out.append(f"blocks {len(instance.blocks)}")
        out += [f"block {b.n} {b.p.r}/{b.p.s}" for b in instance.blocks]
        out.append(f"dims {sum(instance.sizes)} {instance.m}")
        for i in range(instance.m):
            row = []
            for Fk, Gk in zip(instance.F, instance.G):
                row += list(Fk[i]) + [Gk[i]]
            out.append(" ".join(str(v) for v in row + [instance.H[i]]))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- exporters

def _num(v):
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else repr(float(v))


def export_cbf(prog):
    """CBF (version 3) text: LINEAR rows and 3-dimensional QUAD cones.

    A rotated block w_c^2 <= w_a w_b becomes (w_a + w_b, 2 w_c, w_a - w_b) in Q^3.
    """
    if not prog.variables or (not prog.rows and not prog.blocks):
        raise ValueError("empty program")
    le = [r for r in prog.rows if r.sense == "<="]
    eq = [r for r in prog.rows if r.sense == "=="]
    other = [r for r in prog.rows if r.sense not in ("<=", "==")]
    if other:
        raise ValueError(f"unsupported row sense {other[0].sense!r}")
    acoord, bcoord = [], []
    row = 0
    for r in le + eq:
        for j, c in sorted(r.coeffs.items()):
            if c:
                acoord.append((row, j, c))
        if r.rhs:
            bcoord.append((row, -r.rhs))
        row += 1
    for b in prog.blocks:
        a, bb, c = b.a, b.b, b.c
        acoord += [(row, a, 1), (row, bb, 1), (row + 1, c, 2), (row + 2, a, 1), (row + 2, bb, -1)]
        row += 3
    cones = []
    if le:
        cones.append(f"L- {len(le)}")
    if eq:
        cones.append(f"L= {len(eq)}")
    cones += ["Q 3"] * len(prog.blocks)
    nv = len(prog.variables)
    out = [f"VER\n{CBF_VERSION}\n", "OBJSENSE\nMIN\n", f"VAR\n{nv} 1\nF {nv}\n",
           f"CON\n{row} {len(cones)}\n" + "\n".join(cones) + "\n"]
    if acoord:
        out.append(f"ACOORD\n{len(acoord)}\n" + "\n".join(f"{i} {j} {_num(v)}" for i, j, v in acoord) + "\n")
    if bcoord:
        out.append(f"BCOORD\n{len(bcoord)}\n" + "\n".join(f"{i} {_num(v)}" for i, v in bcoord) + "\n")
    return "\n".join(out)


def export_sdpa(sdp):
    """SDPA sparse text for <A_i, X> + s_i = h_i, X PSD of order n + 1, s >= 0.

    Constraint order: the m instance rows, then the arrow identifications.
    Block 1 is X, block 2 the diagonal slack block.
    """
    m = len(sdp.matrices)
    if m == 0:
        raise ValueError("empty program")
    k = sdp.order
    ncon = m + len(sdp.identifications)
    rhs = [Fraction(h) for h in sdp.rhs] + [Fraction(0)] * len(sdp.identifications)
    lines = [f"* arrow-lift feasibility, {m} rows, order {k}", str(ncon), "2", f"{k} -{m}",
             " ".join(_num(v) for v in rhs)]
    for i, A in enumerate(sdp.matrices, start=1):
        for a in range(k):
            for b in range(a, k):
                if A[a][b]:
                    lines.append(f"{i} 1 {a + 1} {b + 1} {_num(A[a][b])}")
        lines.append(f"{i} 2 {i} {i} 1")
    for t, (kind, (a, b)) in enumerate(sdp.identifications, start=m + 1):
        if kind == "zero":
            lines.append(f"{t} 1 {a + 1} {b + 1} 0.5")
        elif kind == "equal":
            lines.append(f"{t} 1 {a + 1} {a + 1} 1")
            lines.append(f"{t} 1 {b + 1} {b + 1} -1")
        else:
            raise ValueError(f"unsupported identification {kind!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- commands

def _jsonable(v):
    if isinstance(v, (Status, Boundedness, bounds.Regime)):
        return v.value
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(a) for a in v.tolist()]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {str(k): _jsonable(a) for k, a in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(a) for a in v]
    return v


def _verdict_report(v):
    return {"status": v.status, "theta_upper": v.theta, "theta_lower": v.lower,
            "point": v.primal, "dual": v.dual, "radius": v.radius,
            "iterations": v.iterations, "method": v.method, "notes": list(v.notes)}


def _status_code(status):
    return {Status.FEASIBLE: EXIT_OK, Status.INFEASIBLE: EXIT_INFEASIBLE,
            Status.INDETERMINATE: EXIT_INDETERMINATE}[status]


def _read_instance(path):
    try:
        with open(path, encoding="ascii") as fh:
            return parse_pocp(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ParseError("file is not ASCII") from None


def _radius(inst, text):
    if text == "auto":
        if isinstance(inst, MultiConeInstance):
            logR = bounds.radius_bound(inst).logR_value
            R = feasibility.AUTO_RADIUS_CAP if logR >= np.log2(feasibility.AUTO_RADIUS_CAP) else 2.0 ** logR
            return [R] * len(inst.blocks)
        return "auto"
    try:
        R = float(Fraction(text))
    except ValueError:
        raise UsageError(f"bad radius {text!r}") from None
    if R <= 0:
        raise UsageError("radius must be positive")
    return [R] * len(inst.blocks) if isinstance(inst, MultiConeInstance) else R


def cmd_check(args):
    inst = _read_instance(args.file)
    R = _radius(inst, args.radius)
    if args.clarkson:
        if not isinstance(inst, PocpInstance):
            raise UsageError("--clarkson needs a single-cone instance")
        v, basis = clarkson.clarkson_solve(inst, R, eps=args.eps, budget=args.budget, seed=_seed())
        rep = _verdict_report(v)
        rep["basis"] = basis.I
        rep["basis_theta"] = [basis.theta_lo, basis.theta_hi]
    elif isinstance(inst, MultiConeInstance):
        v = feasibility.decide_multi(inst, R, eps=args.eps, budget=args.budget, method=args.method)
        rep = _verdict_report(v)
    else:
        v = feasibility.decide(inst, R, eps=args.eps, budget=args.budget, method=args.method)
        rep = _verdict_report(v)
    return rep, _status_code(v.status)


def cmd_discrepancy(args):
    inst = _read_instance(args.file)
    R = _radius(inst, args.radius)
    if isinstance(inst, MultiConeInstance):
        br = feasibility.discrepancy_multi(inst, R, eps=args.eps, budget=args.budget, method=args.method)
    else:
        br = feasibility.discrepancy(inst, R, eps=args.eps, budget=args.budget, method=args.method)
    rep = _verdict_report(br.verdict)
    rep.update(status=br.status, lo=br.lo, hi=br.hi)
    return rep, _status_code(br.status)


def cmd_bounded(args):
    inst = _read_instance(args.file)
    if not isinstance(inst, PocpInstance):
        raise UsageError("bounded needs a single-cone instance")
    bv = feasibility.is_bounded(inst, eps=args.eps, budget=args.budget, method=args.method)
    rep = _verdict_report(bv.verdict)
    rep["status"] = bv.status
    code = {Boundedness.BOUNDED: EXIT_OK, Boundedness.UNBOUNDED: EXIT_INFEASIBLE,
            Boundedness.INDETERMINATE: EXIT_INDETERMINATE}[bv.status]
    return rep, code


def cmd_reformulate(args):
    inst = _read_instance(args.file)
    if not isinstance(inst, PocpInstance):
        raise UsageError("reformulate needs a single-cone instance")
    if args.target == "soc":
        prog = reformulate.compile_soc(inst)
        text = export_cbf(prog)
        rep = {"target": "soc", "format": f"CBF {CBF_VERSION}", "variables": len(prog.variables),
               "rows": len(prog.rows), "cones": len(prog.blocks), "graph_nodes": list(prog.graph.V)}
    else:
        sdp = reformulate.arrow_lift(inst)
        text = export_sdpa(sdp)
        rep = {"target": "sdp", "format": "SDPA", "order": sdp.order,
               "constraints": len(sdp.matrices) + len(sdp.identifications)}
    _write(args.out, text)
    rep["out"] = args.out
    return rep, EXIT_OK


def cmd_bounds(args):
    inst = _read_instance(args.file)
    rep = bounds.radius_bound(inst, c=args.const)
    return {"regime": rep.regime, "log2_radius": rep.logR_expr, "log2_radius_value": rep.logR_value,
            "log2_discrepancy": rep.log_disc_expr, "log2_discrepancy_value": -rep.log_disc_value,
            "n": rep.n, "m": rep.m, "r": rep.r, "s": rep.s, "tau": rep.tau, "c": rep.c}, EXIT_OK


def _read_objective(path, dim):
    try:
        with open(path, encoding="ascii") as fh:
            toks = [t for ln in fh if not ln.strip().startswith("#") for t in ln.split()]
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        c = [Fraction(t) for t in toks]
    except ValueError:
        raise ParseError(f"objective entries must be rationals in {path}") from None
    if len(c) != dim:
        raise ParseError(f"objective has {len(c)} entries, expected {dim}")
    return c


def cmd_solve(args):
    from .optimize import InfeasibleError, ObjectiveProblem, minimize

    inst = _read_instance(args.file)
    dim = inst.n + 1 if isinstance(inst, PocpInstance) else inst.dim
    c = _read_objective(args.objective, dim)
    R = _radius(inst, args.radius)
    if R == "auto":
        R, _ = feasibility.resolve_radius(inst, "auto")
    lb = None if args.lb is None else Fraction(args.lb)
    ub = None if args.ub is None else Fraction(args.ub)
    prob = ObjectiveProblem(inst, c, lb, ub, eps=args.eps)
    try:
        res = minimize(prob, R, budget=args.budget)
    except InfeasibleError as exc:
        return {"status": "infeasible", "message": str(exc)}, EXIT_INFEASIBLE
    return {"status": "solved", "lo": res.lo, "hi": res.hi, "value": res.value,
            "point": res.point, "oracle_calls": res.calls, "notes": res.notes}, EXIT_OK


def _csv_rows(path):
    try:
        return apps.read_points_csv(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except (ValueError, ArithmeticError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def _fracs(text):
    return [Fraction(t) for t in text.split(",") if t.strip()]


def cmd_app(args):
    from .optimize import InfeasibleError

    rows = _csv_rows(args.data)
    if not rows:
        raise ParseError(f"{args.data}: no data rows")
    kw = {"R": args.radius, "eps": args.eps}
    if args.kind == "nmp":
        model = apps.build_nmp([r for r, _ in rows], [b for _, b in rows], args.p, **kw)
    elif args.kind == "svm":
        model = apps.build_svm(rows, args.C, args.p, **kw)
    elif args.kind == "rls":
        model = apps.build_rls([r for r, _ in rows], [b for _, b in rows], args.p, args.nu_x, args.nu_y, **kw)
    elif args.kind == "weber":
        model = apps.build_weber([r for r, _ in rows], [w for _, w in rows], args.p, **kw)
    elif args.kind == "comp":
        if args.omega is None:
            raise UsageError("comp needs --omega")
        model = apps.build_comp([r for r, _ in rows], [w for _, w in rows], _fracs(args.omega), args.p, **kw)
    else:
        if args.objective is None:
            raise UsageError("rlp needs --objective")
        a_bar = [list(r) + [b] for r, b in rows]
        N = len(a_bar[0])
        Bmat = [[Fraction(args.rho) if (i == j and i < N - 1) else 0 for j in range(N)] for i in range(N)]
        model = apps.build_robust_lp(_fracs(args.objective), a_bar, [Bmat] * len(a_bar), **kw)
    try:
        res, decoded = apps.solve(model, budget=args.budget)
    except InfeasibleError as exc:
        return {"status": "infeasible", "model": model.kind, "message": str(exc)}, EXIT_INFEASIBLE
    return {"status": "solved", "model": model.kind, "lo": res.lo, "hi": res.hi, "value": res.value,
            "solution": decoded, "oracle_calls": res.calls, "notes": res.notes + model.notes}, EXIT_OK


def cmd_formula(args):
    inst = _read_instance(args.file)
    if not isinstance(inst, PocpInstance):
        raise UsageError("formula needs a single-cone instance")
    if args.kind == "membership":
        f = formulas.membership_formula(inst.n, inst.p, args.form)
    elif args.kind == "phi":
        f = formulas.phi_formula(inst)
    elif args.kind == "phiprime":
        f = formulas.phi_prime_formula(inst)
    elif args.kind == "lambda":
        f = formulas.lambda_formula(inst, _exact_radius(args))
    else:
        if args.rows is None or args.row is None:
            raise UsageError("violation needs --rows and --row")
        I = [int(t) for t in args.rows.split(",")]
        f = formulas.violation_sentence(inst, I, args.row, _exact_radius(args))
    dialect = {"plain": "PrenexPlain", "smt": "SmtLike"}[args.dialect]
    _write(args.out, formulas.emit_text(f, dialect))
    st = formulas.stats(f)
    return {"kind": args.kind, "dialect": dialect, "out": args.out, "atoms": st.num_atoms,
            "max_degree": st.max_degree, "free": st.num_free, "omega": st.omega,
            "block_dims": st.block_dims, "max_coeff_bits": st.max_coeff_bits,
            "expanded": st.expanded, "notes": list(st.notes)}, EXIT_OK


def _exact_radius(args):
    if args.radius == "auto":
        raise UsageError("this formula needs a numeric --radius")
    try:
        return Fraction(args.radius)
    except ValueError:
        raise UsageError(f"bad radius {args.radius!r}") from None


def selftest(count=20, seed=0):
    """Engine against the grid oracles on random tiny instances; returns a report."""
    rng = np.random.default_rng(seed)
    exps = ["2", "3", "4", "3/2", "4/3"]
    failures = []
    for k in range(count):
        n = int(rng.integers(2, 4))
        m = int(rng.integers(1, 4))
        F = rng.integers(-7, 8, size=(m, n)).tolist()
        G = rng.integers(-7, 8, size=m).tolist()
        H = rng.integers(-7, 8, size=m).tolist()
        inst = PocpInstance(F, G, H, exps[k % len(exps)])
        br = feasibility.discrepancy(inst, R=10.0)
        up = oracle.grid_theta(inst, 10.0, resolution=20_000, refine_rounds=10)
        low = oracle.dual_grid_theta(inst, 10.0, resolution=2_000, refine_rounds=10)
        if br.hi < low.value - low.gap - 1e-9 or br.lo > up.value + up.gap + 1e-9:
            failures.append({"instance": emit_pocp(inst), "bracket": [br.lo, br.hi],
                             "oracle": [low.value - low.gap, up.value + up.gap]})
    return {"status": "pass" if not failures else "fail", "instances": count, "failures": failures}


def cmd_selftest(args):
    rep = selftest(args.count, _seed())
    return rep, EXIT_OK if rep["status"] == "pass" else EXIT_INFEASIBLE


def _seed():
    raw = os.environ.get("POCP_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"POCP_SEED must be an integer, got {raw!r}") from None


def _write(path, text):
    if path == "-":
        sys.stderr.write(text)
        return
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser():
    ap = _Parser(prog="pocp", description="p-order cone feasibility, bounds and reformulations")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def engine(sp):
        sp.add_argument("file")
        sp.add_argument("--eps", type=float, default=feasibility.DEFAULT_EPS)
        sp.add_argument("--radius", default="auto", help="cap R on z, or 'auto' for the radius bound")
        sp.add_argument("--budget", type=int, default=feasibility.DEFAULT_BUDGET)
        sp.add_argument("--method", choices=["barrier", "subgradient"], default="barrier")
        return sp

    engine(sub.add_parser("check", help="decide feasibility")).add_argument("--clarkson", action="store_true")
    engine(sub.add_parser("discrepancy", help="bracket the discrepancy"))
    engine(sub.add_parser("bounded", help="test boundedness of the feasible set"))

    sp = sub.add_parser("reformulate", help="export the SOC (CBF) or SDP (SDPA) reformulation")
    sp.add_argument("file")
    sp.add_argument("--target", choices=["soc", "sdp"], required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("bounds", help="radius and discrepancy bounds")
    sp.add_argument("file")
    sp.add_argument("--const", type=float, default=1.0)

    sp = engine(sub.add_parser("solve", help="minimise a linear objective by bisection"))
    sp.add_argument("--objective", required=True, help="file with the objective coefficients")
    sp.add_argument("--lb")
    sp.add_argument("--ub")
    sp.set_defaults(eps=1e-4)

    sp = sub.add_parser("app", help="solve an application model from CSV data")
    sp.add_argument("kind", choices=["nmp", "svm", "rls", "weber", "comp", "rlp"])
    sp.add_argument("data")
    sp.add_argument("--p", default="2")
    sp.add_argument("--radius", type=Fraction, default=Fraction(apps.DEFAULT_RADIUS))
    sp.add_argument("--eps", type=float, default=1e-4)
    sp.add_argument("--budget", type=int, default=feasibility.DEFAULT_BUDGET)
    sp.add_argument("--C", type=Fraction, default=Fraction(1))
    sp.add_argument("--nu-x", dest="nu_x", type=Fraction, default=Fraction(0))
    sp.add_argument("--nu-y", dest="nu_y", type=Fraction, default=Fraction(0))
    sp.add_argument("--omega", help="comma-separated ordered median weights")
    sp.add_argument("--objective", help="comma-separated LP objective (rlp)")
    sp.add_argument("--rho", type=Fraction, default=Fraction(0), help="ball uncertainty radius (rlp)")

    sp = sub.add_parser("formula", help="emit a prenex formula")
    sp.add_argument("file")
    sp.add_argument("--kind", choices=["membership", "phi", "phiprime", "lambda", "violation"], required=True)
    sp.add_argument("--dialect", choices=["plain", "smt"], default="plain")
    sp.add_argument("--out", required=True)
    sp.add_argument("--form", choices=["Equality", "Inequality"], default="Inequality")
    sp.add_argument("--radius", default="auto")
    sp.add_argument("--rows", help="comma-separated row subset I (violation)")
    sp.add_argument("--row", type=int, help="row j outside I (violation)")

    sp = sub.add_parser("selftest", help="cross-check the engine against the grid oracles")
    sp.add_argument("--count", type=int, default=20)
    return ap


COMMANDS = {"check": cmd_check, "discrepancy": cmd_discrepancy, "bounded": cmd_bounded,
            "reformulate": cmd_reformulate, "bounds": cmd_bounds, "solve": cmd_solve,
            "app": cmd_app, "formula": cmd_formula, "selftest": cmd_selftest}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        rep, code = COMMANDS[args.command](args)
    except ParseError as exc:
        rep, code = {"status": "error", "error": "parse", "message": str(exc)}, EXIT_PARSE
    except (UsageError, DomainError, InstanceError, formulas.FormulaError,
            reformulate.BudgetError) as exc:
        rep, code = {"status": "error", "error": "usage", "message": str(exc)}, EXIT_USAGE
    except IndeterminateError as exc:
        rep, code = {"status": "indeterminate", "message": str(exc)}, EXIT_INDETERMINATE
    print(json.dumps(_jsonable(rep), indent=2, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
