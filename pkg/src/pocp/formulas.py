"""Prenex first-order formulas over the reals for cone membership and the bound arguments.

Polynomials are sparse with integer coefficients.  A power of a linear
form is expanded only while r * m stays within EXPANSION_BUDGET; beyond it
the atom keeps the unexpanded power and the stats say so.

PrenexPlain grammar (one item per line)::

    PRENEX 1
    free <names...>
    forall|exists <names...>      (one line per block, outermost first)
    matrix <bool>

    bool := (and bool...) | (or bool...) | (not bool) | (implies bool bool)
          | (REL expr expr)        REL in < <= > >= = !=
    expr := INT | NAME | (+ expr...) | (* expr...) | (- expr) | (^ expr INT)
          | (pow expr INT)         unexpanded power
          | (sum (INT expr)...)    integer combination of the above
"""
from dataclasses import dataclass
from fractions import Fraction

from .instance import PocpInstance, as_exponent, bit_size

EXPANSION_BUDGET = 24
RELATIONS = ("<", "<=", ">", ">=", "=", "!=")


class FormulaError(ValueError):
    """Malformed formula or formula text."""


# ---------------------------------------------------------------- polynomials

class Poly:
    """Sparse polynomial: {monomial: int}, a monomial being sorted ((name, exp), ...)."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {k: int(v) for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def const(cls, c):
        return cls({(): int(c)})

    @classmethod
    def var(cls, name):
        return cls({((name, 1),): 1})

    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = _mono_mul(k1, k2)
                out[k] = out.get(k, 0) + v1 * v2
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = Poly.const(1)
        base = self
        k = int(k)
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return f"Poly({to_sexpr(self)})"

    @property
    def degree(self):
        return max((sum(e for _, e in k) for k in self.terms), default=0)

    @property
    def height(self):
        return max((abs(v) for v in self.terms.values()), default=0)

    def variables(self):
        return {name for k in self.terms for name, _ in k}


def _as_poly(v):
    if isinstance(v, Poly):
        return v
    if isinstance(v, int):
        return Poly.const(v)
    raise TypeError(f"cannot use {v!r} as a polynomial")


def _mono_mul(a, b):
    d = dict(a)
    for name, e in b:
        d[name] = d.get(name, 0) + e
    return tuple(sorted(d.items()))


@dataclass(frozen=True)
class PowExpr:
    """base ** exp kept unexpanded."""

    base: Poly
    exp: int

    @property
    def degree(self):
        return self.base.degree * self.exp


@dataclass(frozen=True)
class SumExpr:
    """sum of coeff * expr with expr a Poly or PowExpr."""

    items: tuple

    @property
    def degree(self):
        return max(e.degree for _, e in self.items)


# ---------------------------------------------------------------- boolean AST

@dataclass(frozen=True)
class Atom:
    lhs: object
    rel: str
    rhs: object

    def __post_init__(self):
        if self.rel not in RELATIONS:
            raise FormulaError(f"unknown relation {self.rel!r}")


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Not:
    item: object


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


@dataclass(frozen=True)
class Formula:
    """free: tuple of names; blocks: tuple of (quantifier, names); matrix: boolean tree."""

    free: tuple
    blocks: tuple
    matrix: object


@dataclass(frozen=True)
class FormulaStats:
    num_atoms: int
    max_degree: int
    num_free: int
    omega: int
    block_dims: tuple
    max_coeff_bits: int
    expanded: bool
    notes: tuple = ()


def atoms(node):
    if isinstance(node, Atom):
        yield node
    elif isinstance(node, (And, Or)):
        for it in node.items:
            yield from atoms(it)
    elif isinstance(node, Not):
        yield from atoms(node.item)
    elif isinstance(node, Implies):
        yield from atoms(node.left)
        yield from atoms(node.right)
    else:
        raise FormulaError(f"not a boolean node: {node!r}")


def _expr_bits(e):
    if isinstance(e, Poly):
        return bit_size(e.height), True
    if isinstance(e, PowExpr):
        return bit_size(e.base.height), False
    bits, full = 1, True
    for c, sub in e.items:
        b, f = _expr_bits(sub)
        bits, full = max(bits, b + bit_size(c) - 1), full and f
    return bits, full


def stats(formula):
    """Structural counts of a formula."""
    ats = list(atoms(formula.matrix))
    deg, bits, full = 0, 1, True
    for a in ats:
        for side in (a.lhs, a.rhs):
            deg = max(deg, side.degree)
            b, f = _expr_bits(side)
            bits, full = max(bits, b), full and f
    # consecutive blocks with the same quantifier count once
    omega, last = 0, None
    for q, _ in formula.blocks:
        if q != last:
            omega += 1
        last = q
    notes = ()
    if omega > 2:
        notes = (f"{omega} quantifier blocks alternate; complexity estimates written for "
                 "two alternations do not cover this shape",)
    return FormulaStats(len(ats), deg, len(formula.free), omega,
                        tuple(len(v) for _, v in formula.blocks), bits, full, notes)


# ---------------------------------------------------------------- builders

def _v(name):
    return Poly.var(name)


def _power_rhs(a, ea, b, eb):
    """a^ea * b^eb as a monomial."""
    d = {}
    if ea:
        d[a] = ea
    if eb:
        d[b] = d.get(b, 0) + eb
    return Poly({tuple(sorted(d.items())): 1})


def membership_formula(n, p, form="Inequality"):
    """Exists t with the coordinatewise power relations, the budget on t and t >= 0.

    Inequality: (x_j^r <= z^(r-s) t_j^s) and (-x_j^r <= ...), sum t <= z.
    Equality:   (x_j^r = z^(r-s) t_j^s) or (-x_j^r = ...),   sum t = z.
    """
    if n < 2:
        raise FormulaError("cone dimension must be at least 2")
    p = as_exponent(p)
    r, s = p.r, p.s
    xs = [f"x{j + 1}" for j in range(n)]
    ts = [f"t{j + 1}" for j in range(n)]
    parts = []
    for xj, tj in zip(xs, ts):
        rhs = _power_rhs("z", r - s, tj, s)
        xr = _v(xj) ** r
        if form == "Inequality":
            parts.append(And((Atom(xr, "<=", rhs), Atom(-xr, "<=", rhs))))
        elif form == "Equality":
            parts.append(Or((Atom(xr, "=", rhs), Atom(-xr, "=", rhs))))
        else:
            raise FormulaError(f"unknown form {form!r}")
    total = sum((_v(t) for t in ts), Poly())
    parts.append(Atom(total, "<=" if form == "Inequality" else "=", _v("z")))
    parts += [Atom(_v(t), ">=", Poly()) for t in ts]
    return Formula(tuple(xs) + ("z",), (("exists", tuple(ts)),), And(tuple(parts)))


def _lin(coeffs, names):
    return sum((c * _v(nm) for c, nm in zip(coeffs, names) if c), Poly())


def _dual_form_power(instance, j, lams):
    """(sum_i lambda_i f_ij)^r, expanded within the budget."""
    r = instance.p.r
    base = _lin([row[j] for row in instance.F], lams)
    if r * instance.m <= EXPANSION_BUDGET:
        return base ** r
    return PowExpr(base, r)


def _neg(e):
    if isinstance(e, Poly):
        return -e
    return SumExpr(((-1, e),))


def _simplex(lams):
    return And(tuple(Atom(_v(l), ">=", Poly()) for l in lams)
               + (Atom(sum((_v(l) for l in lams), Poly()), "=", Poly.const(1)),))


def _is_dual_even(p):
    return p.r % 2 == 0 and p.s == p.r - 1


def _dual_norm_atoms(instance, lams, ts, w, negate=False):
    """Atoms stating ||sum lambda_i f_i||_q = w (or their negation when negate)."""
    p = instance.p
    r, s = p.r, p.s
    n = instance.n
    eq, ne = ("!=", "=") if negate else ("=", "!=")
    if ts is None:
        total = [_dual_form_power(instance, j, lams) for j in range(n)]
        if all(isinstance(e, Poly) for e in total):
            lhs = sum(total, Poly())
        else:
            lhs = SumExpr(tuple((1, e) for e in total))
        return [Atom(lhs, eq, _v(w) ** r)]
    out = []
    for j, tj in enumerate(ts):
        pw = _dual_form_power(instance, j, lams)
        rhs = _power_rhs(w, s, tj, r - s)
        a, b = Atom(pw, eq, rhs), Atom(_neg(pw), eq, rhs)
        out.append(And((a, b)) if negate else Or((a, b)))
    return out


def phi_formula(instance, R="R"):
    """Phi(R): for all lambda in the simplex the slice dual value is <= 0, and R >= 0.

    One free variable R, blocks (forall lambda in R^m, exists (t, w) in R^(n+1));
    for p = r/(r-1) with r even the t block is dropped (exists w only).
    """
    if not isinstance(instance, PocpInstance):
        raise TypeError("phi_formula expects a PocpInstance")
    m, n = instance.m, instance.n
    lams = [f"l{i + 1}" for i in range(m)]
    dual_even = _is_dual_even(instance.p)
    ts = None if dual_even else [f"t{j + 1}" for j in range(n)]
    value = _v(R) * (_lin(instance.G, lams) - _v("w")) - _lin(instance.H, lams)
    body = []
    if dual_even:
        body += _dual_norm_atoms(instance, lams, None, "w")
        body += [Atom(value, "<=", Poly()), Atom(_v("w"), ">=", Poly())]
        inner = ("w",)
    else:
        body.append(Atom(sum((_v(t) for t in ts), Poly()), "=", _v("w")))
        body += _dual_norm_atoms(instance, lams, ts, "w")
        body.append(Atom(value, "<=", Poly()))
        body += [Atom(_v(t), ">=", Poly()) for t in ts]
        inner = tuple(ts) + ("w",)
    matrix = And((Implies(_simplex(lams), And(tuple(body))), Atom(_v(R), ">=", Poly())))
    return Formula((R,), (("forall", tuple(lams)), ("exists", inner)), matrix)


def phi_prime_formula(instance, R="R"):
    """Phi'(R): every R' satisfying Phi lies in [0, R], as the three-block prenex form."""
    m, n = instance.m, instance.n
    lams = [f"l{i + 1}" for i in range(m)]
    ts = [f"t{j + 1}" for j in range(n)]
    Rp = "Rp"
    fails = [Atom(_v(t), "<", Poly()) for t in ts] + [Atom(_v("w"), "<", Poly())]
    fails.append(Atom(sum((_v(t) for t in ts), Poly()), "!=", _v("w")))
    fails += _dual_norm_atoms(instance, lams, ts, "w", negate=True)
    value = _v(Rp) * (_lin(instance.G, lams) - _v("w")) - _lin(instance.H, lams)
    fails.append(Atom(value, ">", Poly()))
    left = And((_simplex(lams), Or(tuple(fails))))
    right = And((Atom(Poly(), "<=", _v(Rp)), Atom(_v(Rp), "<=", _v(R))))
    blocks = (("forall", (Rp,)), ("exists", tuple(lams)), ("forall", tuple(ts) + ("w",)))
    return Formula((R,), blocks, Or((left, right)))


def _scaled(R):
    """R as (numerator, denominator) integers."""
    R = Fraction(R)
    return R.numerator, R.denominator


def lambda_formula(instance, R, theta="theta"):
    """Lambda(theta): theta bounds the capped dual value from above for every simplex lambda.

    R is a number; the row R (sum l g - w) - sum l (h + theta) <= 0 is
    multiplied by R's denominator to keep integer coefficients.
    """
    m, n = instance.m, instance.n
    a, b = _scaled(R)
    lams = [f"l{i + 1}" for i in range(m)]
    shifted = _lin(instance.H, lams) + _v(theta) * sum((_v(l) for l in lams), Poly())
    value = a * (_lin(instance.G, lams) - _v("w")) - b * shifted
    tail = Or((Atom(shifted, ">=", Poly()), Atom(value, "<=", Poly())))
    if _is_dual_even(instance.p):
        norm = And(tuple(_dual_norm_atoms(instance, lams, None, "w"))
                   + (Atom(_v("w"), ">=", Poly()),))
        inner = ("w",)
    else:
        ts = [f"t{j + 1}" for j in range(n)]
        norm = And(tuple(Atom(_v(t), ">=", Poly()) for t in ts)
                   + tuple(_dual_norm_atoms(instance, lams, ts, "w"))
                   + (Atom(sum((_v(t) for t in ts), Poly()), "=", _v("w")),))
        inner = tuple(ts) + ("w",)
    matrix = Implies(_simplex(lams), And((norm, tail)))
    return Formula((theta,), (("forall", tuple(lams)), ("exists", inner)), matrix)


def _membership_atoms(xs, z, p, ts):
    if p.value == 2:
        return [Atom(sum((_v(x) ** 2 for x in xs), Poly()), "<=", _v(z) ** 2), Atom(_v(z), ">=", Poly())]
    r, s = p.r, p.s
    out = []
    for x, t in zip(xs, ts):
        rhs = _power_rhs(z, r - s, t, s)
        out += [Atom(_v(x) ** r, "<=", rhs), Atom(-(_v(x) ** r), "<=", rhs)]
    out.append(Atom(sum((_v(t) for t in ts), Poly()), "<=", _v(z)))
    out += [Atom(_v(t), ">=", Poly()) for t in ts]
    return out


def violation_sentence(instance, I, j, R):
    """V_I^j: row j is violated beyond theta(I) at the least-norm point of the rows I.

    A sentence with blocks forall (x, z, y, w [, t, u]) and forall (theta, rho);
    for p != 2 the auxiliary t, u of the membership formulas sit in the first
    block (an existential in an antecedent becomes universal).
    """
    n = instance.n
    I = sorted(set(I))
    if j in I:
        raise FormulaError("j must lie outside I")
    a, b = _scaled(R)
    xs = [f"x{k + 1}" for k in range(n)]
    ys = [f"y{k + 1}" for k in range(n)]
    p = instance.p
    ts = [f"t{k + 1}" for k in range(n)] if p.value != 2 else []
    us = [f"u{k + 1}" for k in range(n)] if p.value != 2 else []

    def S(vs, z, th):
        rows = [Atom(_lin(instance.F[i], vs) + instance.G[i] * _v(z), "<=", instance.H[i] + _v(th))
                for i in I]
        sq = sum((_v(v) ** 2 for v in vs), Poly()) + _v(z) ** 2
        rows.append(Atom(b * b * sq, "<=", Poly.const(a * a)))
        return And(tuple(rows))

    def sq(vs, z):
        return sum((_v(v) ** 2 for v in vs), Poly()) + _v(z) ** 2

    hyp = And(tuple(_membership_atoms(xs, "z", p, ts)) + tuple(_membership_atoms(ys, "w", p, us))
              + (S(xs, "z", "theta"),
                 Implies(S(ys, "w", "rho"), Atom(_v("theta"), "<=", _v("rho"))),
                 Implies(S(ys, "w", "theta"), Atom(sq(xs, "z"), "<=", sq(ys, "w")))))
    concl = Atom(_lin(instance.F[j], xs) + instance.G[j] * _v("z"), ">", instance.H[j] + _v("theta"))
    first = tuple(xs) + ("z",) + tuple(ys) + ("w",) + tuple(ts) + tuple(us)
    return Formula((), (("forall", first), ("forall", ("theta", "rho"))), Implies(hyp, concl))


# ---------------------------------------------------------------- text

def _mono_sexpr(key):
    parts = [name if e == 1 else f"(^ {name} {e})" for name, e in key]
    return parts


def _order(terms):
    return sorted(terms.items(), key=lambda kv: (-sum(e for _, e in kv[0]), kv[0]))


def to_sexpr(e):
    if isinstance(e, Poly):
        if not e.terms:
            return "0"
        out = []
        for key, c in _order(e.terms):
            parts = _mono_sexpr(key)
            if not parts:
                out.append(str(c))
            elif c == 1 and len(parts) == 1:
                out.append(parts[0])
            elif c == 1:
                out.append("(* " + " ".join(parts) + ")")
            else:
                out.append(f"(* {c} " + " ".join(parts) + ")")
        return out[0] if len(out) == 1 else "(+ " + " ".join(out) + ")"
    if isinstance(e, PowExpr):
        return f"(pow {to_sexpr(e.base)} {e.exp})"
    if isinstance(e, SumExpr):
        return "(sum " + " ".join(f"({c} {to_sexpr(x)})" for c, x in e.items) + ")"
    raise FormulaError(f"not an expression: {e!r}")


def bool_sexpr(node):
    if isinstance(node, Atom):
        return f"({node.rel} {to_sexpr(node.lhs)} {to_sexpr(node.rhs)})"
    if isinstance(node, And):
        return "(and " + " ".join(bool_sexpr(x) for x in node.items) + ")"
    if isinstance(node, Or):
        return "(or " + " ".join(bool_sexpr(x) for x in node.items) + ")"
    if isinstance(node, Not):
        return f"(not {bool_sexpr(node.item)})"
    if isinstance(node, Implies):
        return f"(implies {bool_sexpr(node.left)} {bool_sexpr(node.right)})"
    raise FormulaError(f"not a boolean node: {node!r}")


def _smt_int(c):
    return str(c) if c >= 0 else f"(- {-c})"


def _smt_expr(e):
    if isinstance(e, Poly):
        if not e.terms:
            return "0"
        out = []
        for key, c in _order(e.terms):
            factors = [name for name, k in key for _ in range(k)]
            if not factors:
                out.append(_smt_int(c))
            elif c == 1 and len(factors) == 1:
                out.append(factors[0])
            else:
                lead = [] if c == 1 else [_smt_int(c)]
                out.append("(* " + " ".join(lead + factors) + ")")
        return out[0] if len(out) == 1 else "(+ " + " ".join(out) + ")"
    if isinstance(e, PowExpr):
        b = _smt_expr(e.base)
        return "(* " + " ".join([b] * e.exp) + ")" if e.exp > 1 else b
    if isinstance(e, SumExpr):
        items = [f"(* {_smt_int(c)} {_smt_expr(x)})" for c, x in e.items]
        return items[0] if len(items) == 1 else "(+ " + " ".join(items) + ")"
    raise FormulaError(f"not an expression: {e!r}")


def _smt_bool(node):
    if isinstance(node, Atom):
        l, r = _smt_expr(node.lhs), _smt_expr(node.rhs)
        if node.rel == "!=":
            return f"(not (= {l} {r}))"
        return f"({node.rel} {l} {r})"
    if isinstance(node, And):
        return "(and " + " ".join(_smt_bool(x) for x in node.items) + ")"
    if isinstance(node, Or):
        return "(or " + " ".join(_smt_bool(x) for x in node.items) + ")"
    if isinstance(node, Not):
        return f"(not {_smt_bool(node.item)})"
    if isinstance(node, Implies):
        return f"(=> {_smt_bool(node.left)} {_smt_bool(node.right)})"
    raise FormulaError(f"not a boolean node: {node!r}")


def emit_text(formula, dialect="PrenexPlain"):
    """Deterministic text for a formula in the PrenexPlain or SmtLike dialect."""
    if not list(atoms(formula.matrix)):
        raise FormulaError("formula has no atoms")
    if dialect == "PrenexPlain":
        lines = ["PRENEX 1", "free " + " ".join(formula.free) if formula.free else "free"]
        for q, names in formula.blocks:
            lines.append(f"{q} " + " ".join(names))
        lines.append("matrix " + bool_sexpr(formula.matrix))
        return "\n".join(lines) + "\n"
    if dialect == "SmtLike":
        lines = ["(set-logic NRA)"]
        lines += [f"(declare-fun {v} () Real)" for v in formula.free]
        body = _smt_bool(formula.matrix)
        for q, names in reversed(formula.blocks):
            decl = " ".join(f"({v} Real)" for v in names)
            body = f"({q} ({decl}) {body})"
        lines.append(f"(assert {body})")
        lines.append("(check-sat)")
        return "\n".join(lines) + "\n"
    raise FormulaError(f"unknown dialect {dialect!r}")


def _tokens(text):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read(tokens, pos=0):
    tok = tokens[pos]
    if tok == "(":
        out, pos = [], pos + 1
        while tokens[pos] != ")":
            item, pos = _read(tokens, pos)
            out.append(item)
        return out, pos + 1
    if tok == ")":
        raise FormulaError("unexpected ')'")
    return tok, pos + 1


def _int_token(t):
    try:
        return int(t)
    except (TypeError, ValueError):
        return None


def _to_expr(tree):
    if isinstance(tree, str):
        c = _int_token(tree)
        return Poly.const(c) if c is not None else Poly.var(tree)
    head, args = tree[0], tree[1:]
    if head == "pow":
        return PowExpr(_to_expr(args[0]), int(args[1]))
    if head == "sum":
        return SumExpr(tuple((int(c), _to_expr(e)) for c, e in args))
    vals = [_to_expr(a) for a in args]
    if any(not isinstance(v, Poly) for v in vals):
        raise FormulaError("arithmetic on unexpanded powers must use (sum ...)")
    if head == "+":
        return sum(vals, Poly())
    if head == "*":
        out = Poly.const(1)
        for v in vals:
            out = out * v
        return out
    if head == "-" and len(vals) == 1:
        return -vals[0]
    if head == "^":
        return vals[0] ** int(args[1])
    raise FormulaError(f"unknown operator {head!r}")


def _to_bool(tree):
    if not isinstance(tree, list) or not tree:
        raise FormulaError(f"expected a boolean form, got {tree!r}")
    head, args = tree[0], tree[1:]
    if head == "and":
        return And(tuple(_to_bool(a) for a in args))
    if head == "or":
        return Or(tuple(_to_bool(a) for a in args))
    if head == "not":
        return Not(_to_bool(args[0]))
    if head == "implies":
        return Implies(_to_bool(args[0]), _to_bool(args[1]))
    if head in RELATIONS:
        return Atom(_to_expr(args[0]), head, _to_expr(args[1]))
    raise FormulaError(f"unknown connective {head!r}")


def parse_text(text):
    """Inverse of emit_text(..., 'PrenexPlain')."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "PRENEX 1":
        raise FormulaError("missing 'PRENEX 1' header")
    if not lines[1].startswith("free"):
        raise FormulaError("second line must list free variables")
    free = tuple(lines[1].split()[1:])
    blocks = []
    k = 2
    while k < len(lines) and lines[k].split()[0] in ("forall", "exists"):
        parts = lines[k].split()
        blocks.append((parts[0], tuple(parts[1:])))
        k += 1
    if k != len(lines) - 1 or not lines[k].startswith("matrix "):
        raise FormulaError("expected a single 'matrix' line at the end")
    tree, pos = _read(_tokens(lines[k][len("matrix "):]))
    return Formula(free, tuple(blocks), _to_bool(tree))


def coefficient_bound(instance):
    """r (tau + ceil(log2 m)) + r, the bit budget for expanded dual-form powers."""
    r, m = instance.p.r, instance.m
    return r * (instance.tau + (m - 1).bit_length()) + r
