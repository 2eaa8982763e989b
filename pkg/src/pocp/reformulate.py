"""Rotated second-order and semidefinite reformulations of p-order cone rows.

For p = r/s the cone constraint is split coordinatewise into
|x_j|^r <= z^(r-s) t_j^s plus the budget sum_j t_j <= z.  Each power
inequality is certified by a chain of 3-d rotated cone blocks
w_u w_{2v-u} >= w_v^2 indexed by a mediated graph on {0, ..., r}, with
w_0 = z, w_s = |x_j| and w_r = t_j.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, gcd, log2

import numpy as np

from .geometry import DomainError
from .instance import PocpInstance

EXHAUSTIVE_MAX_R = 64


class BudgetError(RuntimeError):
    """Exhaustive search requested beyond its size cap."""


@dataclass(frozen=True)
class MediatedGraph:
    """Interior nodes V of {0, ..., r} with one midpoint arc per node.

    arcs[v] = (u, 2v - u): both endpoints lie in V or {0, r} and differ from v.
    """

    r: int
    s: int
    V: tuple
    arcs: dict

    @property
    def size(self):
        return len(self.V)


def log2_ceil(r):
    return ceil(log2(r)) if r > 1 else 0


def _pair_for(v, pool):
    """Smallest u < v in pool with 2v - u in pool, or None."""
    for u in sorted(pool):
        if u >= v:
            break
        if 2 * v - u in pool:
            return u
    return None


def _arcs_of(V, r):
    pool = set(V) | {0, r}
    arcs = {}
    for v in sorted(V):
        u = _pair_for(v, pool)
        if u is None:
            return None
        arcs[v] = (u, 2 * v - u)
    return arcs


def validate_graph(g):
    """Raise ValueError unless g satisfies every mediated-graph invariant."""
    if g.s not in g.V:
        raise ValueError("s must be a node")
    pool = set(g.V) | {0, g.r}
    if set(g.arcs) != set(g.V):
        raise ValueError("every node needs exactly one arc")
    for v, (a, b) in g.arcs.items():
        if not 0 < v < g.r:
            raise ValueError(f"node {v} outside (0, r)")
        if a + b != 2 * v or a == v or a not in pool or b not in pool:
            raise ValueError(f"bad arc {v} -> ({a}, {b})")
    return True


def _search(r, s, k):
    """All inclusion-minimal valid node sets of size <= k containing s."""
    found = set()

    def grow(S, pending):
        if not pending:
            found.add(frozenset(S))
            return
        v = min(pending)
        pool = S | {0, r}
        rest = pending - {v}
        for u in range(max(0, 2 * v - r), v):
            w = 2 * v - u
            new = {x for x in (u, w) if x not in pool}
            if len(S) + len(new) > k:
                continue
            grow(S | new, rest | new)

    grow({s}, {s})
    return found


def _exhaustive(r, s):
    for k in range(1, r):
        sets = _search(r, s, k)
        sets = [S for S in sets if len(S) == k]
        if sets:
            # tie-break: first set met when walking size-k combinations of
            # the descending candidate list
            best = max(tuple(sorted(S, reverse=True)) for S in sets)
            return tuple(sorted(best))
    raise AssertionError("a valid node set always exists")


def _euclid(r, s):
    """Halve the bracketing interval when its midpoint is integral, reflect otherwise."""
    V = set()

    def place(a, b, t):
        # a < t < b with a and b already available
        if t in V or t in (0, r):
            return
        V.add(t)
        if 2 * t == a + b:
            return
        if (a + b) % 2 == 0:
            m = (a + b) // 2
            place(a, b, m)
            if t < m:
                place(a, m, t)
            else:
                place(m, b, t)
            return
        if 2 * t < a + b:
            place(t, b, 2 * t - a)
        else:
            place(a, t, 2 * t - b)

    place(0, r, s)
    return V


def _greedy_search(r, s, k, budget):
    """Depth-first fill with cheap pairs first; None if nothing within k nodes or budget."""
    work = [0]

    def grow(S, pending):
        if not pending:
            return S
        # the node farthest from the centre has the fewest pairs
        v = min(pending, key=lambda t: -abs(2 * t - r))
        pool = S | {0, r}
        rest = pending - {v}
        opts = []
        for u in range(max(0, 2 * v - r), v):
            w = 2 * v - u
            new = {x for x in (u, w) if x not in pool}
            if len(S) + len(new) <= k:
                opts.append((len(new), u - w, new))
        work[0] += 1 + 2 * v - max(0, 2 * v - r)
        if work[0] > budget:
            return None
        opts.sort(key=lambda o: o[:2])
        for _, _, new in opts:
            out = grow(S | new, rest | new)
            if out or work[0] > budget:
                return out
        return None

    return grow({s}, {s})


def _doubling_orbit(r, s):
    V, v = set(), s
    while v not in V and 0 < v < r:
        V.add(v)
        v = 2 * v if 2 * v <= r else 2 * v - r
    return V


def build_mediated_graph(r, s, mode="ExhaustiveMinimal"):
    """Mediated graph for the power inequality |x|^r <= z^(r-s) t^s.

    ExhaustiveMinimal returns a node set of minimum size (r <= 64).
    GreedyDoubling takes the smaller of two constructive chains and is not
    guaranteed minimal; see `exceeds_log_bound`.
    """
    r, s = int(r), int(s)
    if not 1 <= s < r:
        raise DomainError("need 1 <= s < r")
    if gcd(r, s) != 1:
        raise DomainError("r and s must be coprime")
    if mode == "ExhaustiveMinimal":
        if r > EXHAUSTIVE_MAX_R:
            raise BudgetError(f"exhaustive search is capped at r <= {EXHAUSTIVE_MAX_R}; use GreedyDoubling")
        V = _exhaustive(r, s)
        if len(V) > log2_ceil(r):
            raise AssertionError(f"minimal mediated set for ({r},{s}) has {len(V)} > ceil(log2 r) nodes")
    elif mode == "GreedyDoubling":
        cands = [_euclid(r, s), _doubling_orbit(r, s)]
        base = log2_ceil(r)
        for k in range(base, base + 4):
            V = _greedy_search(r, s, k, 200_000)
            if V:
                cands.append(V)
                break
        cands = [c for c in cands if _arcs_of(c, r) is not None]
        V = tuple(sorted(min(cands, key=len)))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    g = MediatedGraph(r, s, tuple(V), _arcs_of(V, r))
    validate_graph(g)
    return g


def exceeds_log_bound(g):
    return g.size > log2_ceil(g.r)


def certificate_exponents(g):
    """Exact weights c_v >= 0 with

        sum_v c_v (L_u + L_{2v-u} - 2 L_v) = (r - s) L_0 + s L_r - r L_s

    for every assignment L of logs to nodes.  Multiplying the blocks
    w_u w_{2v-u} >= w_v^2 raised to c_v then gives |x|^r <= z^(r-s) t^s.
    """
    nodes = sorted(g.V)
    idx = {v: i for i, v in enumerate(nodes)}
    k = len(nodes)
    A = [[Fraction(0)] * k for _ in range(k)]
    b = [Fraction(0)] * k
    for col, v in enumerate(nodes):
        u, w = g.arcs[v]
        A[idx[v]][col] -= 2
        for e in (u, w):
            if e in idx:
                A[idx[e]][col] += 1
    b[idx[g.s]] = Fraction(-g.r)
    c = _solve_exact(A, b)
    # the rows for the anchors 0 and r must come out as r - s and s
    at0 = sum(c[i] for i, v in enumerate(nodes) if 0 in g.arcs[v])
    atr = sum(c[i] for i, v in enumerate(nodes) if g.r in g.arcs[v])
    if at0 != g.r - g.s or atr != g.s or any(x < 0 for x in c):
        raise AssertionError("certificate does not balance")
    return dict(zip(nodes, c))


def _solve_exact(A, b):
    k = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(k):
        piv = next(i for i in range(col, k) if M[i][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for i in range(k):
            if i != col and M[i][col] != 0:
                f = M[i][col]
                M[i] = [a - f * c for a, c in zip(M[i], M[col])]
    return [M[i][k] for i in range(k)]


def chain_log_residual(g, weights, logs):
    """Both sides of the certificate identity for a dict of node logs."""
    lhs = sum(c * (logs[g.arcs[v][0]] + logs[g.arcs[v][1]] - 2 * logs[v]) for v, c in weights.items())
    rhs = (g.r - g.s) * logs[0] + g.s * logs[g.r] - g.r * logs[g.s]
    return float(lhs), float(rhs)


@dataclass(frozen=True)
class RotatedBlock:
    """w_a * w_b >= w_c^2 with w_a, w_b >= 0."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        if len({self.a, self.b, self.c}) != 3:
            raise ValueError("block slots must be distinct")


@dataclass
class LinearRow:
    """sum coeffs[k] * var_k (sense) rhs with sense '<=' or '=='."""

    coeffs: dict
    sense: str
    rhs: Fraction


@dataclass
class ConicProgram:
    variables: list = field(default_factory=list)   # (name, role)
    rows: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    graph: MediatedGraph = None
    n: int = 0

    def add_var(self, name, role):
        self.variables.append((name, role))
        return len(self.variables) - 1

    def index(self, name):
        for i, (nm, _) in enumerate(self.variables):
            if nm == name:
                return i
        raise KeyError(name)

    @property
    def budget_rows(self):
        return [r for r in self.rows if getattr(r, "tag", None) == "budget"]


def compile_soc(instance, mode=None):
    """Rotated-cone program equivalent to the instance.

    Variables: x_1..x_n, z, t_1..t_n and w[j,v] for interior nodes v.  The
    anchors are identified by equalities w[j,0] = z, w[j,s] = x_j (or, when
    s is itself an arc endpoint and so must be nonnegative, an auxiliary
    w[j,s] >= +-x_j) and w[j,r] = t_j.
    """
    if not isinstance(instance, PocpInstance):
        raise TypeError("compile_soc expects a PocpInstance")
    r, s = instance.p.r, instance.p.s
    if mode is None:
        mode = "ExhaustiveMinimal" if r <= EXHAUSTIVE_MAX_R else "GreedyDoubling"
    g = build_mediated_graph(r, s, mode)
    n = instance.n
    prog = ConicProgram(graph=g, n=n)
    xs = [prog.add_var(f"x{j}", "original") for j in range(n)]
    z = prog.add_var("z", "original")
    ts = [prog.add_var(f"t{j}", "aux_t") for j in range(n)]
    for i in range(instance.m):
        coeffs = {xs[j]: Fraction(instance.F[i][j]) for j in range(n) if instance.F[i][j]}
        if instance.G[i]:
            coeffs[z] = Fraction(instance.G[i])
        prog.rows.append(LinearRow(coeffs, "<=", Fraction(instance.H[i])))
    budget = LinearRow({**{t: Fraction(1) for t in ts}, z: Fraction(-1)}, "<=", Fraction(0))
    budget.tag = "budget"
    prog.rows.append(budget)

    s_is_endpoint = any(s in pair for pair in g.arcs.values())
    for j in range(n):
        slot = {}
        for v in (0,) + g.V + (r,):
            slot[v] = prog.add_var(f"w{j}_{v}", "aux_w")
        prog.rows.append(LinearRow({slot[0]: Fraction(1), z: Fraction(-1)}, "==", Fraction(0)))
        prog.rows.append(LinearRow({slot[r]: Fraction(1), ts[j]: Fraction(-1)}, "==", Fraction(0)))
        if s_is_endpoint:
            prog.rows.append(LinearRow({xs[j]: Fraction(1), slot[s]: Fraction(-1)}, "<=", Fraction(0)))
            prog.rows.append(LinearRow({xs[j]: Fraction(-1), slot[s]: Fraction(-1)}, "<=", Fraction(0)))
        else:
            prog.rows.append(LinearRow({slot[s]: Fraction(1), xs[j]: Fraction(-1)}, "==", Fraction(0)))
        for v in g.V:
            u, w = g.arcs[v]
            prog.blocks.append(RotatedBlock(slot[u], slot[w], slot[v]))
    return prog


def witness(prog, x, z):
    """Full variable vector extending (x, z): t_j = |x_j|^p z^(1-p), w[j,v] = |x_j|^(v/s) z^(1-v/s)."""
    g = prog.graph
    x = np.asarray(x, dtype=float)
    z = float(z)
    vals = np.zeros(len(prog.variables))
    ax = np.abs(x)

    def power(a, v):
        if v == 0:
            return z
        if z == 0.0:
            return 0.0
        e = v / g.s
        if a == 0.0:
            return 0.0 if e > 1 else (z if e == 0 else 0.0)
        return float(np.exp(e * np.log(a) + (1 - e) * np.log(z)))

    for i, (name, role) in enumerate(prog.variables):
        if name == "z":
            vals[i] = z
        elif role == "original":
            vals[i] = x[int(name[1:])]
        elif role == "aux_t":
            vals[i] = power(ax[int(name[1:])], g.r)
        else:
            j, v = name[1:].split("_")
            j, v = int(j), int(v)
            vals[i] = x[j] if (v == g.s and not any(g.s in p for p in g.arcs.values())) else power(ax[j], v)
    return vals


def check_program(prog, vals, tol=1e-8, skip_rows=0):
    """True when every row and block holds at `vals` within tol (scaled by magnitude)."""
    vals = np.asarray(vals, dtype=float)
    for row in prog.rows[skip_rows:]:
        lhs = sum(float(c) * vals[k] for k, c in row.coeffs.items())
        scale = max(1.0, max((abs(float(c) * vals[k]) for k, c in row.coeffs.items()), default=0.0))
        if row.sense == "==" and abs(lhs - float(row.rhs)) > tol * scale:
            return False
        if row.sense == "<=" and lhs - float(row.rhs) > tol * scale:
            return False
    for b in prog.blocks:
        wa, wb, wc = vals[b.a], vals[b.b], vals[b.c]
        scale = max(1.0, wa * wb, wc * wc)
        if wa < -tol or wb < -tol or wc * wc - wa * wb > tol * scale:
            return False
    return True


def block_satisfiable(prog, x, z, tol=1e-8):
    """Whether (x, z) extends to a point meeting the budget row and all blocks.

    The instance rows are skipped.  The witness is optimal for each t_j by
    the certificate, so checking it decides existence.
    """
    if float(z) < -tol:
        return False
    first = next(i for i, r in enumerate(prog.rows) if getattr(r, "tag", None) == "budget")
    return check_program(prog, witness(prog, x, max(float(z), 0.0)), tol, skip_rows=first)


def rotate_map(point):
    """(x, y, z) -> (2x, y - z, y + z); x^2 <= yz, y, z >= 0 iff ||(2x, y - z)||_2 <= y + z."""
    x, y, z = point
    return (2 * x, y - z, y + z)


@dataclass
class SdpData:
    """Feasibility of <A_i, X> <= h_i over arrow-shaped PSD X of order n + 1.

    `identifications` lists the linear equalities that keep X arrow-shaped:
    ('zero', (i, j)) for i < j < n and ('equal', (j, n)) for the diagonal.
    """

    matrices: list
    rhs: list
    identifications: list
    order: int


def arrow_matrix(x, z):
    """[[z I, x], [x^T, z]]."""
    x = list(x)
    n = len(x)
    M = [[Fraction(0)] * (n + 1) for _ in range(n + 1)]
    for j in range(n):
        M[j][j] = z
        M[j][n] = x[j]
        M[n][j] = x[j]
    M[n][n] = z
    return M


def arrow_lift(instance):
    if not isinstance(instance, PocpInstance):
        raise TypeError("arrow_lift expects a PocpInstance")
    if instance.p.value != 2:
        raise DomainError("the arrow lift needs p = 2")
    n = instance.n
    mats = []
    for i in range(instance.m):
        f = [Fraction(a, 2) for a in instance.F[i]]
        mats.append(arrow_matrix(f, Fraction(instance.G[i], n + 1)))
    ident = [("zero", (i, j)) for i in range(n) for j in range(i + 1, n)]
    ident += [("equal", (j, n)) for j in range(n)]
    return SdpData(mats, [Fraction(h) for h in instance.H], ident, n + 1)


def arrow_psd(x, z, tol=1e-9):
    """Smallest eigenvalue test of the arrow matrix, relative to its scale."""
    M = np.array(arrow_matrix([float(v) for v in x], float(z)), dtype=float)
    scale = max(1.0, np.abs(M).max())
    return bool(np.linalg.eigvalsh(M).min() >= -tol * scale)
