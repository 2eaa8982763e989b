"""Model builders: norm minimisation, SVM, robust least squares, Weber, ordered median, robust LP.

Every model is a product of p-order cones with integer rows.  Free
variables live in "carrier" blocks: a 2-norm cone whose z is left alone,
so the carrier coordinates range over the ball of radius R.  Carriers
of a single variable are padded to two coordinates.
"""
import csv
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

import numpy as np

from .geometry import DomainError
from .instance import ConeBlock, MultiConeInstance, PocpInstance, as_exponent, integer_row
from .optimize import ObjectiveProblem, minimize

DEFAULT_RADIUS = 10


@dataclass
class AppModel:
    """A built model plus the map from application names to stacked slots.

    names[key] is a list of stacked indices; `scalar` keys decode to floats.
    """

    kind: str
    problem: ObjectiveProblem
    names: dict
    radii: object
    scalar: set = field(default_factory=set)
    notes: list = field(default_factory=list)

    @property
    def instance(self):
        return self.problem.base

    def _flat(self, point):
        if isinstance(self.instance, PocpInstance):
            x, z = point
            return np.concatenate([np.asarray(x, dtype=float), [float(z)]])
        return np.concatenate([np.concatenate([np.asarray(x, dtype=float), [float(z)]]) for x, z in point])

    def decode(self, point):
        y = self._flat(point)
        out = {}
        for key, idx in self.names.items():
            vals = y[idx]
            out[key] = float(vals[0]) if key in self.scalar else vals.copy()
        return out

    def encode(self, values):
        """Stacked vector (as block points) with the named entries filled in, zeros elsewhere."""
        inst = self.instance
        dim = inst.n + 1 if isinstance(inst, PocpInstance) else inst.dim
        y = np.zeros(dim)
        for key, idx in self.names.items():
            if key in values:
                y[idx] = np.atleast_1d(np.asarray(values[key], dtype=float))
        if isinstance(inst, PocpInstance):
            return y[:-1], float(y[-1])
        pts = []
        for k, at in enumerate(inst.offsets()):
            n = inst.blocks[k].n
            pts.append((y[at:at + n], float(y[at + n])))
        return pts


class _Builder:
    def __init__(self):
        self.blocks = []
        self.caps = []
        self.rows = []

    @property
    def dim(self):
        return sum(n + 1 for n, _ in self.blocks)

    def block(self, n, p, cap=None):
        """Add a cone block; returns (x slots, z slot) as stacked indices.

        cap is the block radius; None means the model radius.
        """
        at = self.dim
        self.blocks.append((n, as_exponent(p)))
        self.caps.append(cap)
        return list(range(at, at + n)), at + n

    def carrier(self, size, cap=None):
        xs, _ = self.block(max(size, 2), 2, cap)
        return xs[:size]

    def le(self, coeffs, rhs):
        self.rows.append((dict(coeffs), Fraction(rhs)))

    def eq(self, coeffs, rhs):
        self.le(coeffs, rhs)
        self.le({k: -v for k, v in coeffs.items()}, -Fraction(rhs))

    def build(self):
        dim = self.dim
        A, H = [], []
        for coeffs, rhs in self.rows:
            dense = [Fraction(0)] * dim
            for k, v in coeffs.items():
                dense[k] += Fraction(v)
            row, b = integer_row(dense, rhs)
            A.append(row)
            H.append(b)
        blocks = [ConeBlock(n, p) for n, p in self.blocks]
        F, G, at = [], [], 0
        for n, _ in self.blocks:
            F.append([row[at:at + n] for row in A])
            G.append([row[at + n] for row in A])
            at += n + 1
        return MultiConeInstance(tuple(blocks), tuple(F), tuple(G), tuple(H))

    def objective(self, coeffs):
        c = [Fraction(0)] * self.dim
        for k, v in coeffs.items():
            c[k] += Fraction(v)
        return c


def _fr(v):
    if isinstance(v, float):
        return Fraction(Decimal(repr(v)))
    return Fraction(v)


def _radii(builder, R):
    # blocks whose z is pinned by the rows get a radius large enough that the
    # cap never binds while the free variables stay within R
    return [float(R) if c is None else max(float(R), float(c)) for c in builder.caps]


def build_nmp(A, b, p, R=DEFAULT_RADIUS, eps=1e-4):
    """min ||x||_p subject to A x <= b, as min z over a single cone."""
    A = [[int(v) for v in row] for row in A]
    n = len(A[0])
    inst = PocpInstance(A, [0] * len(A), [int(v) for v in b], p)
    c = [0] * n + [1]
    prob = ObjectiveProblem(inst, c, lb=0, ub=R, eps=eps)
    names = {"x": list(range(n)), "z": [n]}
    return AppModel("NMP", prob, names, float(R), {"z"})


def build_svm(samples, C, p, R=DEFAULT_RADIUS, eps=1e-4):
    """min z + C sum xi with y_i (w^T x_i + b) + xi_i >= 1, xi >= 0, ||w||_p <= z."""
    C = _fr(C)
    if C < 0:
        raise DomainError("C must be nonnegative")
    pts = [[_fr(v) for v in x] for x, _ in samples]
    labels = [int(y) for _, y in samples]
    if any(y not in (-1, 1) for y in labels):
        raise DomainError("labels must be -1 or +1")
    d = len(pts[0])
    B = _Builder()
    w, z = B.block(max(d, 2), p)
    w = w[:d]
    bias = B.carrier(1)[0]
    # hinge slack: xi_i <= 1 + ||x_i||_inf ||w||_1 + |b| with ||w||_1 <= d R
    R = _fr(R)
    worst = max(1 + max(abs(v) for v in x) * d * R + R for x in pts)
    xi = B.carrier(len(pts), worst * len(pts))
    for i, (x, y) in enumerate(zip(pts, labels)):
        coeffs = {w[j]: -y * x[j] for j in range(d)}
        coeffs[bias] = -y
        coeffs[xi[i]] = -1
        B.le(coeffs, -1)
        B.le({xi[i]: -1}, 0)
    inst = B.build()
    c = B.objective({z: 1, **{k: C for k in xi}})
    prob = ObjectiveProblem(inst, c, eps=eps)
    names = {"w": w, "b": [bias], "xi": xi, "z": [z]}
    return AppModel("SVM", prob, names, _radii(B, R), {"b", "z"})


def build_rls(X, y, p, nu_X, nu_y, R=DEFAULT_RADIUS, eps=1e-4):
    """min ||X w - y||_2^2 + nu_X ||w||_q + nu_y with q conjugate to p.

    The square is the epigraph ||(r, c - 1)||_2 <= c of t = 2c - 1 >= ||r||^2,
    a 2-norm cone equivalent to a rotated cone block.
    """
    nu_X, nu_y = _fr(nu_X), _fr(nu_y)
    if nu_X < 0 or nu_y < 0:
        raise DomainError("nu_X and nu_y must be nonnegative")
    X = [[_fr(v) for v in row] for row in X]
    y = [_fr(v) for v in y]
    k, n = len(X), len(X[0])
    q = as_exponent(p).conjugate()
    B = _Builder()
    w, zw = B.block(max(n, 2), q)
    w = w[:n]
    # residuals obey |r_i| <= ||X_i||_1 R + |y_i| while ||w||_q <= R
    rho2 = sum((sum(abs(v) for v in X[i]) * _fr(R) + abs(y[i])) ** 2 for i in range(k))
    sq, c = B.block(k + 1, 2, (rho2 + 1) / 2 + 1)
    res, half = sq[:k], sq[k]
    for i in range(k):
        coeffs = {res[i]: 1, **{w[j]: -X[i][j] for j in range(n)}}
        B.eq(coeffs, -y[i])
    B.eq({half: 1, c: -1}, -1)
    inst = B.build()
    obj = B.objective({c: 2, zw: nu_X})
    prob = ObjectiveProblem(inst, obj, eps=eps, offset=nu_y - 1)
    names = {"w": w, "z": [zw], "t_half": [c]}
    return AppModel("RLS", prob, names, _radii(B, R), {"z", "t_half"},
                    ["objective = 2 c - 1 + nu_X z + nu_y with c the square-epigraph height"])


def _location(points, weights, p, R):
    pts = [[_fr(v) for v in x] for x in points]
    lam = [_fr(v) for v in weights]
    if any(v <= 0 for v in lam):
        raise DomainError("location weights must be positive")
    d, n = len(pts), len(pts[0])
    B = _Builder()
    x = B.carrier(n)
    zs, ws = [], []
    for i in range(d):
        # ||x_i - x||_p <= ||x_i||_1 + n R
        wi, zi = B.block(max(n, 2), p, sum(abs(v) for v in pts[i]) + n * _fr(R))
        wi = wi[:n]
        for j in range(n):
            B.eq({wi[j]: 1, x[j]: 1}, pts[i][j])
        ws.append(wi)
        zs.append(zi)
    return B, x, ws, zs, lam


def build_weber(points, weights, p, R=DEFAULT_RADIUS, eps=1e-4):
    """min sum_i lambda_i ||x - x_i||_p with w_i = x_i - x in the cone."""
    B, x, ws, zs, lam = _location(points, weights, p, R)
    inst = B.build()
    c = B.objective({zs[i]: lam[i] for i in range(len(zs))})
    prob = ObjectiveProblem(inst, c, eps=eps)
    names = {"x": x, **{f"z{i}": [z] for i, z in enumerate(zs)}}
    return AppModel("Weber", prob, names, _radii(B, R), {f"z{i}" for i in range(len(zs))})


def build_comp(points, weights, omega, p, R=DEFAULT_RADIUS, eps=1e-4):
    """Ordered median location through its convex rewrite.

    Requires omega_1 >= ... >= omega_d >= 0, the condition under which the
    sorted objective is convex; rows u_i + v_k >= omega_i lambda_k z_k.
    """
    om = [_fr(v) for v in omega]
    if any(v < 0 for v in om) or any(om[i] < om[i + 1] for i in range(len(om) - 1)):
        raise DomainError("ordered median weights must be nonincreasing and nonnegative "
                          "for the convex reformulation")
    B, x, ws, zs, lam = _location(points, weights, p, R)
    d = len(zs)
    if len(om) != d:
        raise ValueError("one omega weight per point is required")
    # u_i + v_k >= omega_i lambda_k z_k needs entries up to that product
    zcap = max(_fr(r) for r in _radii(B, R))
    top = max(om) * max(lam) * zcap * d
    u = B.carrier(d, top)
    v = B.carrier(d, top)
    for i in range(d):
        for k in range(d):
            B.le({zs[k]: om[i] * lam[k], u[i]: -1, v[k]: -1}, 0)
    inst = B.build()
    c = B.objective({**{k: 1 for k in u}, **{k: 1 for k in v}})
    prob = ObjectiveProblem(inst, c, eps=eps)
    names = {"x": x, "u": u, "v": v, **{f"z{i}": [z] for i, z in enumerate(zs)}}
    return AppModel("COMP", prob, names, _radii(B, R), {f"z{i}" for i in range(d)})


def build_robust_lp(c, a_bar, B_list, b=None, R=DEFAULT_RADIUS, eps=1e-4):
    """Robust LP with ellipsoidal rows: min c^T x, ||B_i x||_2 <= -a_i^T x, x_{n+1} = -1.

    x lives in R^{n+1} (last entry pinned); y_i = B_i x and z_i = -a_i^T x
    are tied to x by equalities, so singular B_i need no special casing.
    `b` is accepted for symmetry with the nominal data and must already be
    folded into the last column of a_bar.
    """
    a_bar = [[_fr(v) for v in row] for row in a_bar]
    N = len(a_bar[0])
    c = [_fr(v) for v in c]
    if len(c) == N - 1:
        c = c + [Fraction(0)]
    if len(c) != N:
        raise ValueError("c must have n or n + 1 entries")
    Bld = _Builder()
    x = Bld.carrier(N)
    Bld.eq({x[N - 1]: 1}, -1)
    ys, zs = [], []
    for i, (a, Bi) in enumerate(zip(a_bar, B_list)):
        Bi = [[_fr(v) for v in row] for row in Bi]
        if len(Bi) != N or any(len(row) != N for row in Bi):
            raise ValueError("each B_i must be square of order n + 1")
        # z_i = -a_i^T x with every |x_j| <= R
        yi, zi = Bld.block(N, 2, sum(abs(v) for v in a) * _fr(R))
        for r in range(N):
            Bld.eq({yi[r]: 1, **{x[j]: -Bi[r][j] for j in range(N) if Bi[r][j]}}, 0)
        Bld.eq({zi: 1, **{x[j]: a[j] for j in range(N) if a[j]}}, 0)
        ys.append(yi)
        zs.append(zi)
    inst = Bld.build()
    obj = Bld.objective({x[j]: c[j] for j in range(N)})
    prob = ObjectiveProblem(inst, obj, eps=eps)
    names = {"x": x, **{f"y{i}": y for i, y in enumerate(ys)}, **{f"z{i}": [z] for i, z in enumerate(zs)}}
    return AppModel("RobustLP", prob, names, _radii(Bld, R), {f"z{i}" for i in range(len(zs))})


def solve(model, budget=10**6, oracle_eps=1e-7):
    """Bisection solve of a built model; returns (OptimizeResult, decoded point)."""
    res = minimize(model.problem, model.radii, budget=budget, oracle_eps=oracle_eps)
    return res, model.decode(res.point)


def read_points_csv(path):
    """Rows of exact rationals from a CSV with a header: coordinates, then a label or weight."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        out = []
        for row in reader:
            if not row:
                continue
            vals = [Fraction(Decimal(v.strip())) for v in row]
            out.append((vals[:-1], vals[-1]))
    return out
