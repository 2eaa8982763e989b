"""Problem data for p-order cone feasibility.

An instance asks whether some (x, z) with ||x||_p <= z satisfies
F x + G z <= H row by row.  All data are integers; the exponent is a
reduced fraction r/s with r > s >= 1.
"""
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm

import numpy as np


class InstanceError(ValueError):
    """Malformed instance data."""


class TrivialDimensionError(InstanceError):
    """A cone of dimension n = 1 is a pair of half-lines, not a p-order cone."""


def bit_size(b):
    """Bits of an integer: floor(log2 |b|) + 1, and 1 for zero."""
    b = int(b)
    if b == 0:
        return 1
    return abs(b).bit_length()


@dataclass(frozen=True)
class RationalExponent:
    """Exponent p = r/s of a p-order cone, stored reduced."""

    r: int
    s: int

    def __post_init__(self):
        r, s = int(self.r), int(self.s)
        if s < 1:
            raise InstanceError(f"exponent denominator must be positive, got {s}")
        g = gcd(r, s)
        r, s = r // g, s // g
        if r <= s:
            raise InstanceError(f"exponent must exceed 1, got {r}/{s}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", s)

    @classmethod
    def parse(cls, text):
        text = str(text).strip()
        if "/" in text:
            a, b = text.split("/", 1)
            return cls(int(a), int(b))
        return cls(int(text), 1)

    @property
    def value(self):
        return Fraction(self.r, self.s)

    def __float__(self):
        return self.r / self.s

    def __str__(self):
        return f"{self.r}/{self.s}"

    def conjugate(self):
        """Hölder conjugate q = r/(r - s), so that 1/p + 1/q = 1."""
        return RationalExponent(self.r, self.r - self.s)

    @property
    def is_integer(self):
        return self.s == 1


def as_exponent(p):
    if isinstance(p, RationalExponent):
        return p
    if isinstance(p, Fraction):
        return RationalExponent(p.numerator, p.denominator)
    if isinstance(p, int):
        return RationalExponent(p, 1)
    if isinstance(p, str):
        return RationalExponent.parse(p)
    if isinstance(p, tuple) and len(p) == 2:
        return RationalExponent(*p)
    raise InstanceError(f"cannot read {p!r} as a rational exponent")


def _int_matrix(rows, name):
    out = []
    for row in rows:
        out.append(tuple(_int(v, name) for v in row))
    return tuple(out)


def _int(v, name):
    if isinstance(v, (bool, np.bool_)):
        raise InstanceError(f"{name} entries must be integers, got {v!r}")
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    if isinstance(v, (float, np.floating)) and float(v).is_integer():
        return int(v)
    raise InstanceError(f"{name} entries must be integers, got {v!r}")


@dataclass(frozen=True)
class PocpInstance:
    """Rows f_i^T x + g_i z <= h_i over the cone ||x||_p <= z.

    Parameters
    ----------
    F : m x n integer matrix
    G : length-m integer vector (coefficient of z)
    H : length-m integer vector (right-hand side)
    p : exponent, anything `as_exponent` accepts
    """

    F: tuple
    G: tuple
    H: tuple
    p: RationalExponent

    def __post_init__(self):
        F = _int_matrix(self.F, "F")
        G = tuple(_int(v, "G") for v in self.G)
        H = tuple(_int(v, "H") for v in self.H)
        m = len(G)
        if m < 1:
            raise InstanceError("an instance needs at least one row")
        if len(F) != m or len(H) != m:
            raise InstanceError(f"row counts disagree: F {len(F)}, G {m}, H {len(H)}")
        widths = {len(row) for row in F}
        if len(widths) != 1:
            raise InstanceError("rows of F have different lengths")
        n = widths.pop()
        if n == 1:
            raise TrivialDimensionError("cone dimension n = 1 is not supported, pad x to n >= 2")
        if n < 1:
            raise InstanceError("F has no columns")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "p", as_exponent(self.p))

    @property
    def m(self):
        return len(self.G)

    @property
    def n(self):
        return len(self.F[0])

    @property
    def tau(self):
        """Largest bit size over all entries of F, G, H."""
        vals = [v for row in self.F for v in row] + list(self.G) + list(self.H)
        return max(bit_size(v) for v in vals)

    def arrays(self):
        return (np.array(self.F, dtype=float), np.array(self.G, dtype=float),
                np.array(self.H, dtype=float))

    def subset(self, rows):
        rows = list(rows)
        return PocpInstance(tuple(self.F[i] for i in rows), tuple(self.G[i] for i in rows),
                            tuple(self.H[i] for i in rows), self.p)

    def with_rows(self, F_extra, G_extra, H_extra):
        return PocpInstance(self.F + tuple(map(tuple, F_extra)), self.G + tuple(G_extra),
                            self.H + tuple(H_extra), self.p)

    def scaled(self, k):
        """Every row multiplied by the positive integer k."""
        return PocpInstance(tuple(tuple(k * v for v in row) for row in self.F),
                            tuple(k * v for v in self.G), tuple(k * v for v in self.H), self.p)

    def homogenized(self):
        """Same rows with a zero right-hand side (the recession system)."""
        return PocpInstance(self.F, self.G, (0,) * self.m, self.p)

    def as_multi(self):
        return MultiConeInstance((ConeBlock(self.n, self.p),), (self.F,), (self.G,), self.H)


@dataclass(frozen=True)
class ConeBlock:
    n: int
    p: RationalExponent

    def __post_init__(self):
        if self.n == 1:
            raise TrivialDimensionError("cone dimension n = 1 is not supported, pad x to n >= 2")
        if self.n < 1:
            raise InstanceError("cone block needs n >= 2")
        object.__setattr__(self, "p", as_exponent(self.p))


@dataclass(frozen=True)
class MultiConeInstance:
    """Rows sum_k (F_k x_k + G_k z_k) <= H with (x_k, z_k) in independent cones.

    F[k] is m x n_k, G[k] has length m.  Variables are laid out block by
    block as (x_1, z_1, x_2, z_2, ...).
    """

    blocks: tuple
    F: tuple
    G: tuple
    H: tuple

    def __post_init__(self):
        blocks = tuple(b if isinstance(b, ConeBlock) else ConeBlock(*b) for b in self.blocks)
        if not blocks:
            raise InstanceError("need at least one cone block")
        if len(self.F) != len(blocks) or len(self.G) != len(blocks):
            raise InstanceError("one F and one G per block are required")
        H = tuple(_int(v, "H") for v in self.H)
        m = len(H)
        if m < 1:
            raise InstanceError("an instance needs at least one row")
        F, G = [], []
        for k, b in enumerate(blocks):
            Fk = _int_matrix(self.F[k], "F")
            Gk = tuple(_int(v, "G") for v in self.G[k])
            if len(Fk) != m or len(Gk) != m:
                raise InstanceError(f"block {k}: row counts disagree with H")
            if any(len(row) != b.n for row in Fk):
                raise InstanceError(f"block {k}: F rows must have length {b.n}")
            F.append(Fk)
            G.append(Gk)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "F", tuple(F))
        object.__setattr__(self, "G", tuple(G))
        object.__setattr__(self, "H", H)

    @property
    def m(self):
        return len(self.H)

    @property
    def sizes(self):
        return [b.n for b in self.blocks]

    @property
    def dim(self):
        return sum(b.n + 1 for b in self.blocks)

    @property
    def tau(self):
        vals = list(self.H)
        for Fk, Gk in zip(self.F, self.G):
            vals += [v for row in Fk for v in row] + list(Gk)
        return max(bit_size(v) for v in vals)

    def offsets(self):
        """Start index of each block in the stacked variable vector."""
        out, at = [], 0
        for b in self.blocks:
            out.append(at)
            at += b.n + 1
        return out

    def row_matrix(self):
        """Dense m x dim matrix acting on the stacked (x_k, z_k) vector."""
        A = np.zeros((self.m, self.dim))
        for k, at in enumerate(self.offsets()):
            n = self.blocks[k].n
            A[:, at:at + n] = np.array(self.F[k], dtype=float)
            A[:, at + n] = np.array(self.G[k], dtype=float)
        return A

    def subset(self, rows):
        rows = list(rows)
        return MultiConeInstance(self.blocks, tuple(tuple(Fk[i] for i in rows) for Fk in self.F),
                                 tuple(tuple(Gk[i] for i in rows) for Gk in self.G),
                                 tuple(self.H[i] for i in rows))

    def scaled(self, k):
        """Every row multiplied by the positive integer k."""
        return MultiConeInstance(self.blocks,
                                 tuple(tuple(tuple(k * v for v in row) for row in Fk) for Fk in self.F),
                                 tuple(tuple(k * v for v in Gk) for Gk in self.G),
                                 tuple(k * v for v in self.H))

    def with_rows(self, A_extra, H_extra):
        """Append rows given on the stacked variable vector."""
        A_extra = [list(row) for row in A_extra]
        F, G = [], []
        for k, at in enumerate(self.offsets()):
            n = self.blocks[k].n
            F.append(self.F[k] + tuple(tuple(row[at:at + n]) for row in A_extra))
            G.append(self.G[k] + tuple(row[at + n] for row in A_extra))
        return MultiConeInstance(self.blocks, tuple(F), tuple(G), self.H + tuple(H_extra))


def integer_row(coeffs, rhs):
    """Scale a rational row a^T v <= b to integers by the lcm of denominators."""
    vals = [Fraction(c) for c in coeffs] + [Fraction(rhs)]
    scale = 1
    for v in vals:
        scale = lcm(scale, v.denominator)
    return [int(v * scale) for v in vals[:-1]], int(vals[-1] * scale)
