"""Certified enumeration of lattice classes with fixed square and linear data.

The solution set of ``C.C = square, A_i.C = c_i`` is a quadric slice of an
affine sublattice.  When the form restricted to the direction space (the
common kernel of the linear constraints) is negative definite, the slice is
a bounded ellipsoid and is enumerated exactly with a rational Fincke-Pohst
search.  Otherwise the search is refused.
"""
from __future__ import annotations

from fractions import Fraction
from math import isqrt, lcm
from typing import Iterable, Sequence

from .lattice import DivisorClass, Lattice, LatticeMismatchError

Constraint = tuple[DivisorClass, int]


class UnboundedRegionError(ValueError):
    """The constrained quadric is not certifiably finite."""

    def __init__(self, message: str, direction: DivisorClass | None = None):
        super().__init__(message)
        self.direction = direction


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def column_echelon(rows: Sequence[Sequence[int]], n: int):
    """Reduce ``rows`` by unimodular column operations.

    Returns ``(R, U, pivots)`` with ``R = rows * U`` lower echelon: row
    ``pivots[k][0]`` has its last nonzero entry in column ``k`` and columns
    past ``len(pivots)`` are identically zero.
    """
    r = [list(map(int, row)) for row in rows]
    u = [[int(i == j) for j in range(n)] for i in range(n)]

    def colop(j: int, k: int, a: int, b: int, c: int, d: int):
        # (col_j, col_k) <- (a col_j + b col_k, c col_j + d col_k)
        for mat in (r, u):
            for row in mat:
                x, y = row[j], row[k]
                row[j], row[k] = a * x + b * y, c * x + d * y

    pivots: list[tuple[int, int]] = []
    p = 0
    for i in range(len(r)):
        if p == n:
            break
        for k in range(p + 1, n):
            if r[i][k] == 0:
                continue
            a, b = r[i][p], r[i][k]
            g, s, t = _xgcd(a, b)
            # [[s, -b/g], [t, a/g]] has determinant 1
            colop(p, k, s, t, -b // g, a // g)
        if r[i][p] == 0:
            continue
        if r[i][p] < 0:
            colop(p, p, -1, 0, -1, 0)
        pivots.append((i, p))
        p += 1
    return r, u, pivots


def integer_kernel(rows: Sequence[Sequence[int]], n: int) -> list[tuple[int, ...]]:
    """Z-basis of ``{v in Z^n : rows . v = 0}``."""
    _, u, pivots = column_echelon(rows, n)
    r = len(pivots)
    return [tuple(u[i][j] for i in range(n)) for j in range(r, n)]


def solve_integer_system(rows: Sequence[Sequence[int]], rhs: Sequence[int], n: int):
    """All integer solutions of ``rows . v = rhs`` as ``(particular, kernel_basis)``.

    Returns None when there is no integer solution.
    """
    red, u, pivots = column_echelon(rows, n)
    r = len(pivots)
    y = [0] * n
    pivot_rows = {i: k for i, k in pivots}
    for i, row in enumerate(red):
        acc = sum(row[j] * y[j] for j in range(r))
        if i in pivot_rows:
            k = pivot_rows[i]
            acc -= row[k] * y[k]
            num = rhs[i] - acc
            if num % row[k]:
                return None
            y[k] = num // row[k]
        elif acc != rhs[i]:
            return None
    particular = tuple(sum(u[i][j] * y[j] for j in range(r)) for i in range(n))
    kernel = [tuple(u[i][j] for i in range(n)) for j in range(r, n)]
    return particular, kernel


def _ldl(q: Sequence[Sequence[Fraction]]):
    """LDL^T of a symmetric matrix assumed positive definite.

    Returns ``(mu, d, bad)`` where ``bad`` is the first index with a
    nonpositive pivot (None when definite).  Rows of ``mu`` are the unit
    lower-triangular factor.
    """
    n = len(q)
    mu = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    d = [Fraction(0)] * n
    for j in range(n):
        s = Fraction(q[j][j]) - sum(mu[j][k] ** 2 * d[k] for k in range(j))
        d[j] = s
        if s <= 0:
            return mu, d, j
        for i in range(j + 1, n):
            t = Fraction(q[i][j]) - sum(mu[i][k] * mu[j][k] * d[k] for k in range(j))
            mu[i][j] = t / s
    return mu, d, None


def _nonnegative_direction(mu, k: int) -> list[Fraction]:
    """Vector v with v^T Q v = d_k <= 0, from a failed LDL at index k."""
    # v = L^{-T} e_k restricted to the leading (k+1) block
    v = [Fraction(0)] * len(mu)
    v[k] = Fraction(1)
    for i in range(k - 1, -1, -1):
        v[i] = -sum(mu[j][i] * v[j] for j in range(i + 1, k + 1))
    return v


def _scale_to_integers(v: Sequence[Fraction]) -> list[int]:
    from math import gcd, lcm

    den = 1
    for x in v:
        den = lcm(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for x in ints:
        g = gcd(g, x)
    return [x // g for x in ints] if g else ints


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def ellipsoid_points(
    p: Sequence[Sequence[Fraction]], center: Sequence[Fraction], radius: Fraction, shell: bool = False
):
    """Integer points t with (t-center)^T P (t-center) <= radius, P positive definite.

    With ``shell`` only points with equality are produced; the last
    coordinate is then solved for instead of scanned.  Fincke-Pohst with
    the rational LDL data put over one common denominator, so the search
    itself runs on integers.  Yields tuples (unordered).
    """
    n = len(p)
    radius = Fraction(radius)
    if radius < 0:
        return
    if n == 0:
        if not shell or radius == 0:
            yield ()
        return
    mu, d, bad = _ldl(p)
    if bad is not None:
        raise ValueError("ellipsoid form is not positive definite")
    center = [Fraction(x) for x in center]
    # c_k = const_k - sum_{j>k} mu[j][k] t_j, all over the denominator dc
    const = [center[k] + sum(mu[j][k] * center[j] for j in range(k + 1, n)) for k in range(n)]
    dc = lcm(*(x.denominator for x in const), *(mu[j][k].denominator for k in range(n) for j in range(k + 1, n)))
    const_i = [int(x * dc) for x in const]
    mu_i = [[int(mu[j][k] * dc) for j in range(n)] for k in range(n)]
    # d_k (t_k - c_k)^2 = w_k X^2 / g with X = dc t_k - C_k integral
    g = lcm(*(x.denominator for x in d), radius.denominator) * dc * dc
    w = [int(x * g / (dc * dc)) for x in d]
    t = [0] * n

    def rec(k: int, rem: int):
        ck = const_i[k] - sum(mu_i[k][j] * t[j] for j in range(k + 1, n))
        if shell and k == 0:
            if rem % w[0]:
                return
            x2 = rem // w[0]
            x = isqrt(x2)
            if x * x != x2:
                return
            for num in sorted({ck - x, ck + x}):
                if num % dc == 0:
                    t[0] = num // dc
                    yield tuple(t)
            return
        s = isqrt(rem // w[k])
        for tk in range(_ceil_div(ck - s, dc), (ck + s) // dc + 1):
            t[k] = tk
            x = dc * tk - ck
            if k == 0:
                yield tuple(t)
            else:
                yield from rec(k - 1, rem - w[k] * x * x)

    yield from rec(n - 1, int(radius * g))


def _check_constraints(lat: Lattice, constraints: Iterable[Constraint]) -> list[Constraint]:
    out = []
    for a, c in constraints:
        if a.lattice != lat:
            raise LatticeMismatchError(f"constraint class {a} is not on {lat.label}")
        out.append((a, int(c)))
    return out


def _functional(lat: Lattice, a: DivisorClass) -> list[int]:
    n = lat.rank
    return [sum(a.coords[i] * lat.gram[i][j] for i in range(n)) for j in range(n)]


def residual_kernel(lat: Lattice, functionals: Sequence[DivisorClass]) -> list[DivisorClass]:
    rows = [_functional(lat, a) for a in functionals]
    return [DivisorClass(lat, v) for v in integer_kernel(rows, lat.rank)]


def certify_finite(lat: Lattice, functionals: Sequence[DivisorClass]) -> list[DivisorClass]:
    """Return the direction basis if the form is negative definite on it; raise otherwise."""
    kernel = residual_kernel(lat, functionals)
    if not kernel:
        return kernel
    p = [[-Fraction(a.pair(b)) for b in kernel] for a in kernel]
    mu, _, bad = _ldl(p)
    if bad is not None:
        w = _scale_to_integers(_nonnegative_direction(mu, bad))
        coords = tuple(sum(w[j] * kernel[j].coords[i] for j in range(len(kernel))) for i in range(lat.rank))
        direction = DivisorClass(lat, coords)
        raise UnboundedRegionError(
            f"unbounded region on {lat.label}: direction {direction} has square "
            f"{direction.square()} >= 0 and satisfies every constraint homogeneously",
            direction,
        )
    return kernel


def _enumerate_slice(lat, square, rows, rhs) -> list[tuple[int, ...]]:
    """Coordinates of classes of the given square on one affine slice."""
    sol = solve_integer_system(rows, rhs, lat.rank)
    if sol is None:
        return []
    c0, kernel = sol
    n = lat.rank
    base = DivisorClass(lat, c0)
    if not kernel:
        return [base.coords] if base.square() == square else []
    kcls = [DivisorClass(lat, v) for v in kernel]
    q = [[Fraction(a.pair(b)) for b in kcls] for a in kcls]
    b = [Fraction(base.pair(k)) for k in kcls]
    const = Fraction(base.square())
    # f(t) = t^T Q t + 2 b.t + const ; Q negative definite; center t* = -Q^{-1} b
    m = len(kcls)
    pmat = [[-x for x in row] for row in q]
    center = _solve_rational(pmat, b)  # P t* = b  <=>  Q t* = -b
    value_at_center = const + sum(b[i] * center[i] for i in range(m))
    radius = value_at_center - square
    # on the shell f(t) = square exactly, so no re-check is needed
    cols = list(zip(*kernel))  # cols[i][j] = kernel[j][i]
    return [
        tuple(c0[i] + sum(tj * kj for tj, kj in zip(t, cols[i])) for i in range(n))
        for t in ellipsoid_points(pmat, center, radius, shell=True)
    ]


def _solve_rational(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> list[Fraction]:
    n = len(a)
    m = [list(map(Fraction, row)) + [Fraction(b[i])] for i, row in enumerate(a)]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col] / m[col][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


def enum_classes(
    lat: Lattice,
    square: int,
    constraints: Sequence[Constraint] = (),
    degree_range: tuple[DivisorClass, int, int] | None = None,
) -> tuple[DivisorClass, ...]:
    """All classes C with C^2 = square, A_i.C = c_i and dmin <= A0.C <= dmax.

    The result is sorted lexicographically by coordinates.  Raises
    :class:`UnboundedRegionError` unless the form is negative definite on
    the common kernel of the linear functionals.
    """
    cons = _check_constraints(lat, constraints)
    functionals = [a for a, _ in cons]
    if degree_range is not None:
        a0, dmin, dmax = degree_range
        if a0.lattice != lat:
            raise LatticeMismatchError(f"degree functional {a0} is not on {lat.label}")
        functionals.append(a0)
    certify_finite(lat, functionals)

    rows = [_functional(lat, a) for a, _ in cons]
    rhs = [c for _, c in cons]
    found: set[tuple[int, ...]] = set()
    if degree_range is None:
        found.update(_enumerate_slice(lat, square, rows, rhs))
    else:
        row0 = _functional(lat, a0)
        for d in range(dmin, dmax + 1):
            found.update(_enumerate_slice(lat, square, rows + [row0], rhs + [d]))
    return tuple(DivisorClass(lat, c) for c in sorted(found))
