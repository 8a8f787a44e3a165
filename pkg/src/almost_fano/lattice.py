"""Exact arithmetic on small integral lattices.

Everything here works over ``int`` and ``fractions.Fraction``; no floating
point is used anywhere in the package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

Number = Union[int, Fraction]


class LatticeError(ValueError):
    """Raised for malformed lattices or ill-typed class arithmetic."""


class LatticeMismatchError(LatticeError):
    pass


@dataclass(frozen=True)
class Lattice:
    basis_names: tuple[str, ...]
    gram: tuple[tuple[int, ...], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        names = tuple(self.basis_names)
        gram = tuple(tuple(int(x) for x in row) for row in self.gram)
        object.__setattr__(self, "basis_names", names)
        object.__setattr__(self, "gram", gram)
        n = len(names)
        if n < 1:
            raise LatticeError("lattice rank must be at least 1")
        if len(set(names)) != n:
            raise LatticeError(f"duplicate basis names in {names}")
        if len(gram) != n or any(len(row) != n for row in gram):
            raise LatticeError(f"gram matrix must be {n}x{n} to match basis {names}")
        for i in range(n):
            for j in range(i + 1, n):
                if gram[i][j] != gram[j][i]:
                    raise LatticeError(
                        f"gram matrix is not symmetric at ({i},{j}): "
                        f"{gram[i][j]} != {gram[j][i]}"
                    )

    @classmethod
    def from_rows(cls, basis_names: Sequence[str], rows: Sequence[Sequence[int]], name: str = "") -> "Lattice":
        return cls(tuple(basis_names), tuple(tuple(r) for r in rows), name)

    @property
    def rank(self) -> int:
        return len(self.basis_names)

    @property
    def label(self) -> str:
        return self.name or "Lattice(" + ",".join(self.basis_names) + ")"

    def index(self, name: str) -> int:
        try:
            return self.basis_names.index(name)
        except ValueError:
            raise LatticeError(f"{name!r} is not a basis element of {self.label}") from None

    def basis(self, name: str) -> "DivisorClass":
        coords = [0] * self.rank
        coords[self.index(name)] = 1
        return DivisorClass(self, tuple(coords))

    def zero(self) -> "DivisorClass":
        return DivisorClass(self, (0,) * self.rank)

    def vector(self, coords: Iterable[int]) -> "DivisorClass":
        return DivisorClass(self, tuple(coords))

    def bilinear(self, u: Sequence[Number], v: Sequence[Number]) -> Number:
        g = self.gram
        total: Number = 0
        for i, ui in enumerate(u):
            if not ui:
                continue
            row = g[i]
            s = 0
            for j, vj in enumerate(v):
                if vj:
                    s += row[j] * vj
            total += ui * s
        return total

    def __repr__(self):
        return f"Lattice({self.label}, gram={[list(r) for r in self.gram]})"


class _Class:
    """Shared behaviour of integral and rational classes."""

    __slots__ = ()
    lattice: Lattice
    coords: tuple

    def _check(self, other: "_Class"):
        if not isinstance(other, _Class):
            return NotImplemented
        if self.lattice != other.lattice:
            raise LatticeMismatchError(
                f"classes live on different lattices: {self.lattice.label} vs {other.lattice.label}"
            )
        return None

    def pair(self, other: "_Class") -> Number:
        return pair(self, other)

    def square(self) -> Number:
        return pair(self, self)

    def is_zero(self) -> bool:
        return not any(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def __str__(self):
        return format_class(self)


@dataclass(frozen=True, repr=False)
class DivisorClass(_Class):
    lattice: Lattice
    coords: tuple[int, ...]

    def __post_init__(self):
        coords = tuple(self.coords)
        if len(coords) != self.lattice.rank:
            raise LatticeError(
                f"class has {len(coords)} coordinates but {self.lattice.label} has rank {self.lattice.rank}"
            )
        for c in coords:
            if isinstance(c, bool) or int(c) != c:
                raise LatticeError(f"integral class needs integer coordinates, got {coords}")
        object.__setattr__(self, "coords", tuple(int(c) for c in coords))

    def __add__(self, other):
        if isinstance(other, RationalClass):
            return self.to_rational() + other
        self._check(other)
        return DivisorClass(self.lattice, tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return DivisorClass(self.lattice, tuple(-a for a in self.coords))

    def __mul__(self, k):
        if isinstance(k, Fraction):
            return self.to_rational() * k
        if not isinstance(k, int):
            return NotImplemented
        return DivisorClass(self.lattice, tuple(k * a for a in self.coords))

    __rmul__ = __mul__

    def to_rational(self) -> "RationalClass":
        return RationalClass(self.lattice, tuple(Fraction(a) for a in self.coords))

    def __repr__(self):
        return f"DivisorClass({format_class(self)})"


@dataclass(frozen=True, repr=False)
class RationalClass(_Class):
    lattice: Lattice
    coords: tuple[Fraction, ...]

    def __post_init__(self):
        coords = tuple(Fraction(c) for c in self.coords)
        if len(coords) != self.lattice.rank:
            raise LatticeError(
                f"class has {len(coords)} coordinates but {self.lattice.label} has rank {self.lattice.rank}"
            )
        object.__setattr__(self, "coords", coords)

    def __add__(self, other):
        if isinstance(other, DivisorClass):
            other = other.to_rational()
        self._check(other)
        return RationalClass(self.lattice, tuple(a + b for a, b in zip(self.coords, other.coords)))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return RationalClass(self.lattice, tuple(-a for a in self.coords))

    def __mul__(self, k):
        if not isinstance(k, (int, Fraction)):
            return NotImplemented
        return RationalClass(self.lattice, tuple(k * a for a in self.coords))

    __rmul__ = __mul__

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.coords)

    def to_integral(self) -> DivisorClass:
        if not self.is_integral():
            raise LatticeError(f"{format_class(self)} is not integral")
        return DivisorClass(self.lattice, tuple(int(c) for c in self.coords))

    def __repr__(self):
        return f"RationalClass({format_class(self)})"


def pair(a: _Class, b: _Class) -> Number:
    """Intersection number a.b; an ``int`` when both classes are integral."""
    if a.lattice != b.lattice:
        raise LatticeMismatchError(
            f"cannot pair classes on different lattices: {a.lattice.label} vs {b.lattice.label}"
        )
    value = a.lattice.bilinear(a.coords, b.coords)
    if isinstance(value, Fraction) and value.denominator == 1:
        return int(value) if isinstance(a, DivisorClass) and isinstance(b, DivisorClass) else value
    return value


def format_class(c: _Class) -> str:
    """Render a class as a signed combination of basis names, e.g. ``3H-2Gamma-B``."""
    parts = []
    for coef, name in zip(c.coords, c.lattice.basis_names):
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        if mag == 1:
            body = name
        elif isinstance(mag, Fraction) and mag.denominator != 1:
            body = f"({mag}){name}"
        else:
            body = f"{mag}{name}"
        parts.append((sign, body))
    if not parts:
        return "0"
    first_sign, first = parts[0]
    out = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        out += sign + body
    return out


# --- exact matrix helpers -------------------------------------------------

def determinant(m: Sequence[Sequence[int]]) -> int:
    """Bareiss fraction-free determinant of an integer matrix."""
    n = len(m)
    if n == 0:
        return 1
    a = [list(map(int, row)) for row in m]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def leading_minors(m: Sequence[Sequence[int]]) -> list[int]:
    return [determinant([row[:k] for row in m[:k]]) for k in range(1, len(m) + 1)]


def congruence_diagonal(m: Sequence[Sequence[Number]]) -> list[Fraction]:
    """Diagonalise a symmetric matrix by rational congruence.

    Returns the diagonal entries; by Sylvester's law their sign pattern is
    the signature.  Zero pivots are repaired with e_i -> e_i + e_j moves.
    """
    a = [[Fraction(x) for x in row] for row in m]
    n = len(a)
    diag: list[Fraction] = []
    k = 0
    while k < n:
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if a[r][r] != 0), None)
            if swap is not None:
                a[k], a[swap] = a[swap], a[k]
                for row in a:
                    row[k], row[swap] = row[swap], row[k]
            else:
                j = next((r for r in range(k + 1, n) if a[k][r] != 0), None)
                if j is None:
                    # row k is zero in the remaining block
                    diag.append(Fraction(0))
                    k += 1
                    continue
                # e_k <- e_k + e_j makes the pivot 2 a_kj
                for c in range(n):
                    a[k][c] += a[j][c]
                for r in range(n):
                    a[r][k] += a[r][j]
        p = a[k][k]
        for i in range(k + 1, n):
            if a[i][k] != 0:
                f = a[i][k] / p
                for c in range(k, n):
                    a[i][c] -= f * a[k][c]
                for r in range(k, n):
                    a[r][i] -= f * a[r][k]
        diag.append(p)
        k += 1
    return diag


@dataclass(frozen=True)
class Classification:
    is_even: bool
    signature: tuple[int, int, int]

    def as_dict(self) -> dict:
        return {"even": self.is_even, "signature": list(self.signature)}


def classify(lat: Lattice) -> Classification:
    """Parity and signature (positives, negatives, zeros) of the Gram matrix."""
    diag = congruence_diagonal(lat.gram)
    pos = sum(1 for d in diag if d > 0)
    neg = sum(1 for d in diag if d < 0)
    return Classification(
        is_even=all(lat.gram[i][i] % 2 == 0 for i in range(lat.rank)),
        signature=(pos, neg, lat.rank - pos - neg),
    )


def restricted_gram(lat: Lattice, classes: Sequence[_Class]) -> list[list[Number]]:
    for c in classes:
        if c.lattice != lat:
            raise LatticeMismatchError(f"{format_class(c)} does not live on {lat.label}")
    return [[pair(a, b) for b in classes] for a in classes]


def is_negative_definite_matrix(m: Sequence[Sequence[Number]]) -> bool:
    if not m:
        return True
    diag = congruence_diagonal(m)
    return all(d < 0 for d in diag)


def is_negative_definite(lat: Lattice, sublattice_basis: Sequence[_Class] | None = None) -> bool:
    """Whether the form restricted to the span of ``sublattice_basis`` is negative definite.

    A linearly dependent basis spans a degenerate restriction and yields
    False.
    """
    classes = list(sublattice_basis) if sublattice_basis is not None else [
        lat.basis(n) for n in lat.basis_names
    ]
    g = restricted_gram(lat, classes)
    if any(isinstance(x, Fraction) and x.denominator != 1 for row in g for x in row):
        return is_negative_definite_matrix(g)
    # Sylvester: (-1)^k * minor_k > 0 for every leading minor
    return all((-1) ** (k + 1) * d > 0 for k, d in enumerate(leading_minors(g)))


def orthogonal_complement(lat: Lattice, classes: Sequence[DivisorClass]) -> list[DivisorClass]:
    """A Z-basis of the classes orthogonal to every element of ``classes``."""
    from .enumeration import integer_kernel

    rows = [[sum(c.coords[i] * lat.gram[i][j] for i in range(lat.rank)) for j in range(lat.rank)] for c in classes]
    return [DivisorClass(lat, tuple(v)) for v in integer_kernel(rows, lat.rank)]
