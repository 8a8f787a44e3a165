"""Lattices of the non-K3 surfaces: blown-up planes, ruled surfaces, products C x P^1."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .enumeration import enum_classes
from .lattice import DivisorClass, Lattice, LatticeError, pair


class SurfaceError(LatticeError):
    pass


@dataclass(frozen=True)
class DelPezzoLattice:
    """Picard lattice of P^2 blown up in n points in general position.

    General position is a convention of this object, not something it
    verifies; ``nef_on_del_pezzo`` relies on it.
    """

    n: int
    lattice: Lattice = field(init=False)
    K: DivisorClass = field(init=False)

    def __post_init__(self):
        if not 0 <= self.n <= 8:
            raise SurfaceError(f"del Pezzo lattice needs 0 <= n <= 8, got {self.n}")
        names = ("h",) + tuple(f"e{i}" for i in range(1, self.n + 1))
        gram = [[0] * (self.n + 1) for _ in range(self.n + 1)]
        gram[0][0] = 1
        for i in range(1, self.n + 1):
            gram[i][i] = -1
        lat = Lattice.from_rows(names, gram, name=f"dP(n={self.n})")
        object.__setattr__(self, "lattice", lat)
        object.__setattr__(self, "K", lat.vector((-3,) + (1,) * self.n))

    def cls(self, a: int, *b: int) -> DivisorClass:
        """The class a*h - sum b_i e_i."""
        b = tuple(b) + (0,) * (self.n - len(b))
        return self.lattice.vector((a,) + tuple(-x for x in b))


def minus_one_classes(D: DelPezzoLattice) -> tuple[DivisorClass, ...]:
    """Every class l with l^2 = -1 and K.l = -1; finite because K^2 > 0."""
    if D.n > 8:
        raise SurfaceError("n > 8 has infinitely many (-1)-classes")
    return enum_classes(D.lattice, -1, [(D.K, -1)])


@dataclass(frozen=True)
class NefResult:
    nef: bool
    witnesses: tuple[DivisorClass, ...]
    checked: int

    @property
    def verdict(self) -> str:
        return "nef" if self.nef else "not_nef"


def nef_on_del_pezzo(D: DelPezzoLattice, L: DivisorClass) -> NefResult:
    """Nef test against all lines; the lines span the effective cone for 2 <= n <= 8."""
    if not 2 <= D.n <= 8:
        raise SurfaceError(f"line test is only valid for 2 <= n <= 8, got {D.n}")
    lines = minus_one_classes(D)
    bad = tuple(l for l in lines if pair(L, l) < 0)
    return NefResult(not bad, bad, len(lines))


@dataclass(frozen=True)
class RuledSurfaceModel:
    """P(E) over a genus-g curve, deg E = e, with tautological h and fiber f."""

    g: int
    e: int
    restriction_table: Mapping[str, DivisorClass] = field(default_factory=dict)
    lattice: Lattice = field(init=False)
    K: DivisorClass = field(init=False)

    def __post_init__(self):
        lat = Lattice.from_rows(("h", "f"), [[self.e, 1], [1, 0]], name=f"P(E), g={self.g}, deg E={self.e}")
        object.__setattr__(self, "lattice", lat)
        object.__setattr__(self, "K", lat.vector((-2, self.e + 2 * self.g - 2)))
        object.__setattr__(self, "restriction_table", _bind_table(lat, self.restriction_table))

    @property
    def h(self) -> DivisorClass:
        return self.lattice.basis("h")

    @property
    def f(self) -> DivisorClass:
        return self.lattice.basis("f")


def _bind_table(lat: Lattice, table) -> dict:
    out = {}
    for name, c in dict(table).items():
        if not isinstance(c, DivisorClass):
            c = lat.vector(c)
        elif c.lattice != lat:
            raise SurfaceError(f"restriction of {name} is not on {lat.label}")
        out[name] = c
    return out


def restricted_class(R, expression: Mapping[str, int]) -> DivisorClass:
    """Linear combination of tabulated restrictions of ambient divisors.

    ``R`` is a ruled or product model carrying a ``restriction_table``.
    """
    out = R.lattice.zero()
    for name, coef in expression.items():
        if name not in R.restriction_table:
            raise SurfaceError(
                f"no restriction recorded for {name!r}; known: {sorted(R.restriction_table)}"
            )
        out = out + coef * R.restriction_table[name]
    return out


@dataclass(frozen=True)
class ProductSurfaceModel:
    """C x P^1: ``a`` is the class of C x {pt}, ``b`` the class of {pt} x P^1."""

    g: int
    restriction_table: Mapping[str, DivisorClass] = field(default_factory=dict)
    lattice: Lattice = field(init=False)
    K: DivisorClass = field(init=False)

    def __post_init__(self):
        lat = Lattice.from_rows(("a", "b"), [[0, 1], [1, 0]], name=f"C x P1, g(C)={self.g}")
        object.__setattr__(self, "lattice", lat)
        object.__setattr__(self, "K", lat.vector((-2, 2 * self.g - 2)))
        object.__setattr__(self, "restriction_table", _bind_table(lat, self.restriction_table))


def adjunction_genus(surface, B: DivisorClass) -> int:
    """Arithmetic genus 1 + (B^2 + K.B)/2 of a curve in class B.

    ``surface`` is anything with ``K`` (a K3 model, a del Pezzo, ruled or
    product model).
    """
    total = pair(B, B) + pair(surface.K, B)
    if total % 2:
        raise SurfaceError(f"B^2 + K.B = {total} is odd for {B}; the class is inconsistent")
    g = 1 + total // 2
    if g < 0:
        raise SurfaceError(f"{B} would have negative genus {g}")
    return g
