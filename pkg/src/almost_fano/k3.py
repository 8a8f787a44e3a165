"""Line-bundle certificates on a K3 surface presented by its Picard lattice.

A :class:`PolarizedK3Model` is an even lattice of signature (1, rho-1) with
a designated nef and big class ``H``.  Every check below reduces to finite
enumerations from :mod:`almost_fano.enumeration`.

Two conventions are built in and echoed in reports:

* Riemann-Roch equality: ``h0(C) = 2 + C^2/2`` for effective candidates.
* (-2)-classes of H-degree 0 are handled through the "D or -D is
  effective" rule, only inside the nefness-type checks.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

from .enumeration import enum_classes
from .lattice import DivisorClass, Lattice, LatticeError, classify, pair

RR_CONVENTION = "RR-equality convention: h0(C) = 2 + C^2/2 for effective candidates"


class K3ModelError(LatticeError):
    pass


@dataclass(frozen=True)
class PolarizedK3Model:
    lattice: Lattice
    H: DivisorClass
    named_classes: Mapping[str, DivisorClass] = field(default_factory=dict)
    irreducible_marks: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "named_classes", dict(self.named_classes))
        object.__setattr__(self, "irreducible_marks", frozenset(self.irreducible_marks))
        if self.H.lattice != self.lattice:
            raise K3ModelError("polarization does not live on the model lattice")
        if self.H.square() <= 0:
            raise K3ModelError(f"polarization must have positive square, got {self.H.square()}")
        info = classify(self.lattice)
        if not info.is_even:
            raise K3ModelError(f"{self.lattice.label} is not even")
        if info.signature != (1, self.lattice.rank - 1, 0):
            raise K3ModelError(
                f"{self.lattice.label} has signature {info.signature}, expected (1, {self.lattice.rank - 1}, 0)"
            )
        for name, cls in self.named_classes.items():
            if cls.lattice != self.lattice:
                raise K3ModelError(f"named class {name} is not on the model lattice")
        missing = self.irreducible_marks - set(self.named_classes)
        if missing:
            raise K3ModelError(f"irreducible marks name unknown classes: {sorted(missing)}")

    @property
    def K(self) -> DivisorClass:
        """The canonical class, which is trivial."""
        return self.lattice.zero()

    def degree(self, c: DivisorClass) -> int:
        return pair(self.H, c)


@dataclass(frozen=True)
class Witness:
    clause: str
    cls: DivisorClass


@dataclass(frozen=True)
class CheckResult:
    """Verdict plus the evidence that produced it."""

    verdict: str
    witnesses: tuple[Witness, ...] = ()
    details: Mapping = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict in ("pass", "nef", "movable")

    def classes(self, clause: str | None = None) -> tuple[DivisorClass, ...]:
        return tuple(w.cls for w in self.witnesses if clause is None or w.clause == clause)


def h0_rr(model: PolarizedK3Model, c: DivisorClass) -> int:
    if c.is_zero():
        return 1
    sq = c.square()
    if sq % 2:
        raise K3ModelError(f"{c} has odd square {sq}")
    if sq < -2:
        raise K3ModelError(f"{c} has square {sq} < -2; Riemann-Roch gives no section count")
    if model.degree(c) <= 0:
        raise K3ModelError(f"{c} has H-degree {model.degree(c)} <= 0 and is not an effective candidate")
    return 2 + sq // 2


def effective_candidate(model: PolarizedK3Model, c: DivisorClass) -> bool:
    return c.is_zero() or (c.square() >= -2 and model.degree(c) > 0)


def minus_two_up_to(model: PolarizedK3Model, dmax: int, dmin: int = 1) -> tuple[DivisorClass, ...]:
    """(-2)-classes of H-degree in [dmin, dmax]; with dmin >= 1 these are all effective."""
    if dmax < dmin:
        return ()
    return enum_classes(model.lattice, -2, (), (model.H, dmin, dmax))


def bpf_check(model: PolarizedK3Model, L: DivisorClass) -> CheckResult:
    """Base-point-freeness of a nef class.

    For L^2 > 0 this searches for D with D^2 = 0, L.D = 1.  For L^2 = 0 that
    search is infinite, and L is certified through the equivalent
    fixed-part-free criterion instead.
    """
    sq = L.square()
    if sq < 0:
        raise K3ModelError(f"{L} has negative square; base-point-freeness check needs L^2 >= 0")
    if sq == 0:
        mv = movable_check(model, L)
        return CheckResult(
            "pass" if mv.passed else "fail",
            mv.witnesses,
            {"method": "fixed-part-free", "feasible_fixed_parts": mv.details["feasible_fixed_parts"]},
        )
    found = enum_classes(model.lattice, 0, [(L, 1)])
    witnesses = tuple(Witness("D^2=0, L.D=1", d) for d in found)
    return CheckResult("fail" if witnesses else "pass", witnesses, {"method": "D^2=0, L.D=1 search"})


def very_ample_check(model: PolarizedK3Model, L: DivisorClass) -> CheckResult:
    sq = L.square()
    if sq < 4:
        raise K3ModelError(f"very-ampleness criterion needs L^2 >= 4, got {sq}")
    lat = model.lattice
    witnesses = [Witness("D^2=-2, L.D=0", d) for d in enum_classes(lat, -2, [(L, 0)])]
    for deg in (1, 2):
        witnesses += [Witness(f"D^2=0, L.D={deg}", d) for d in enum_classes(lat, 0, [(L, deg)])]
    if all(c % 2 == 0 for c in L.coords):
        half = DivisorClass(lat, tuple(c // 2 for c in L.coords))
        if half.square() == 2:
            witnesses.append(Witness("D^2=2, L=2D", half))
    return CheckResult("fail" if witnesses else "pass", tuple(witnesses))


def quadric_embedding_check(model: PolarizedK3Model) -> CheckResult:
    """Smoothness of the quadric containing the genus-4 model: no C^2=0, H.C=3."""
    if model.H.square() != 6:
        raise K3ModelError(f"quadric embedding check needs H^2 = 6, got {model.H.square()}")
    found = enum_classes(model.lattice, 0, [(model.H, 3)])
    return CheckResult(
        "fail" if found else "pass", tuple(Witness("C^2=0, H.C=3", c) for c in found)
    )


def nef_check(model: PolarizedK3Model, L: DivisorClass) -> CheckResult:
    """Nefness of an effective class against every (-2)-curve that could matter.

    Any irreducible curve meeting L negatively lies in Fix|L|, so it is a
    (-2)-curve of H-degree at most H.L.
    """
    lat = model.lattice
    degree = model.degree(L)
    positive = minus_two_up_to(model, degree)
    flat = enum_classes(lat, -2, [(model.H, 0)])
    witnesses = [Witness("D^2=-2, 0<H.D<=H.L, L.D<0", d) for d in positive if pair(L, d) < 0]
    # one of +-D is effective; a nonzero pairing means one of them is negative
    witnesses += [Witness("D^2=-2, H.D=0, L.D!=0", d) for d in flat if pair(L, d) < 0]
    pairings = {str(d): pair(L, d) for d in positive}
    return CheckResult(
        "not_nef" if witnesses else "nef",
        tuple(witnesses),
        {"checked": len(positive) + len(flat), "pairings": pairings},
    )


def fixed_part_square(L: DivisorClass, curves: tuple[DivisorClass, ...]) -> dict:
    """Coefficients of (L - sum a_i C_i)^2 as a polynomial in the a_i.

    Keys: ``"const"``, ``("lin", i)``, ``("quad", i, j)`` with i <= j.
    """
    poly: dict = {"const": L.square()}
    for i, c in enumerate(curves):
        poly[("lin", i)] = -2 * pair(L, c)
    for i, j in itertools.combinations_with_replacement(range(len(curves)), 2):
        v = pair(curves[i], curves[j])
        poly[("quad", i, j)] = v if i == j else 2 * v
    return poly


def movable_check(model: PolarizedK3Model, L: DivisorClass) -> CheckResult:
    """Search every possible fixed part sum a_i C_i of |L|.

    A vector ``a`` survives when M = L - sum a_i C_i has M^2 >= 0, H.M > 0,
    M.L >= 0 and M.C_j >= 0 for every candidate curve.  L has no fixed part
    when only a = 0 survives.
    """
    degree = model.degree(L)
    curves = minus_two_up_to(model, degree - 1)
    degs = [model.degree(c) for c in curves]
    budget = degree - 1
    feasible = []

    def vectors(i: int, left: int):
        if i == len(curves):
            yield ()
            return
        for a in range(left // degs[i] + 1):
            for rest in vectors(i + 1, left - a * degs[i]):
                yield (a,) + rest

    examined = 0
    for a in vectors(0, budget):
        examined += 1
        m = L
        for ai, c in zip(a, curves):
            if ai:
                m = m - ai * c
        if (
            m.square() >= 0
            and model.degree(m) > 0
            and pair(m, L) >= 0
            and all(pair(m, c) >= 0 for c in curves)
        ):
            feasible.append(a)
    feasible = sorted(feasible)
    zero = tuple(0 for _ in curves)
    movable = feasible == [zero]
    witnesses = tuple(
        Witness("feasible nonzero fixed part", L - _combo(model, a, curves))
        for a in feasible
        if a != zero
    )
    return CheckResult(
        "movable" if movable else "not_certified",
        witnesses,
        {
            "curves": curves,
            "feasible_fixed_parts": [list(a) for a in feasible],
            "examined": examined,
            "square_polynomial": fixed_part_square(L, curves),
        },
    )


def _combo(model, a, curves) -> DivisorClass:
    out = model.lattice.zero()
    for ai, c in zip(a, curves):
        out = out + ai * c
    return out


def bn_general_check(model: PolarizedK3Model) -> CheckResult:
    """Brill-Noether generality under the Riemann-Roch convention.

    Candidate splittings H = L + N have both parts effective candidates and
    nonnegative on every marked irreducible class of nonnegative square.
    """
    H = model.H
    h2 = H.square()
    marked = [model.named_classes[n] for n in sorted(model.irreducible_marks)]
    marked = [j for j in marked if j.square() >= 0]
    candidates = []
    for d in range(1, h2):
        # Hodge index: L^2 * H^2 <= (H.L)^2
        smax = (d * d) // h2
        for s in range(-2, smax + 1, 2):
            for L in enum_classes(model.lattice, s, (), (H, d, d)):
                N = H - L
                if L.is_zero() or N.is_zero():
                    continue
                if not (effective_candidate(model, L) and effective_candidate(model, N)):
                    continue
                if any(pair(L, j) < 0 or pair(N, j) < 0 for j in marked):
                    continue
                candidates.append(L)
    candidates.sort(key=lambda c: c.coords)
    h0h = h0_rr(model, H)
    failures = []
    products = {}
    for L in candidates:
        prod = h0_rr(model, L) * h0_rr(model, H - L)
        products[str(L)] = prod
        if prod >= h0h:
            failures.append(Witness("h0(L)h0(N) >= h0(H)", L))
    return CheckResult(
        "fail" if failures else "pass",
        tuple(failures),
        {"candidates": tuple(candidates), "h0_H": h0h, "products": products},
    )


def relative_nef_check(model: PolarizedK3Model, Lrestr: DivisorClass, Ffib: DivisorClass) -> CheckResult:
    """Certificate that no curve negative on Lrestr lies in a fiber.

    Every (-2)-class of H-degree in [0, H.Lrestr + |Lrestr^2| + 2] meeting
    Lrestr negatively must meet the fiber class positively.  Degree-0
    classes are included with the +-D effectivity rule.  The containment of
    such curves in the K3 member is a hypothesis, not checked here.
    """
    bound = model.degree(Lrestr) + abs(Lrestr.square()) + 2
    lat = model.lattice
    pool = list(minus_two_up_to(model, bound)) + list(enum_classes(lat, -2, [(model.H, 0)]))
    negative = [d for d in pool if pair(Lrestr, d) < 0]
    fiber_degrees = {str(d): pair(Ffib, d) for d in negative}
    ok = all(pair(Ffib, d) > 0 for d in negative)
    if Lrestr.square() == -2 and model.degree(Lrestr) > 0:
        ok = ok and h0_rr(model, Lrestr) == 1
    return CheckResult(
        "pass" if ok else "inconclusive",
        tuple(Witness("D^2=-2, Lrestr.D<0", d) for d in negative),
        {
            "degree_bound": bound,
            "fiber_degrees": fiber_degrees,
            "hypothesis": "negative curves of the restricted class lie on the K3 member",
        },
    )
