"""Threefold numerics: curve blowups, the degree 5/6 two-ray game, Hodge bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, isqrt
from typing import Iterable, Sequence, Union

from .lattice import DivisorClass, Lattice, RationalClass, pair
from .surfaces import DelPezzoLattice


class PipelineError(ValueError):
    pass


# --- blowups --------------------------------------------------------------

@dataclass(frozen=True)
class BlowupInvariants:
    """Intersection numbers on Bl_B V with exceptional divisor E."""

    kx3: int  # (-K)^3
    k2e: int  # (-K)^2.E
    ke2: int  # (-K).E^2
    e3: int  # E^3

    def as_dict(self) -> dict:
        return {"kx3": self.kx3, "k2e": self.k2e, "ke2": self.ke2, "e3": self.e3}


def blowup_curve_invariants(kv3: int, kv_dot_b: int, g: int) -> BlowupInvariants:
    return BlowupInvariants(
        kx3=kv3 - 2 * kv_dot_b + 2 * g - 2,
        k2e=kv_dot_b + 2 - 2 * g,
        ke2=2 * g - 2,
        e3=-kv_dot_b - 2 * g + 2,
    )


# --- the fibre surfaces of the game ----------------------------------------

@dataclass(frozen=True)
class FiberModel:
    """General fibre F of Z = Bl_B W over P^1 and the restrictions -K_F, E|_F."""

    d: int
    lattice: Lattice
    anticanonical: DivisorClass
    exceptional: DivisorClass
    max_m: int

    @property
    def k2(self) -> int:
        return pair(self.anticanonical, self.anticanonical)

    @property
    def ke(self) -> int:
        return pair(self.anticanonical, self.exceptional)

    @property
    def e2(self) -> int:
        return pair(self.exceptional, self.exceptional)

    def restriction(self, x, y) -> RationalClass:
        """x(-K_F) + y E|_F as a rational class."""
        return Fraction(x) * self.anticanonical + Fraction(y) * self.exceptional


def fiber_model(d: int) -> FiberModel:
    if d == 6:
        # quadric P1xP1 blown up in the 3 points of the trisection
        names = ("f1", "f2", "e1", "e2", "e3")
        gram = [[0, 1, 0, 0, 0], [1, 0, 0, 0, 0], [0, 0, -1, 0, 0], [0, 0, 0, -1, 0], [0, 0, 0, 0, -1]]
        lat = Lattice.from_rows(names, gram, name="P1xP1 blown up in 3 points")
        antik = lat.vector((2, 2, -1, -1, -1))
        exc = lat.vector((0, 0, 1, 1, 1))
    elif d == 5:
        # P^2 blown up in the 5 points of the quinque-section
        dp = DelPezzoLattice(5)
        lat = dp.lattice
        antik = -dp.K
        exc = lat.vector((0, 1, 1, 1, 1, 1))
    else:
        raise PipelineError(f"fibration degree must be 5 or 6, got {d}")
    k2 = pair(antik, antik)
    return FiberModel(d, lat, antik, exc, max_m=9 - k2)


# --- game inputs and closed forms -----------------------------------------

@dataclass(frozen=True)
class PipelineInput:
    kw3: int
    kw_dot_b: int
    g_b: int
    d: int

    def __post_init__(self):
        if self.d not in (5, 6):
            raise PipelineError(f"fibration degree must be 5 or 6, got {self.d}")
        if self.d == 5 and self.kw3 != 54:
            raise PipelineError(f"a P^2-bundle over P^1 has (-K_W)^3 = 54, got {self.kw3}")
        if self.g_b < 0:
            raise PipelineError(f"genus must be nonnegative, got {self.g_b}")


@dataclass(frozen=True)
class GameResult:
    kx3: Fraction
    kx_dot_c: Fraction
    z: Fraction

    def as_dict(self) -> dict:
        return {"kx3": _num(self.kx3), "kx_dot_c": _num(self.kx_dot_c), "z": _num(self.z)}


def _num(q: Fraction):
    q = Fraction(q)
    return int(q) if q.denominator == 1 else str(q)


def dpd_transform(inp: PipelineInput) -> GameResult:
    w, b, g = inp.kw3, inp.kw_dot_b, inp.g_b
    if inp.d == 6:
        return GameResult(
            Fraction(3 * w - 16 * g - 32, 4),
            Fraction(8 * b - 24 * g - w - 32, 8),
            Fraction(4 * b - 8 * g - w, 8),
        )
    return GameResult(
        Fraction(22 - 2 * g),
        Fraction(b - 2 * g - 16),
        Fraction(2, 3) * b - g - 12,
    )


def dpd_transform_general_d5(kw3: int, kw_dot_b: int, g_b: int) -> GameResult:
    """Degree-5 formulas before substituting (-K_W)^3 = 54."""
    return GameResult(
        Fraction(5 * kw3 - 18 * g_b - 72, 9),
        Fraction(9 * kw_dot_b - 18 * g_b - 2 * kw3 - 36, 9),
        Fraction(6 * kw_dot_b - 9 * g_b - 2 * kw3, 9),
    )


def game_coefficients(d: int) -> tuple[Fraction, Fraction]:
    """(x, y) with D|_F = x(-K_F) + y E|_F for the surviving game solution."""
    sols = [t for t in dpd_feasible_triples(d) if t[0] == 1]
    (_, x, y), = sols
    return x, y


def game_linear_system(inp: PipelineInput) -> tuple[list[list[Fraction]], list[Fraction]]:
    """Three linear equations in ((-K_X)^3, -K_X.C, z), from intersection numbers.

    Both sides of the flop have the same (-K)^3, (-K)^2 D and (-K) D^2; the
    X side comes from blowing up the section C (genus 0) and the Z side
    expands D = x(-K_Z) + yE + zF.
    """
    fib = fiber_model(inp.d)
    x, y = game_coefficients(inp.d)
    w = blowup_curve_invariants(inp.kw3, inp.kw_dot_b, inp.g_b)
    a = Fraction(w.kx3)  # (-K_Z)^3
    # Z side, with (-K)^2 F = K_F^2, (-K) E F = -K_F.E_F, (-K) F^2 = 0
    k2d_const = x * a + y * w.k2e
    k2d_z = Fraction(fib.k2)
    kd2_const = x * x * a + 2 * x * y * w.k2e + y * y * w.ke2
    kd2_z = 2 * x * fib.k2 + 2 * y * fib.ke
    # X side, unknowns u = (-K_X)^3, v = -K_X.C; C is a section, so genus 0:
    #   (-K_Y)^3 = u - 2v - 2,  (-K_Y)^2 D = v + 2,  (-K_Y) D^2 = -2
    rows = [
        [Fraction(1), Fraction(-2), Fraction(0)],
        [Fraction(0), Fraction(1), -k2d_z],
        [Fraction(0), Fraction(0), -kd2_z],
    ]
    rhs = [a + 2, k2d_const - 2, kd2_const + 2]
    return rows, rhs


def solve_linear(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> list[Fraction]:
    n = len(rows)
    m = [list(map(Fraction, r)) + [Fraction(v)] for r, v in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise PipelineError("singular linear system")
        m[col], m[piv] = m[piv], m[col]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col] / m[col][col]
                m[r] = [p - f * q for p, q in zip(m[r], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


def dpd_solve_system(inp: PipelineInput) -> GameResult:
    u, v, z = solve_linear(*game_linear_system(inp))
    return GameResult(u, v, z)


# --- solving the fibre equations ------------------------------------------

def is_square(n: int) -> bool:
    return n >= 0 and isqrt(n) ** 2 == n


def rational_sqrt(q: Fraction) -> Fraction | None:
    q = Fraction(q)
    if q < 0:
        return None
    if is_square(q.numerator) and is_square(q.denominator):
        return Fraction(isqrt(q.numerator), isqrt(q.denominator))
    return None


@dataclass(frozen=True)
class FiberQuadratic:
    """a x^2 + b x + c = 0 after eliminating y from the linear fibre equation."""

    a: Fraction
    b: Fraction
    c: Fraction

    @property
    def center(self) -> Fraction:
        return -self.b / (2 * self.a)

    @property
    def half_gap_squared(self) -> Fraction:
        """((x1 - x2)/2)^2, so x = center +- sqrt of this."""
        return (self.b * self.b - 4 * self.a * self.c) / (4 * self.a * self.a)


def fiber_quadratic(fib: FiberModel, lin: Fraction, quad: Fraction) -> FiberQuadratic:
    """Eliminate y from  k2 x + ke y = lin  and  (x(-K)+yE)^2 = quad."""
    k2, ke, e2 = Fraction(fib.k2), Fraction(fib.ke), Fraction(fib.e2)
    lin, quad = Fraction(lin), Fraction(quad)
    # y = (lin - k2 x)/ke
    p, q = -k2 / ke, lin / ke  # y = p x + q
    a = k2 + 2 * ke * p + e2 * p * p
    b = 2 * ke * q + 2 * e2 * p * q
    c = e2 * q * q - quad
    return FiberQuadratic(a, b, c)


def _fiber_y(fib: FiberModel, lin: Fraction, x: Fraction) -> Fraction:
    return (Fraction(lin) - fib.k2 * x) / fib.ke


@dataclass(frozen=True)
class TripleCandidate:
    m: int
    discriminant: Fraction
    rational: bool
    solutions: tuple[tuple[Fraction, Fraction, bool], ...]  # (x, y, E.D|_F integral)


def dpd_candidates(d: int) -> tuple[TripleCandidate, ...]:
    fib = fiber_model(d)
    out = []
    for m in range(0, fib.max_m + 1):
        fq = fiber_quadratic(fib, m, -m)
        root = rational_sqrt(fq.half_gap_squared)
        sols = []
        if root is not None:
            for x in sorted({fq.center - root, fq.center + root}):
                y = _fiber_y(fib, m, x)
                ed = pair(fib.exceptional.to_rational(), fib.restriction(x, y))
                sols.append((x, y, Fraction(ed).denominator == 1))
        out.append(TripleCandidate(m, fq.half_gap_squared, root is not None, tuple(sols)))
    return tuple(out)


def dpd_feasible_triples(d: int) -> frozenset[tuple[int, Fraction, Fraction]]:
    """All (m, x, y) with rational x, y and E.D|_F integral."""
    return frozenset(
        (c.m, x, y) for c in dpd_candidates(d) for x, y, integral in c.solutions if integral
    )


def polynomial_radicand(coeffs: Sequence[Fraction], linear: Sequence[Fraction] = ()) -> tuple[int, list[int]]:
    """Smallest den with den^2 * coeffs and den * linear integral, and the scaled coefficients."""
    den = 1
    while True:
        if all((Fraction(c) * den * den).denominator == 1 for c in coeffs) and all(
            (Fraction(c) * den).denominator == 1 for c in linear
        ):
            return den, [int(Fraction(c) * den * den) for c in coeffs]
        den += 1


def game_discriminant_polynomial(d: int) -> tuple[int, list[int]]:
    """x = (P(m) +- sqrt(R(m)))/den; returns (den, coefficients of R by descending degree)."""
    fib = fiber_model(d)
    f0, f1, f2 = (fiber_quadratic(fib, m, -m) for m in (0, 1, 2))
    h0, h1, h2 = f0.half_gap_squared, f1.half_gap_squared, f2.half_gap_squared
    # half_gap_squared is quadratic in m: interpolate
    a2 = (h2 - 2 * h1 + h0) / 2
    a1 = h1 - h0 - a2
    c1 = f1.center - f0.center
    return polynomial_radicand([a2, a1, h0], [c1, f0.center])


@dataclass(frozen=True)
class SquareCertificate:
    """Non-squareness witness: floor(sqrt(n))^2 < n < (floor(sqrt(n)) + 1)^2."""

    n: int
    floor_sqrt: int
    is_square: bool

    def as_dict(self) -> dict:
        return {"n": self.n, "floor_sqrt": self.floor_sqrt, "is_square": self.is_square}


def certify_square(n: int) -> SquareCertificate:
    if n < 0:
        return SquareCertificate(n, -1, False)
    s = isqrt(n)
    return SquareCertificate(n, s, s * s == n)


@dataclass(frozen=True)
class EliminationStep:
    name: str
    x_squared_or_gap: Fraction
    radicands: dict
    eliminated: bool

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": str(self.x_squared_or_gap),
            "radicands": {k: v.as_dict() for k, v in self.radicands.items()},
            "eliminated": self.eliminated,
        }


@dataclass(frozen=True)
class EliminationRecord:
    d: int
    steps: tuple[EliminationStep, ...]

    @property
    def all_eliminated(self) -> bool:
        return all(s.eliminated for s in self.steps)

    def radicands(self) -> set[int]:
        return {c.n for s in self.steps for c in s.radicands.values()}

    def as_dict(self) -> dict:
        return {"d": self.d, "all_eliminated": self.all_eliminated, "steps": [s.as_dict() for s in self.steps]}


def dpd_eliminations(d: int) -> EliminationRecord:
    """Replayable irrationality certificates ruling out the non-blowup outcomes.

    * divisorial: D|_F a union of n in {1, 2} disjoint (-2)-curves, so
      (-K_F).D|_F = 0 and D|_F^2 = -2n;
    * dimension 2: (-K_F).D|_F = 2 and D|_F^2 = 0.
    """
    fib = fiber_model(d)
    steps = []
    # x^2 is n times its n=1 value; both forms write x = sqrt(R n)/den with den fixed by n=1
    fq1 = fiber_quadratic(fib, 0, -2)
    x2_one = -fq1.c / fq1.a  # b = 0 here
    _, (rad_one,) = polynomial_radicand([x2_one])
    cleared_one = x2_one.numerator * x2_one.denominator
    for n in (1, 2):
        fq = fiber_quadratic(fib, 0, -2 * n)
        x2 = -fq.c / fq.a
        if x2 != n * x2_one:
            raise PipelineError("divisorial x^2 is not linear in n")
        forms = {
            "reduced": certify_square(n * rad_one),
            "cleared": certify_square(n * cleared_one),
        }
        steps.append(EliminationStep(f"divisorial n={n}", x2, forms, not any(c.is_square for c in forms.values())))
    fq = fiber_quadratic(fib, 2, 0)
    gap = fq.half_gap_squared
    den, (rad,) = polynomial_radicand([gap], [fq.center])
    forms = {"reduced": certify_square(rad)}
    steps.append(EliminationStep("dimension 2", gap, forms, not forms["reduced"].is_square))
    return EliminationRecord(d, tuple(steps))


# --- Hodge numbers --------------------------------------------------------

H12_BASE = {
    "P3": 0,
    "Q3": 0,
    "P2xP1": 0,
    "B(4)": 2,
    "B(5)": 0,
    "V(9)": 3,
    "V(10)": 2,
}

Step = Union[tuple, dict, str]


@dataclass(frozen=True)
class HodgeRecord:
    value: int
    provenance: tuple[str, ...] = field(default=())

    def as_dict(self) -> dict:
        return {"value": self.value, "provenance": list(self.provenance)}


def _parse_step(step: Step) -> tuple[str, int]:
    if isinstance(step, str):
        return step, 0
    if isinstance(step, dict):
        kind = step.get("kind") or step.get("op")
        return kind, int(step.get("g", 0))
    kind, *rest = step
    return kind, int(rest[0]) if rest else 0


def h12_chain(base: Union[str, int], steps: Iterable[Step]) -> HodgeRecord:
    """h^{1,2} along blowups of curves (+g), flops (0) and blowdowns (-g)."""
    if isinstance(base, str):
        if base not in H12_BASE:
            raise PipelineError(f"unknown base {base!r}; known: {sorted(H12_BASE)} or pass an integer")
        value = H12_BASE[base]
        prov = [f"base {base}: {value}"]
    else:
        value = int(base)
        if value < 0:
            raise PipelineError("h^{1,2} cannot be negative")
        prov = [f"base: {value}"]
    for step in steps:
        kind, g = _parse_step(step)
        if kind == "blowup":
            value += g
            prov.append(f"blowup g={g}: +{g}")
        elif kind == "flop":
            prov.append("flop: +0")
        elif kind == "blowdown":
            value -= g
            prov.append(f"blowdown g={g}: -{g}")
        else:
            raise PipelineError(f"unknown step kind {kind!r}")
        if value < 0:
            raise PipelineError(f"h^{{1,2}} went negative after {kind}")
    return HodgeRecord(value, tuple(prov))


def h0_bidegree(a: int, b: int, m: int, n: int) -> int:
    """Sections of O(m, n) on P^a x P^b."""
    if a < 1 or b < 1:
        raise PipelineError("projective space dimensions must be >= 1")
    if m < 0 or n < 0:
        raise PipelineError("bidegree must be nonnegative")
    return comb(m + a, a) * comb(n + b, b)


@dataclass(frozen=True)
class QuadricPencilRecord:
    delta: int
    euler: int
    b3: int
    h12: int

    def as_dict(self) -> dict:
        return {"delta": self.delta, "euler": self.euler, "b3": self.b3, "h12": self.h12}


EU_SMOOTH_QUADRIC = 4  # P1 x P1
EU_QUADRIC_CONE = 3
EU_P1 = 2
EVEN_BETTI_SUM = 1 + 0 + 2 + 2 + 0 + 1  # b0, b1, b2, b4, b5, b6


def quadric_pencil_h12(matrix_size: int, entry_degree: int) -> QuadricPencilRecord:
    """h^{1,2} of a smooth pencil of quadric surfaces with simple degenerations."""
    if matrix_size != 4:
        raise PipelineError("only pencils of quadric surfaces (4x4 matrices) are modelled")
    if entry_degree < 1:
        raise PipelineError("entry degree must be >= 1")
    delta = matrix_size * entry_degree
    euler = EU_SMOOTH_QUADRIC * EU_P1 + delta * (EU_QUADRIC_CONE - EU_SMOOTH_QUADRIC)
    b3 = EVEN_BETTI_SUM - euler
    if b3 < 0 or b3 % 2:
        raise PipelineError(f"b3 = {b3} is not a nonnegative even number")
    return QuadricPencilRecord(delta, euler, b3, b3 // 2)
