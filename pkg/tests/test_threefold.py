import itertools
import random
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from almost_fano.threefold import (
    H12_BASE,
    PipelineError,
    PipelineInput,
    blowup_curve_invariants,
    certify_square,
    dpd_candidates,
    dpd_eliminations,
    dpd_feasible_triples,
    dpd_solve_system,
    dpd_transform,
    dpd_transform_general_d5,
    fiber_model,
    game_discriminant_polynomial,
    h0_bidegree,
    h12_chain,
    quadric_pencil_h12,
    rational_sqrt,
)
from oracles import FIBER_NUMBERS, sympy_fiber_solutions, sympy_game


def test_blowup_invariants_examples():
    assert blowup_curve_invariants(64, 16, 1).kx3 == 32
    assert blowup_curve_invariants(32, 11, 1).kx3 == 10
    assert blowup_curve_invariants(54, 28, 6).kx3 == 8
    assert blowup_curve_invariants(32, 12, 1).kx3 == 8


def test_blowup_of_line_in_p3():
    # Bl of P3 along a line: (-K)^3 = 54, E^3 = -deg N = -2
    inv = blowup_curve_invariants(64, 4, 0)
    assert inv.kx3 == 54 and inv.e3 == -2


def test_blowup_invariants_consistent():
    # expand (-K_V - E)^k E^(3-k) from (-K_V)^2.E = 0, (-K_V).E^2 = -(-K_V).B, E^3 = -deg N_B
    for kv3, b, g in itertools.product((64, 54, 40), range(0, 30, 3), range(0, 6)):
        v2e, ve2, e3 = 0, -b, -(b + 2 * g - 2)
        inv = blowup_curve_invariants(kv3, b, g)
        assert inv.kx3 == kv3 - 3 * v2e + 3 * ve2 - e3
        assert inv.k2e == v2e - 2 * ve2 + e3
        assert inv.ke2 == ve2 - e3
        assert inv.e3 == e3


@pytest.mark.parametrize("d", [5, 6])
def test_fiber_numbers_match_hand_values(d):
    fib = fiber_model(d)
    assert (fib.k2, fib.ke, fib.e2) == FIBER_NUMBERS[d]


def test_fiber_model_bad_degree():
    with pytest.raises(PipelineError):
        fiber_model(4)


def test_pipeline_input_validation():
    with pytest.raises(PipelineError):
        PipelineInput(40, 25, 5, 7)
    with pytest.raises(PipelineError):
        PipelineInput(40, 28, 6, 5)
    with pytest.raises(PipelineError):
        PipelineInput(54, 28, -1, 5)


def test_game_example_d6():
    r = dpd_transform(PipelineInput(40, 25, 5, 6))
    assert r.as_dict() == {"kx3": 2, "kx_dot_c": 1, "z": "5/2"}
    assert dpd_solve_system(PipelineInput(40, 25, 5, 6)) == r


def test_game_example_d5():
    r = dpd_transform(PipelineInput(54, 28, 6, 5))
    assert r.as_dict() == {"kx3": 10, "kx_dot_c": 0, "z": "2/3"}


@pytest.mark.parametrize("d", [5, 6])
def test_feasible_triples_agree_with_sympy(d):
    fib = fiber_model(d)
    k2, ke, e2 = FIBER_NUMBERS[d]
    want = set()
    for m in range(0, fib.max_m + 1):
        for x, y in sympy_fiber_solutions(d, m):
            if (ke * x + e2 * y).is_integer:
                want.add((m, Fraction(int(x.p), int(x.q)), Fraction(int(y.p), int(y.q))))
    assert dpd_feasible_triples(d) == want


def test_feasible_triples_values():
    assert dpd_feasible_triples(6) == {(0, 0, 0), (1, Fraction(1, 2), Fraction(-1, 2)), (3, 0, 1)}
    assert dpd_feasible_triples(5) == {(0, 0, 0), (1, Fraction(2, 3), Fraction(-1, 3)), (5, 0, 1)}


def test_no_even_m_solutions_d6():
    den, coeffs = game_discriminant_polynomial(6)
    assert (den, coeffs) == (20, [6, 30, 0])
    R = lambda m: coeffs[0] * m * m + coeffs[1] * m + coeffs[2]
    assert R(1) == 36 and certify_square(36).is_square  # control
    for m, value in ((2, 84), (4, 216)):
        assert R(m) == value
        cert = certify_square(value)
        assert not cert.is_square
        assert cert.floor_sqrt**2 < value < (cert.floor_sqrt + 1) ** 2
    rational = {c.m for c in dpd_candidates(6) if c.rational}
    assert rational == {0, 1, 3}


def test_discriminant_d5():
    den, coeffs = game_discriminant_polynomial(5)
    assert (den, coeffs) == (12, [5, 20, 0])
    R = lambda m: 5 * m * m + 20 * m
    assert {m for m in range(6) if sympy.sqrt(R(m)).is_integer} == {c.m for c in dpd_candidates(5) if c.rational}


@pytest.mark.parametrize("d", [5, 6])
def test_eliminations(d):
    rec = dpd_eliminations(d)
    assert rec.all_eliminated
    assert [s.name for s in rec.steps] == ["divisorial n=1", "divisorial n=2", "dimension 2"]
    for step in rec.steps:
        # independent: sympy finds no rational point on each outcome
        assert sympy.sqrt(sympy.Rational(step.x_squared_or_gap.numerator, step.x_squared_or_gap.denominator)).is_rational is False
    expected = {6: {15, 30, 60, 120, 6}, 5: {10, 20, 90, 180, 5}}[d]
    assert rec.radicands() == expected


def test_eliminations_replay_sympy():
    # divisorial outcomes: (-K_F).D = 0, D^2 = -2n; dimension 2: (-K_F).D = 2, D^2 = 0
    for d in (5, 6):
        k2, ke, e2 = FIBER_NUMBERS[d]
        x, y = sympy.symbols("x y")
        for lin, quad in ((0, -2), (0, -4), (2, 0)):
            sols = sympy.solve([k2 * x + ke * y - lin, k2 * x**2 + 2 * ke * x * y + e2 * y**2 - quad], [x, y], dict=True)
            assert sols and not any(s[x].is_rational for s in sols)


def test_certify_square():
    assert certify_square(-1).is_square is False
    assert certify_square(0).is_square
    assert certify_square(144).floor_sqrt == 12
    assert rational_sqrt(Fraction(9, 100)) == Fraction(3, 10)
    assert rational_sqrt(Fraction(21, 100)) is None
    assert rational_sqrt(Fraction(-1)) is None


@pytest.mark.parametrize("d", [5, 6])
def test_symbolic_resolve_matches_closed_forms(d):
    (w, b, g), (u, v, z) = sympy_game(d)
    if d == 6:
        closed = (
            (3 * w - 16 * g - 32) / sympy.Integer(4),
            (8 * b - 24 * g - w - 32) / sympy.Integer(8),
            (4 * b - 8 * g - w) / sympy.Integer(8),
        )
    else:
        closed = (
            (5 * w - 18 * g - 72) / sympy.Integer(9),
            (9 * b - 18 * g - 2 * w - 36) / sympy.Integer(9),
            (6 * b - 9 * g - 2 * w) / sympy.Integer(9),
        )
    for got, want in zip((u, v, z), closed):
        assert sympy.simplify(got - want) == 0


def grid_inputs(n=200, seed=7):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        d = rng.choice((5, 6))
        w = 54 if d == 5 else rng.choice((64, 54, 40, 32, 24, 16, 8))
        out.append(PipelineInput(w, rng.randint(0, 60), rng.randint(0, 20), d))
    return out


def test_grid_resolve_agrees():
    forms = {d: sympy_game(d) for d in (5, 6)}
    for inp in grid_inputs():
        (w, b, g), exprs = forms[inp.d]
        sub = {w: inp.kw3, b: inp.kw_dot_b, g: inp.g_b}
        want = tuple(Fraction(str(e.subs(sub))) for e in exprs)
        got = dpd_transform(inp)
        assert (got.kx3, got.kx_dot_c, got.z) == want
        assert dpd_solve_system(inp) == got


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 60), st.integers(0, 20))
def test_d5_general_formula_specialises(b, g):
    assert dpd_transform_general_d5(54, b, g) == dpd_transform(PipelineInput(54, b, g, 5))


def test_h12_chain_examples():
    assert h12_chain("P3", [["blowup", 1], ["blowup", 1], ["flop"], ["blowdown", 0]]).value == 2
    assert h12_chain("P2xP1", [("blowup", 6), "flop", {"kind": "blowdown", "g": 0}]).value == 6
    rec = h12_chain(3, [])
    assert rec.value == 3 and rec.provenance == ("base: 3",)


def test_h12_chain_errors():
    with pytest.raises(PipelineError):
        h12_chain("nowhere", [])
    with pytest.raises(PipelineError):
        h12_chain(-1, [])
    with pytest.raises(PipelineError):
        h12_chain("P3", [["blowdown", 1]])
    with pytest.raises(PipelineError):
        h12_chain("P3", [["twist", 1]])


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(sorted(H12_BASE)), st.lists(st.integers(0, 6), max_size=5), st.randoms())
def test_h12_chain_permutation_invariant(base, genera, rnd):
    steps = [["blowup", g] for g in genera] + [["flop"]] * 2
    shuffled = list(steps)
    rnd.shuffle(shuffled)
    want = H12_BASE[base] + sum(genera)
    assert h12_chain(base, steps).value == want == h12_chain(base, shuffled).value


def test_h0_bidegree():
    assert h0_bidegree(1, 1, 1, 1) == 4
    assert h0_bidegree(2, 1, 2, 1) == 12
    assert h0_bidegree(3, 1, 0, 0) == 1
    with pytest.raises(PipelineError):
        h0_bidegree(0, 1, 1, 1)
    with pytest.raises(PipelineError):
        h0_bidegree(1, 1, -1, 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 4), st.integers(0, 4))
def test_h0_bidegree_counts_monomials(a, b, m, n):
    def monomials(k, deg):
        return sum(1 for e in itertools.product(range(deg + 1), repeat=k + 1) if sum(e) == deg)

    assert h0_bidegree(a, b, m, n) == monomials(a, m) * monomials(b, n)


def test_quadric_pencil_example():
    # Bl of P3 along an elliptic quartic: e = 4, b3 = 2
    assert quadric_pencil_h12(4, 1).as_dict() == {"delta": 4, "euler": 4, "b3": 2, "h12": 1}
    assert quadric_pencil_h12(4, 2).h12 == 3


def test_quadric_pencil_errors():
    with pytest.raises(PipelineError):
        quadric_pencil_h12(3, 1)
    with pytest.raises(PipelineError):
        quadric_pencil_h12(4, 0)


@pytest.mark.parametrize("deg", [1, 2])
def test_discriminant_degree_sympy(deg):
    # a general symmetric 4x4 with binary forms of degree deg has a squarefree det of degree 4*deg
    s, t = sympy.symbols("s t")
    rng = random.Random(deg)
    mons = [s**i * t ** (deg - i) for i in range(deg + 1)]
    m = sympy.zeros(4, 4)
    for i in range(4):
        for j in range(i, 4):
            e = sum(rng.randint(-5, 5) * mon for mon in mons)
            m[i, j] = m[j, i] = e
    det = sympy.Poly(sympy.expand(m.det()), s, t)
    assert det.total_degree() == 4 * deg == quadric_pencil_h12(4, deg).delta
    uni = sympy.Poly(det.as_expr().subs(t, 1), s)
    assert sympy.degree(sympy.gcd(uni, uni.diff(s))) == 0
