import copy
import itertools
import json

import pytest

from almost_fano import catalog
from almost_fano.catalog import (
    CASE_ORDER,
    CaseSchemaError,
    builtin_case_ids,
    case_from_dict,
    load_case,
    parse_class,
    render_json,
    render_text,
    run_all,
    run_case,
    summarize,
)
from almost_fano.lattice import Lattice


def raw(cid):
    path = catalog._builtin_path(cid)
    return json.loads(path.read_text(encoding="utf-8"))


def test_builtin_ids():
    assert set(builtin_case_ids()) == set(CASE_ORDER)


@pytest.mark.parametrize("cid", CASE_ORDER)
def test_every_builtin_loads(cid):
    s = load_case(cid)
    assert s.id == cid and s.checks


def test_load_from_path(tmp_path):
    p = tmp_path / "case.json"
    p.write_text(json.dumps(raw("B-iii-4")))
    assert load_case(p).id == "B-iii-4"
    assert load_case(str(p)).source.endswith("case.json")


def test_load_unknown():
    with pytest.raises(CaseSchemaError):
        load_case("no-such-case")


def test_parse_class():
    lat = Lattice.from_rows(["H", "C'"], [[4, 0], [0, -2]])
    names = {"H": lat.basis("H"), "C'": lat.basis("C'")}
    assert parse_class("2H - 3C'", names, lat).coords == (2, -3)
    assert parse_class("-H+C'", names, lat).coords == (-1, 1)
    assert parse_class("0", names, lat).is_zero()
    with pytest.raises(CaseSchemaError):
        parse_class("2X", names, lat)
    with pytest.raises(CaseSchemaError):
        parse_class("H +* C'", names, lat)


def _schema_error(data):
    with pytest.raises(CaseSchemaError) as err:
        case_from_dict(data)
    return err.value


def test_schema_asymmetric_gram():
    d = raw("B-iii-3")
    d["lattice"]["gram"][0][1] = 5
    assert "lattice" in _schema_error(d).location


def test_schema_unknown_op():
    d = raw("B-iii-3")
    d["checks"][0]["op"] = "frobnicate"
    err = _schema_error(d)
    assert "checks[0]" in err.location


def test_schema_unbound_class():
    d = raw("B-iii-3")
    d["classes"]["X"] = "Ha + Q"
    assert "classes" in _schema_error(d).location


def test_schema_missing_expect_and_bad_construction():
    d = raw("B-iii-3")
    del d["checks"][0]["expect"]
    assert "checks[0]" in _schema_error(d).location
    d = raw("B-iii-3")
    d["construction"] = "orbifold"
    _schema_error(d)


def test_schema_bad_pipeline_and_flag():
    d = raw("A-1")
    d["pipeline"]["kind"] = "magic"
    _schema_error(d)
    d = raw("A-1")
    d["expected"]["volume"] = 3
    _schema_error(d)
    d = raw("B-ii")
    d["flags"][0]["field"] = "nonsense"
    _schema_error(d)


def test_run_case_pass():
    r = run_case(load_case("B-iii-4"))
    assert r.status == "pass"
    assert all(s["passed"] for s in r.steps)


def test_run_case_flagged():
    r = run_case(load_case("B-ii"))
    assert r.status == "flagged"
    fired = [f for f in r.discrepancy_flags if f["fired"]]
    assert [f["field"] for f in fired] == ["z"]
    assert fired[0]["anchor"]


def test_corrupted_expectation_fails():
    d = raw("A-1")
    d["expected"]["kx3"] = 13
    r = run_case(case_from_dict(d))
    assert r.status == "fail"
    bad = [s for s in r.steps if not s["passed"]]
    assert bad and bad[0]["op"] == "expected.kx3"


def test_corrupted_check_fails():
    d = raw("B-iii-3")
    for ch in d["checks"]:
        if ch["op"] == "very_ample_check":
            ch["expect"]["witnesses"] = ch["expect"]["witnesses"][:1]
    assert run_case(case_from_dict(d)).status == "fail"


def test_unfired_flag_keeps_pass():
    d = raw("B-ii")
    r0 = run_case(case_from_dict(d))
    d["flags"][0]["printed_value"] = r0.values["z"]
    assert run_case(case_from_dict(d)).status == "pass"


def test_run_all_summary():
    reports, summary = run_all()
    assert [r.case_id for r in reports] == list(CASE_ORDER)
    assert summary["total"] == 10 and summary["fail"] == 0
    assert summary["pass"] + summary["flagged"] == 10
    assert sorted(summary["flags"]) == ["B-ii: z", "B-iii-1: h12"]
    assert [r.values["kx3"] for r in reports] == [12, 10, 8, 6, 4, 14, 12, 6, 4, 2]
    assert [r.values["h12"] for r in reports] == [2, 6, 3, 3, 4, 2, 2, 4, 3, 5]


def test_json_deterministic():
    a, _ = run_all()
    b, _ = run_all()
    assert render_json(a) == render_json(b)
    doc = json.loads(render_json(a))
    assert set(doc) == {"reports", "summary"}
    assert "timing" not in doc["reports"][0]
    assert "timing" in json.loads(render_json(a, include_timing=True))["reports"][0]


def test_text_columns():
    reports, _ = run_all()
    text = render_text(reports)
    head = text.splitlines()[0].split()
    for col in ("Name", "(-K_X)^3", "-K_X.C", "z", "h^{1,2}", "status", "flags"):
        assert col in head
    assert text.rstrip().endswith("0 fail")
    assert "B-ii" in text and "flagged" in text


def test_empty_report():
    assert summarize([]) == {"total": 0, "pass": 0, "flagged": 0, "fail": 0, "flags": []}
    assert "0 cases" in render_text([])


def test_emit_report_to_file(tmp_path):
    reports, _ = run_all([load_case("B-iii-4")])
    out = tmp_path / "r.json"
    catalog.emit_report(reports, "json", out)
    assert json.loads(out.read_text())["summary"]["total"] == 1
    with pytest.raises(ValueError):
        catalog.emit_report(reports, "xml", out)


def test_spec_is_not_mutated_by_run():
    s = load_case("A-2")
    before = copy.deepcopy(s.expected)
    run_case(s)
    assert s.expected == before


def test_fixed_part_polynomial_vs_printed_form():
    # the printed form drops squares: it equals the exact one only on 0/1 coefficients
    r = run_case(load_case("B-iii-4"))
    step = next(s for s in r.steps if s["op"] == "fixed_part_square")
    coef = step["got"]["coefficients"]

    def exact(a, b, c):
        v = {"1": 1, "a": a, "b": b, "c": c, "a^2": a * a, "b^2": b * b, "c^2": c * c, "a*b": a * b, "a*c": a * c, "b*c": b * c}
        return sum(k * v[m] for m, k in coef.items())

    def printed(a, b, c):
        return 8 - (18 * a + 36 * b + 26 * c) + 12 * a * c + 6 * b * c

    for v in itertools.product((0, 1), repeat=3):
        assert exact(*v) == printed(*v)
    assert exact(2, 0, 0) != printed(2, 0, 0)
