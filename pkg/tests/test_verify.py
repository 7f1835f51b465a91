import math

from horncrit.verify import Check, format_matrix, verify_all

from conftest import domain


def test_all_checks_pass_on_horn():
    checks = verify_all(domain(1, 2, "power", gamma=0.6), simulate=False)
    assert [c.name for c in checks if c.passed is False] == []
    names = {c.name for c in checks}
    assert {"lyapunov linkage", "closed-form B", "endpoint extremum"} <= names


def test_simulation_checks_included(cylinder):
    checks = verify_all(cylinder)
    sim = [c for c in checks if c.name.startswith(("paths stay", "seeded replay"))]
    assert len(sim) == 3 and all(c.passed for c in sim)


def test_irregular_profile_skips_lyapunov():
    # growth faster than linear breaks the regularity conditions
    checks = verify_all(domain(1, 2, "power", gamma=1.5), simulate=False)
    statuses = {c.name: c.status for c in checks}
    assert statuses["regularity conditions on H"] == "FAIL"
    assert statuses["lyapunov checks"] == "skip"


def test_matrix_format():
    text = format_matrix([Check("a", True, 0.5, 1.0), Check("longer name", None, detail="n/a"),
                          Check("b", False)])
    lines = text.splitlines()
    assert lines[0].startswith("pass") and "(<= 1e+00)" in lines[0]
    assert lines[1].startswith("skip") and lines[1].endswith("n/a")
    assert lines[2].startswith("FAIL")
    assert Check("x", None).status == "skip" and math.isnan(Check("x", True).value)
