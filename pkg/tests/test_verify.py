import pytest

from rkm import verify
from rkm.errors import ConfigError


def test_levels_for():
    assert verify.levels_for(200) == [1, 5, 10, 200]
    assert verify.levels_for(3) == [1, 3]
    assert verify.levels_for(2) == [1, 2]


def test_fixture_systems():
    assert verify.fixture_system("identity").A.shape == (50, 50)
    assert verify.fixture_system("diag").m == 3
    assert verify.fixture_system("circle").n == 100
    with pytest.raises(ConfigError):
        verify.fixture_system("hilbert")


@pytest.mark.parametrize("suite", ["lemmas", "theorem33", "theorem35", "props"])
def test_suites_on_small_fixtures(suite):
    systems = [verify.fixture_system("diag"), verify.fixture_system("identity", 8), verify.fixture_system("circle", 12)]
    checks = verify.run_suite(suite, systems)
    assert checks and all(c.passed for c in checks), verify.format_report(checks)


def test_propagation_suite():
    assert all(c.passed for c in verify.run_suite("propagation"))


def test_unknown_suite():
    with pytest.raises(ConfigError):
        verify.run_suite("everything")


def test_report_format():
    checks = [verify.Check("a", 0.5), verify.Check("b", -2e-11, 1e-10), verify.Check("c", -1.0)]
    text = verify.format_report(checks)
    lines = text.splitlines()
    assert lines[0].endswith("PASS") and lines[1].endswith("PASS") and lines[2].endswith("FAIL")
    assert lines[-1] == "2/3 checks passed"
