from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
HOUSING = ROOT / "data" / "housing"

# criterion number -> (title, passed, detail), filled as acceptance tests finish
_criteria = {}


@pytest.fixture
def housing_path():
    if not HOUSING.exists():
        pytest.skip("housing data file not present")
    return HOUSING


def command_lines(data, housing=None):
    """Small invocations of every CLI subcommand (seed and output are appended by callers)."""
    grids = ["--alpha-grid", "1,1e9", "--lambda-grid", "0,0.01", "--folds", "3"]
    lines = {
        "gen": ["gen", "--n", "30", "--d", "3", "--noise", "sparse_output", "--level", "20"],
        "train": ["train", "--data", str(data), "--steps", "500", "--record-every", "100", "--alpha", "2"],
        "crossval": ["crossval", "--data", str(data), *grids, "--steps-per-sample", "10"],
        "sweep": ["sweep", "--levels", "10,30", "--n", "60", "--d", "5", "--n-test", "100", "--trials", "2", *grids,
                  "--steps-per-sample", "10"],
        "rate-check": ["rate-check", "--d", "3", "--n-grid", "50,100,200", "--trials", "2", "--total-steps", "2000"],
        "mlp-demo": ["mlp-demo", "--d", "3", "--hidden", "4", "--n-train", "50", "--n-test", "50", "--steps", "100"],
        "qq": ["qq", "--data", str(data), "--steps-per-sample", "10"],
        "check-axioms": ["check-axioms", "--grid-points", "200"],
    }
    if housing is not None:
        lines["housing"] = ["housing", "--data", str(housing), "--trials", "1", "--alpha-grid", "1,1e9", "--lambda-grid", "0",
                            "--folds", "2", "--steps-per-sample", "5"]
    return lines


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _criteria[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, detail = _criteria[number]
        line = f"criterion {number} {status}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
