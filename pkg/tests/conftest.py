from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fakeprobe.synthetic import DEFAULT_COLOURS, make_corpus  # noqa: E402

GRAY = DEFAULT_COLOURS["real"]

ACCEPTANCE_TITLES = {
    1: "DFT oracle equivalence",
    2: "spectrum averaging",
    3: "gradient checks",
    4: "softmax and connection properties",
    5: "synthetic hybrid detection",
    6: "synthetic attribution",
    7: "path equivalence",
    8: "binning and clustering",
    9: "determinism",
    10: "balanced-split invariants",
}
_results: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): test belongs to acceptance criterion n")


def pytest_runtest_logreport(report):
    marker = dict(report.user_properties).get("acceptance")
    if marker is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _results.setdefault(int(marker), []).append(report.outcome)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            item.user_properties.append(("acceptance", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_TITLES):
        outcomes = _results.get(n)
        if outcomes is None:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}  {status:7s}  {ACCEPTANCE_TITLES[n]}")


@pytest.fixture(scope="session")
def marker_manifest(tmp_path_factory):
    """Real vs SD, identical image distribution; SD prompts start with FAKEWORD."""
    root = tmp_path_factory.mktemp("marker")
    return make_corpus(root, {"real": 250, "SD": 250}, seed=11, markers={"SD": "FAKEWORD"},
                       colours={"SD": GRAY}, dataset_tag="marker")


@pytest.fixture(scope="session")
def attribution_manifest(tmp_path_factory):
    """Five origins sharing one image distribution; each fake origin has its own marker."""
    root = tmp_path_factory.mktemp("attr")
    counts = {"real": 150, "SD": 150, "LD": 150, "GLIDE": 150, "DALLE2": 60}
    colours = {o: GRAY for o in counts}
    return make_corpus(root, counts, seed=12, colours=colours, dataset_tag="attr")


@pytest.fixture(scope="session")
def small_manifest(tmp_path_factory):
    """Small five-origin corpus with distinct colours and markers, 40 per origin."""
    root = tmp_path_factory.mktemp("small")
    return make_corpus(root, {o: 40 for o in ("real", "SD", "LD", "GLIDE", "DALLE2")}, seed=13, size=8)
