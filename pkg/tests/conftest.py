import numpy as np
import pytest

from nanokit.dispersion import DimerParams, find_s0
from nanokit.reduced import constants, ripple_remainder
from nanokit.solver import construct

W = 2.0


@pytest.fixture(scope="session")
def s0():
    return find_s0(W)


@pytest.fixture(scope="session")
def k_dom():
    return constants(W)


@pytest.fixture(scope="session")
def k_rich():
    """Normal form with every higher-order coefficient switched on."""
    return constants(W).with_higher(c33=1.0, c34=2.0, e31=0.5, e32=1.0, e33=0.3, e34=4.0)


@pytest.fixture(scope="session")
def built():
    """Dominant-truncation constructions at the two acceptance speeds."""
    return {eps: construct(DimerParams(W, eps, 1.0)) for eps in (0.1, 0.05)}


@pytest.fixture(scope="session")
def built_rich(k_rich):
    return {eps: construct(DimerParams(W, eps, 1.0), k_rich, ripple_remainder(1.0)) for eps in (0.1, 0.05)}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# ------------------------------------------------------------ acceptance report

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    num, title = marker.args[:2]
    part = marker.kwargs.get("part", "")
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _CRITERIA.setdefault(num, {"title": title, "parts": []})["parts"].append((part, rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        ok = all(p[1] for p in entry["parts"])
        bits = []
        for part, passed, detail in entry["parts"]:
            label = f"{part}: " if part else ""
            bits.append(f"{label}{'ok' if passed else 'FAILED'} ({detail})" if detail else f"{label}{'ok' if passed else 'FAILED'}")
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {entry['title']} :: " + " | ".join(bits))
