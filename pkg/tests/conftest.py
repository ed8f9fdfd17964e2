"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_outcomes: dict[int, list[tuple[str, bool]]] = {}

TITLES = {
    1: "optimal-CD vs QAOA fidelity table, seeds 0-4",
    2: "size sweep ordering",
    3: "coupling sweep ordering",
    4: "coefficient peaks and endpoint",
    5: "alpha1 against numerical action minimization",
    6: "circuit evolution against dense matrix products",
    7: "invariant suite",
    8: "Trotter error exponent",
    9: "deterministic payloads",
}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes.setdefault(marker.args[0], []).append((item.name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        ok = all(passed for _, passed in results)
        failed = [name for name, passed in results if not passed]
        line = f"ACCEPTANCE criterion {n}: {'PASS' if ok else 'FAIL'} - {TITLES.get(n, '')}"
        if failed:
            line += f" (failing: {', '.join(failed)})"
        terminalreporter.write_line(line)
