"""Per-criterion pass/fail summary for tests marked with @pytest.mark.criterion(n)."""

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", m.args[0]))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    n = props.get("criterion")
    if n is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(n, []).append((report.nodeid.split("::")[-1], report.outcome, props.get("detail")))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        res = _outcomes[n]
        ok = all(o == "passed" for _, o, _ in res)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({len(res)} checks)")
        for name, o, detail in res:
            terminalreporter.write_line(f"    {o:7s} {name}" + (f": {detail}" if detail else ""))
