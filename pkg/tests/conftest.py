import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get(
        "tests.test_acceptance"
    )
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, seconds, detail in results:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  ({seconds:.2f}s)  {detail}")
