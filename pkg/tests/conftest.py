import pytest

# (criterion number, description, passed, detail) rows filled in by test_acceptance
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {desc}  [{detail}]")


@pytest.fixture
def criterion():
    def record(num, desc, ok, detail=""):
        ACCEPTANCE.append((num, desc, bool(ok), detail))
        print(f"criterion {num} {'PASS' if ok else 'FAIL'}: {desc} [{detail}]")
        assert ok, f"criterion {num} failed: {detail}"
    return record
