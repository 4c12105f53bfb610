import sys
from pathlib import Path

# oracles.py sits next to the tests and is imported as a top-level module
sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (title, passed, detail)
ACCEPTANCE: dict = {}


def record(number: int, title: str, passed: bool, detail: str = ""):
    ACCEPTANCE[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")
