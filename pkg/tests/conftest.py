from acceptance_log import RESULTS, TITLES


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in TITLES.items():
        if n in RESULTS:
            ok, detail = RESULTS[n]
            tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title}: {detail}")
        else:
            tr.write_line(f"[FAIL] {n:>2}. {title}: not run or errored before a verdict")
