import functools

from lspkit import SearchContext, generate_demands, load_bundled, measure, train

DAY = 48


@functools.lru_cache(maxsize=None)
def experiment(name, rule="max_threshold", seed=7, area_max=500.0, threads=1):
    """Five days of training, one of validation, one searched; cached per process."""
    model = load_bundled(name)
    demands = generate_demands(model, seed, 7 * DAY)
    meas = measure(model, demands)
    det = train(meas.slice(0, 5 * DAY), meas.slice(5 * DAY, 6 * DAY), rule)
    ctx = SearchContext(model, demands.slice(6 * DAY, 7 * DAY), det, area_max=area_max, threads=threads)
    return model, meas, det, ctx


ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(name: str, ok: bool, detail: str):
    """Log one acceptance criterion for the end-of-run summary, then assert it."""
    ACCEPTANCE.append((name, bool(ok), detail))
    assert ok, f"{name}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
