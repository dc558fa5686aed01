import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def simulate_arma(n, ar=(), ma=(), c=0.0, sigma=1.0, seed=0, burn=500):
    """ARMA simulation with zero pre-sample values and a burn-in."""
    gen = np.random.default_rng(seed)
    e = gen.standard_normal(n + burn) * sigma
    y = np.zeros(n + burn)
    for t in range(n + burn):
        v = c + e[t]
        for i, a in enumerate(ar, 1):
            if t - i >= 0:
                v += a * y[t - i]
        for j, b in enumerate(ma, 1):
            if t - j >= 0:
                v += b * e[t - j]
        y[t] = v
    return y[burn:]


ACCEPTANCE_VERDICTS: dict = {}


def record_verdict(number: int, title: str, passed: bool, detail: str = "") -> None:
    """Store a criterion outcome for the end-of-session summary and assert it."""
    ACCEPTANCE_VERDICTS[number] = (title, passed, detail)
    assert passed, f"criterion {number} ({title}) failed: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_VERDICTS):
        title, passed, detail = ACCEPTANCE_VERDICTS[number]
        line = f"{'PASS' if passed else 'FAIL'} {number}. {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)
