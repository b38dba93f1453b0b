import numpy as np
import pytest


def random_spd(rng, n, cond=10.0):
    """Random SPD matrix with eigenvalues spread over [1, cond]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(0, np.log(cond), n))
    return (q * w) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one "CRITERION n: PASS|FAIL ..." line per acceptance criterion
ACCEPTANCE = []


def record(number, title, ok, detail=""):
    line = f"CRITERION {number:>2}: {'PASS' if ok else 'FAIL'}  {title}"
    if detail:
        line += f"  [{detail}]"
    ACCEPTANCE.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
