import numpy as np
import pytest

from opinionfit.model import ModelParams, ScoreTensor


def random_tensor(rng, I, J, R=1, missing=0.0, scale=1.0):
    """Random scores with every subject and stimulus keeping at least one vote."""
    u = rng.normal(3.0, scale, size=(I, J, R))
    while True:
        mask = rng.random((I, J, R)) >= missing
        if mask.any(axis=(1, 2)).all() and mask.any(axis=(0, 2)).all():
            return ScoreTensor.from_dense(u, mask)


def random_params(rng, I, J):
    return ModelParams(
        psi=rng.normal(3.0, 1.0, J),
        delta=rng.normal(0.0, 0.5, I),
        upsilon=rng.uniform(0.5, 1.5, I),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def noiseless_panel():
    g = np.random.default_rng(5)
    I, J = 10, 20
    psi = g.uniform(1, 5, J)
    delta = g.normal(0, 0.7, I)
    delta -= delta.mean()
    u = psi[None, :] + delta[:, None]
    return ScoreTensor.from_dense(u), psi, delta


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def acceptance_log(request):
    """Record one PASS/FAIL line for the terminal summary."""
    lines = request.config.stash[ACCEPTANCE_LINES]

    def record(number, ok, detail):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"criterion {number:>2}: {status}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
