import numpy as np
import pytest

from scaopo.solver import SurrogateModel

ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


def random_surrogates(rng, n_costs, dim, anchor_scale=1.0,
                      curvature_range=(0.5, 3.0), value_shift=0.0):
    """A bundle of random quadratic models sharing one anchor."""
    anchor = anchor_scale * rng.standard_normal(dim)
    models = []
    for i in range(n_costs):
        models.append(SurrogateModel(
            value=float(rng.standard_normal()) + (0.0 if i == 0 else value_shift),
            grad=rng.standard_normal(dim),
            curvature=float(rng.uniform(*curvature_range)),
            anchor=anchor.copy()))
    return models


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
