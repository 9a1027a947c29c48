import numpy as np
import pytest

from nystrom_landmarks import KernelSpec, kernel_matrix, projector_kernel, standardize


def random_instance(n, seed, gamma=1e-2, d=3, sigma=1.0):
    """Standardized Gaussian cloud with its kernel matrix and projector."""
    rng = np.random.default_rng(seed)
    data = standardize(rng.normal(size=(n, d)))
    K = kernel_matrix(KernelSpec("gaussian", sigma), data)
    return data, K, projector_kernel(K, gamma)


@pytest.fixture
def small_instance():
    return random_instance(20, 0)


# One line per acceptance criterion, echoed again in the terminal summary.
ACCEPTANCE_LINES = []


def report_criterion(number, title, passed, detail):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
