import os

import pytest

from cenlab.datasets import find_mnist_files

MNIST_DIR = os.environ.get("MNIST_DIR", "/root/data/mnist")


@pytest.fixture(scope="session")
def mnist_train_paths():
    """Paths of the real MNIST training files; set MNIST_DIR to point at them."""
    images, labels = find_mnist_files(MNIST_DIR, "train")
    if not (os.path.exists(images) and os.path.exists(labels)):
        pytest.fail(
            f"MNIST training files not found under {MNIST_DIR!r}; "
            "set MNIST_DIR to a directory holding train-images-idx3-ubyte "
            "and train-labels-idx1-ubyte"
        )
    return images, labels


ACCEPTANCE_RESULTS = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for the acceptance report, then assert."""

    def check(name, passed, detail):
        ACCEPTANCE_RESULTS[name] = (bool(passed), detail)
        assert passed, f"{name}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
