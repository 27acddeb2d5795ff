import numpy as np
import pytest


def fd_gradient(f, arr: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Independent central-finite-difference oracle.

    Perturbs ``arr`` in place (restoring it) and re-evaluates the scalar
    ``f()`` for every element.  Deliberately knows nothing about the tape.
    """
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        f_plus = float(f())
        flat[i] = original - step
        f_minus = float(f())
        flat[i] = original
        grad_flat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


@pytest.fixture
def fd():
    return fd_gradient
