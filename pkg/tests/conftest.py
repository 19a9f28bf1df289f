import numpy as np
import pytest

from nearelliptic import GridSpec, example2_tensor, identity_tensor
from nearelliptic.tensors import SymTensor4, _sym_pair_transpose


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(n=2, N=2, M=32, L=1.0)


@pytest.fixture(scope="session")
def identity22():
    return identity_tensor(2, 2)


@pytest.fixture(scope="session")
def block_m8():
    return example2_tensor(8.0)


def random_sym_tensor(n: int, N: int, seed: int, scale: float = 1.0) -> SymTensor4:
    """Random tensor with the pair symmetry, not necessarily elliptic."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((N, N, n, n)) * scale
    return SymTensor4(0.5 * (raw + _sym_pair_transpose(raw)))


def random_symmetric_batch(rng, count: int, N: int, n: int) -> np.ndarray:
    raw = rng.standard_normal((count, N, n, n))
    return 0.5 * (raw + np.swapaxes(raw, -1, -2))
