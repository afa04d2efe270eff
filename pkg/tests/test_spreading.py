import math

import numpy as np
import pytest

from fdaim import ConfigError, build_code_pools, despread, sylvester_hadamard
from fdaim.config import SystemConfig, default_config

from oracles import naive_despread


@pytest.mark.parametrize("k", [1, 2, 4, 8, 16, 32, 64])
def test_orthogonality_integer_exact(k):
    h = sylvester_hadamard(k)
    assert h.dtype == np.int64
    gram = h @ h.T
    assert np.array_equal(gram, k * np.eye(k, dtype=np.int64))
    # cross-correlations are exactly 0 or K, never anything else
    assert set(np.unique(gram)) <= {0, k}


def test_non_pow2_rejected():
    with pytest.raises(ConfigError):
        sylvester_hadamard(12)


def test_pool_layout(default_cfg):
    pool_i, pool_q = build_code_pools(default_cfg)
    assert pool_i.matrix.shape == (32, 8 * 4)
    assert pool_i.e_c == default_cfg.k_chips
    assert np.array_equal(pool_i.matrix, pool_q.matrix)
    h = sylvester_hadamard(32)
    # flat column p = (b-1)L + i is Hadamard row p-1
    for p in (1, 8, 9, 32):
        assert np.array_equal(pool_i.col(p), h[p - 1])


def test_pool_needs_enough_chips():
    with pytest.raises(ConfigError):
        SystemConfig(n_t=4, n_active=2, m_offsets=8, l_codes=8, j_qam=8,
                     k_chips=16)


def test_despread_isolates_column(default_cfg):
    """A noise-free branch built from one code column despreads to
    E_c * sqrt(P_S/N) * h * x on that column and zero elsewhere."""
    pool_i, _ = build_code_pools(default_cfg)
    h = np.array([0.3 - 0.2j, -1.1 + 0.4j])
    x_re = 0.7
    amp = math.sqrt(default_cfg.ps_power / default_cfg.n_active)
    p1 = 11
    branch = amp * x_re * np.outer(h, pool_i.col(p1))
    out = despread(branch, pool_i)
    expected_col = default_cfg.k_chips * amp * x_re * h
    np.testing.assert_allclose(out[:, p1 - 1], expected_col, atol=1e-12)
    mask = np.ones(out.shape[1], dtype=bool)
    mask[p1 - 1] = False
    np.testing.assert_allclose(out[:, mask], 0.0, atol=1e-12)


def test_despread_zero_input(default_cfg):
    pool_i, _ = build_code_pools(default_cfg)
    out = despread(np.zeros((2, default_cfg.k_chips)), pool_i)
    assert not out.any()


def test_despread_matches_naive_oracle(rng):
    cfg = default_config()
    pool_i, _ = build_code_pools(cfg)
    branch = rng.standard_normal((cfg.n_r, cfg.k_chips)) \
        + 1j * rng.standard_normal((cfg.n_r, cfg.k_chips))
    fast = despread(branch, pool_i)
    slow = naive_despread(branch, pool_i.matrix.astype(complex))
    np.testing.assert_allclose(fast, slow, atol=1e-10)


def test_despread_dimension_mismatch(default_cfg):
    pool_i, _ = build_code_pools(default_cfg)
    with pytest.raises(ValueError):
        despread(np.zeros((2, 7)), pool_i)
