"""Walsh-Hadamard code pools and despreading."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, SystemConfig, _is_pow2


def sylvester_hadamard(k_chips: int) -> np.ndarray:
    """Sylvester construction: H_1=[1], H_2n = [[H,H],[H,-H]]. Integer +-1."""
    if not _is_pow2(k_chips):
        raise ConfigError(f"K={k_chips} is not a power of two")
    h = np.array([[1]], dtype=np.int64)
    while h.shape[0] < k_chips:
        h = np.block([[h, h], [h, -h]])
    return h


@dataclass(frozen=True)
class CodePool:
    """K x (L*N_T) bank of +-1 spreading columns; antenna n owns the
    contiguous block (n-1)L+1 .. nL, matching p = (b-1)L + i index arithmetic."""

    matrix: np.ndarray
    rail: str

    @property
    def e_c(self) -> int:
        return self.matrix.shape[0]

    def col(self, flat_idx: int) -> np.ndarray:
        """1-based flat column p = (antenna-1)*L + i."""
        return self.matrix[:, flat_idx - 1]


def build_code_pools(config: SystemConfig) -> tuple[CodePool, CodePool]:
    """I and Q rail pools; rails reuse the same Hadamard-row assignment since
    they are separated by I/Q demultiplexing, not by code."""
    need = config.l_codes * config.n_t
    if config.k_chips < need:
        raise ConfigError(f"K={config.k_chips} < L*N_T={need}")
    h = sylvester_hadamard(config.k_chips)
    matrix = h[:need].T.copy()  # column p = Hadamard row p-1
    return CodePool(matrix=matrix, rail="I"), CodePool(matrix=matrix, rail="Q")


def despread(branch_matrix: np.ndarray, pool: CodePool) -> np.ndarray:
    """Correlate an N_R x K branch against every pool column: plain product."""
    branch_matrix = np.asarray(branch_matrix)
    if branch_matrix.ndim != 2 or branch_matrix.shape[1] != pool.matrix.shape[0]:
        raise ValueError(
            f"branch shape {branch_matrix.shape} does not match K={pool.matrix.shape[0]}")
    return branch_matrix @ pool.matrix
