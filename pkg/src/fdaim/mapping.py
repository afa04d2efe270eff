"""Bit-field to index mapping: combinations, permutations, Gray-coded QAM.

Combination and permutation ranks are lexicographic; only ranks below the
respective 2^width fit in the bit budget, so the upper part of each
combinatorial range is never transmitted.  A receiver may still demap an
out-of-range object; callers clamp the rank and flag the event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, SystemConfig, _is_pow2


# -- bit vector helpers ----------------------------------------------------

def bits_to_int(bits) -> int:
    """Big-endian bit vector -> integer."""
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def int_to_bits(value: int, width: int) -> np.ndarray:
    if value < 0 or (width == 0 and value != 0) or value >> width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)],
                    dtype=np.uint8)


# -- combinadic / Lehmer ranking -------------------------------------------

def unrank_combination(rank: int, n: int, k: int) -> tuple[int, ...]:
    """Lexicographically rank-th k-subset of {1..n} (ascending)."""
    total = math.comb(n, k)
    if not 0 <= rank < total:
        raise ValueError(f"combination rank {rank} out of range [0, {total})")
    out = []
    prev = 0
    for slot in range(k):
        for cand in range(prev + 1, n + 1):
            block = math.comb(n - cand, k - slot - 1)
            if rank < block:
                out.append(cand)
                prev = cand
                break
            rank -= block
    return tuple(out)


def rank_combination(subset, n: int, k: int) -> int:
    subset = tuple(subset)
    if len(subset) != k or any(subset[i] >= subset[i + 1] for i in range(k - 1)):
        raise ValueError(f"{subset} is not an ascending {k}-subset")
    if subset and not (1 <= subset[0] and subset[-1] <= n):
        raise ValueError(f"{subset} not within {{1..{n}}}")
    rank = 0
    prev = 0
    for slot, chosen in enumerate(subset):
        for cand in range(prev + 1, chosen):
            rank += math.comb(n - cand, k - slot - 1)
        prev = chosen
    return rank


def unrank_permutation(rank: int, n: int) -> tuple[int, ...]:
    """Lexicographically rank-th permutation of (1..n) via the Lehmer code."""
    total = math.factorial(n)
    if not 0 <= rank < total:
        raise ValueError(f"permutation rank {rank} out of range [0, {total})")
    pool = list(range(1, n + 1))
    out = []
    for pos in range(n):
        f = math.factorial(n - 1 - pos)
        idx, rank = divmod(rank, f)
        out.append(pool.pop(idx))
    return tuple(out)


def rank_permutation(perm) -> int:
    perm = tuple(perm)
    n = len(perm)
    if sorted(perm) != list(range(1, n + 1)):
        raise ValueError(f"{perm} is not a permutation of 1..{n}")
    pool = list(range(1, n + 1))
    rank = 0
    for pos, val in enumerate(perm):
        idx = pool.index(val)
        rank += idx * math.factorial(n - 1 - pos)
        pool.pop(idx)
    return rank


# -- rectangular Gray-coded QAM --------------------------------------------

def _gray_to_binary(g: int) -> int:
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


@dataclass(frozen=True)
class Constellation:
    """Rectangular J-QAM as an alpha-PAM I rail times a beta-PAM Q rail.

    ``points[v]`` is the symbol whose bit label is v; the first log2(alpha)
    bits Gray-label the I level, the remaining log2(beta) bits the Q level.
    Scaled to unit average energy.
    """

    order: int
    alpha: int
    beta: int
    points: np.ndarray

    @property
    def avg_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.order))

    def demap_nearest(self, z: complex) -> int:
        """Index (= bit label) of the closest constellation point."""
        return int(np.argmin(np.abs(self.points - z)))


def build_constellation(j_qam: int) -> Constellation:
    if not _is_pow2(j_qam) or j_qam < 2:
        raise ConfigError(f"J={j_qam} is not a power of two >= 2")
    log_j = int(math.log2(j_qam))
    alpha = 2 ** math.ceil(log_j / 2)
    beta = j_qam // alpha
    # PAM levels -(a-1), ..., +(a-1).
    lev_i = np.arange(-(alpha - 1), alpha, 2, dtype=float)
    points = np.empty(j_qam, dtype=complex)
    qbits = int(math.log2(beta))
    if beta > 1:
        lev_q = np.arange(-(beta - 1), beta, 2, dtype=float)
        scale = math.sqrt((alpha ** 2 + beta ** 2 - 2) / 3.0)
        for v in range(j_qam):
            vi, vq = v >> qbits, v & (beta - 1)
            points[v] = (lev_i[_gray_to_binary(vi)]
                         + 1j * lev_q[_gray_to_binary(vq)]) / scale
    else:
        # Degenerate Q rail (J=2): put the single quadrature level on the
        # diagonal so both spreading rails stay observable; the Q-rail code
        # index would otherwise never reach the receiver.  Unit energy and
        # per-chip |d|^2 = |x|^2 are preserved.
        scale = math.sqrt(2.0 * (alpha ** 2 - 1) / 3.0)
        for v in range(j_qam):
            points[v] = lev_i[_gray_to_binary(v)] * (1.0 + 1.0j) / scale
    return Constellation(order=j_qam, alpha=alpha, beta=beta, points=points)


# -- message assembly --------------------------------------------------------

@dataclass(frozen=True)
class TxMessage:
    """Decoded index fields for one transmission interval.

    ``antenna_set``/``offset_set`` ascending; ``realign`` permutes the sorted
    offsets across the active antennas, so antenna ``antenna_set[i]`` carries
    offset ``offset_set[realign[i]-1]``.  Code indices are 1-based.
    """

    bits: np.ndarray
    antenna_set: tuple[int, ...]
    offset_set: tuple[int, ...]
    realign: tuple[int, ...]
    code_idx_i: tuple[int, ...]
    code_idx_q: tuple[int, ...]
    qam_indices: tuple[int, ...]
    qam_symbols: np.ndarray

    @property
    def realigned_offsets(self) -> tuple[int, ...]:
        """Offset index carried by each active antenna, in antenna order."""
        return tuple(self.offset_set[r - 1] for r in self.realign)


def assemble_message(bits, config: SystemConfig,
                     constellation: Constellation | None = None) -> TxMessage:
    """Split a p_total bit vector into the five index fields."""
    bits = np.asarray(bits, dtype=np.uint8)
    b = config.budget
    if bits.ndim != 1 or bits.size != b.p_total:
        raise ValueError(f"expected {b.p_total} bits, got shape {bits.shape}")
    if constellation is None:
        constellation = build_constellation(config.j_qam)

    cuts = np.cumsum([b.p_s, b.p_f, b.p_r, b.p_m])
    f_s, f_f, f_r, f_m, f_c = np.split(bits, cuts)

    antenna_set = unrank_combination(bits_to_int(f_s), config.n_t, config.n_active)
    offset_set = unrank_combination(bits_to_int(f_f), config.m_offsets, config.n_active)
    realign = unrank_permutation(bits_to_int(f_r), config.n_active)

    log_j = constellation.bits_per_symbol
    qam_indices = tuple(bits_to_int(f_m[i * log_j:(i + 1) * log_j])
                        for i in range(config.n_active))
    log_l = int(math.log2(config.l_codes))
    code_i, code_q = [], []
    for i in range(config.n_active):
        pair = f_c[i * 2 * log_l:(i + 1) * 2 * log_l]
        code_i.append(bits_to_int(pair[:log_l]) + 1)
        code_q.append(bits_to_int(pair[log_l:]) + 1)

    return TxMessage(
        bits=bits,
        antenna_set=antenna_set,
        offset_set=offset_set,
        realign=realign,
        code_idx_i=tuple(code_i),
        code_idx_q=tuple(code_q),
        qam_indices=qam_indices,
        qam_symbols=constellation.points[list(qam_indices)],
    )


def disassemble_message(msg: TxMessage, config: SystemConfig) -> np.ndarray:
    """Inverse of assemble_message; exact on the transmitted bit range."""
    return fields_to_bits(
        config,
        antenna_rank=rank_combination(msg.antenna_set, config.n_t, config.n_active),
        offset_rank=rank_combination(msg.offset_set, config.m_offsets, config.n_active),
        realign_rank=rank_permutation(msg.realign),
        qam_indices=msg.qam_indices,
        code_idx_i=msg.code_idx_i,
        code_idx_q=msg.code_idx_q,
    )


def fields_to_bits(config: SystemConfig, antenna_rank: int, offset_rank: int,
                   realign_rank: int, qam_indices, code_idx_i, code_idx_q
                   ) -> np.ndarray:
    b = config.budget
    log_j = int(math.log2(config.j_qam))
    log_l = int(math.log2(config.l_codes))
    parts = [int_to_bits(antenna_rank, b.p_s),
             int_to_bits(offset_rank, b.p_f),
             int_to_bits(realign_rank, b.p_r)]
    parts += [int_to_bits(v, log_j) for v in qam_indices]
    for ci, cq in zip(code_idx_i, code_idx_q):
        parts.append(int_to_bits(ci - 1, log_l))
        parts.append(int_to_bits(cq - 1, log_l))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)
