"""Exhaustive ML detection and the three-stage despread (DBLC) detector.

DBLC: (1) pick the N highest-energy offset branches, (2) despread each
branch's I/Q rails and take the strongest column, which encodes antenna and
code index as p = (b-1)L + i, (3) per-branch nearest-symbol decision with
perfect CSI.  ML enumerates all 2^p transmit hypotheses against the
composite chip matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import BranchOutputs, ChannelState, CompositeOutput
from .config import SystemConfig
from .mapping import (Constellation, TxMessage, assemble_message,
                      build_constellation, fields_to_bits, int_to_bits,
                      rank_combination, rank_permutation)
from .spreading import CodePool


class MlGuardError(RuntimeError):
    """The 2^p hypothesis space exceeds the enumeration guard."""


@dataclass(frozen=True)
class DetectionResult:
    bits: np.ndarray
    antenna_set: tuple[int, ...]
    offset_set: tuple[int, ...]
    realign: tuple[int, ...]
    code_idx_i: tuple[int, ...]
    code_idx_q: tuple[int, ...]
    qam_indices: tuple[int, ...]
    flags: tuple[str, ...] = ()
    mults: int = 0
    metric: float = math.nan


@dataclass
class ErrorCounts:
    """Bit-error tallies per field; accumulates across trials."""

    freq: int = 0
    code: int = 0
    spatial: int = 0
    realign: int = 0
    qam: int = 0
    trials: int = 0

    @property
    def total(self) -> int:
        return self.freq + self.code + self.spatial + self.realign + self.qam

    def add(self, other: "ErrorCounts") -> None:
        self.freq += other.freq
        self.code += other.code
        self.spatial += other.spatial
        self.realign += other.realign
        self.qam += other.qam
        self.trials += other.trials


def count_bit_errors(tx: TxMessage, rx: DetectionResult,
                     config: SystemConfig) -> ErrorCounts:
    b = config.budget
    diff = np.bitwise_xor(tx.bits, rx.bits)
    cuts = np.cumsum([b.p_s, b.p_f, b.p_r, b.p_m])
    e_s, e_f, e_r, e_m, e_c = (int(x.sum()) for x in np.split(diff, cuts))
    return ErrorCounts(freq=e_f, code=e_c, spatial=e_s, realign=e_r,
                       qam=e_m, trials=1)


# -- DBLC -----------------------------------------------------------------

def decode_flat_index(p_hat: int, l_codes: int) -> tuple[int, int]:
    """Invert p = (b-1)L + i with 1-based i in {1..L}; handles multiples of L."""
    r = p_hat % l_codes
    if r == 0:
        return p_hat // l_codes, l_codes
    return p_hat // l_codes + 1, r


def dblc_stage1_freq(branches: BranchOutputs, config: SystemConfig
                     ) -> tuple[tuple[int, ...], np.ndarray]:
    """N largest branch energies -> ascending offset estimates; ties to the
    lower branch index."""
    energies = np.einsum("mrk,mrk->m", branches.branches,
                         branches.branches.conj()).real
    order = np.argsort(-energies, kind="stable")[:config.n_active]
    u_hat = tuple(sorted(int(m) + 1 for m in order))
    return u_hat, energies


@dataclass
class Stage2Slot:
    u_hat: int
    b_hat: int
    i_hat_i: int
    i_hat_q: int
    p_hat: int
    q_hat: int
    col_i: np.ndarray
    col_q: np.ndarray
    rail_disagree: bool
    qam_index: int = -1


def dblc_stage2_codes_antennas(branches: BranchOutputs, u_hat, energies,
                               pools: tuple[CodePool, CodePool],
                               config: SystemConfig) -> tuple[list[Stage2Slot], list[str]]:
    """Despread both rails per estimated branch and decode (antenna, code
    index) from the strongest columns.  The I rail is authoritative for the
    antenna; a rail mismatch only raises a flag.  Duplicate antenna claims
    are resolved in descending branch-energy order by excluding already
    claimed antenna blocks."""
    pool_i, pool_q = pools
    l_codes = config.l_codes
    flags: list[str] = []
    per_branch = []
    for u in u_hat:
        y = branches.branches[u - 1]
        di = y.real @ pool_i.matrix
        dq = y.imag @ pool_q.matrix
        norms_i = np.einsum("rp,rp->p", di, di)
        norms_q = np.einsum("rp,rp->p", dq, dq)
        per_branch.append((u, di, dq, norms_i, norms_q))

    raw_b = []
    for u, di, dq, norms_i, norms_q in per_branch:
        raw_b.append(decode_flat_index(int(np.argmax(norms_i)) + 1, l_codes)[0])
    collision = len(set(raw_b)) < len(raw_b)
    if collision:
        flags.append("antenna_collision")

    # Branch processing order: energy priority (descending), ties by offset.
    order = sorted(range(len(per_branch)),
                   key=lambda i: (-energies[per_branch[i][0] - 1], per_branch[i][0]))
    taken: set[int] = set()
    slots: list[Stage2Slot | None] = [None] * len(per_branch)
    for i in order:
        u, di, dq, norms_i, norms_q = per_branch[i]
        masked = norms_i.copy()
        for b in taken:
            masked[(b - 1) * l_codes:b * l_codes] = -np.inf
        p_hat = int(np.argmax(masked)) + 1
        q_hat = int(np.argmax(norms_q)) + 1
        b_hat, i_hat_i = decode_flat_index(p_hat, l_codes)
        b_hat_q, i_hat_q = decode_flat_index(q_hat, l_codes)
        taken.add(b_hat)
        disagree = b_hat_q != b_hat
        if disagree and "rail_disagreement" not in flags:
            flags.append("rail_disagreement")
        slots[i] = Stage2Slot(u_hat=u, b_hat=b_hat, i_hat_i=i_hat_i,
                              i_hat_q=i_hat_q, p_hat=p_hat, q_hat=q_hat,
                              col_i=di[:, p_hat - 1], col_q=dq[:, q_hat - 1],
                              rail_disagree=disagree)
    return [s for s in slots if s is not None], flags


def dblc_stage3_qam(slots: list[Stage2Slot], chan: ChannelState,
                    config: SystemConfig, constellation: Constellation) -> None:
    """Nearest-symbol decision on the despread statistic, gain E_c removed."""
    e_c = float(config.k_chips)
    amp = math.sqrt(config.ps_power / config.n_active)
    pts = constellation.points
    for slot in slots:
        z = (slot.col_i + 1j * slot.col_q) / e_c
        h = chan.link(slot.u_hat, slot.b_hat, config.n_t)
        if config.rail_coupling == "separated":
            cand = amp * (np.outer(pts.real, h.real) + 1j * np.outer(pts.imag, h.imag))
        else:
            cand = amp * np.outer(pts, h)
        metrics = np.abs(z[None, :] - cand) ** 2
        slot.qam_index = int(np.argmin(metrics.sum(axis=1)))


def dblc_finalize(slots: list[Stage2Slot], flags: list[str],
                  config: SystemConfig, mults: int = 0) -> DetectionResult:
    """Sort slots by antenna, rank the index objects, clamp out-of-budget
    ranks, and reassemble the bit vector."""
    b = config.budget
    slots = sorted(slots, key=lambda s: s.b_hat)
    antenna_set = tuple(s.b_hat for s in slots)
    u_sorted = tuple(sorted(s.u_hat for s in slots))
    realign = tuple(u_sorted.index(s.u_hat) + 1 for s in slots)

    def clamp(rank: int, width: int, name: str) -> int:
        if rank >> width:
            flags.append(f"clamped_{name}")
            return (1 << width) - 1
        return rank

    antenna_rank = clamp(rank_combination(antenna_set, config.n_t, config.n_active),
                         b.p_s, "spatial")
    offset_rank = clamp(rank_combination(u_sorted, config.m_offsets, config.n_active),
                        b.p_f, "freq")
    realign_rank = clamp(rank_permutation(realign), b.p_r, "realign")

    bits = fields_to_bits(config, antenna_rank, offset_rank, realign_rank,
                          qam_indices=[s.qam_index for s in slots],
                          code_idx_i=[s.i_hat_i for s in slots],
                          code_idx_q=[s.i_hat_q for s in slots])
    return DetectionResult(
        bits=bits, antenna_set=antenna_set, offset_set=u_sorted,
        realign=realign,
        code_idx_i=tuple(s.i_hat_i for s in slots),
        code_idx_q=tuple(s.i_hat_q for s in slots),
        qam_indices=tuple(s.qam_index for s in slots),
        flags=tuple(flags), mults=mults)


def dblc_mult_count(config: SystemConfig) -> int:
    """Real multiplications the three stages actually perform (branch
    energies, two despreading products with column norms, symbol metrics)."""
    c = config
    stage1 = 2 * c.k_chips * c.m_offsets * c.n_r
    stage2 = 2 * c.n_active * (c.n_r * c.k_chips * c.l_codes * c.n_t
                               + c.n_r * c.l_codes * c.n_t)
    stage3 = c.n_active * c.j_qam * c.n_r
    return stage1 + stage2 + stage3


def dblc_detect(branches: BranchOutputs, chan: ChannelState,
                pools: tuple[CodePool, CodePool], config: SystemConfig,
                constellation: Constellation | None = None) -> DetectionResult:
    if constellation is None:
        constellation = build_constellation(config.j_qam)
    u_hat, energies = dblc_stage1_freq(branches, config)
    slots, flags = dblc_stage2_codes_antennas(branches, u_hat, energies,
                                              pools, config)
    dblc_stage3_qam(slots, chan, config, constellation)
    return dblc_finalize(slots, flags, config, mults=dblc_mult_count(config))


# -- exhaustive ML ----------------------------------------------------------

@dataclass
class _HypothesisTable:
    link_idx: np.ndarray   # (2^p, N) 0-based column into H
    ci_idx: np.ndarray     # (2^p, N) 0-based column into the I pool
    cq_idx: np.ndarray
    x_re: np.ndarray       # (2^p, N)
    x_im: np.ndarray


_TABLE_CACHE: dict[SystemConfig, _HypothesisTable] = {}


def _hypothesis_table(config: SystemConfig,
                      constellation: Constellation) -> _HypothesisTable:
    table = _TABLE_CACHE.get(config)
    if table is not None:
        return table
    p = config.p_total
    n = config.n_active
    count = 1 << p
    link_idx = np.empty((count, n), dtype=np.int64)
    ci_idx = np.empty((count, n), dtype=np.int64)
    cq_idx = np.empty((count, n), dtype=np.int64)
    x_re = np.empty((count, n))
    x_im = np.empty((count, n))
    for v in range(count):
        msg = assemble_message(int_to_bits(v, p), config, constellation)
        offs = msg.realigned_offsets
        for s in range(n):
            a = msg.antenna_set[s]
            link_idx[v, s] = (offs[s] - 1) * config.n_t + (a - 1)
            ci_idx[v, s] = (a - 1) * config.l_codes + msg.code_idx_i[s] - 1
            cq_idx[v, s] = (a - 1) * config.l_codes + msg.code_idx_q[s] - 1
        x_re[v] = msg.qam_symbols.real
        x_im[v] = msg.qam_symbols.imag
    table = _HypothesisTable(link_idx, ci_idx, cq_idx, x_re, x_im)
    _TABLE_CACHE[config] = table
    return table


def ml_search_mult_count(config: SystemConfig) -> int:
    """Nominal multiplications per hypothesis of the composite-model metric."""
    c = config
    return (c.n_t * c.m_offsets * c.n_r * c.k_chips
            + 2 * c.n_active * c.n_t * c.m_offsets * c.k_chips
            + c.n_r * c.k_chips)


def _reconstruct(table: _HypothesisTable, sel: np.ndarray, chan: ChannelState,
                 pools: tuple[CodePool, CodePool], config: SystemConfig) -> np.ndarray:
    """Noise-free composite matrices for a chunk of hypotheses: (n, N_R, K)."""
    amp = math.sqrt(config.ps_power / config.n_active)
    g = chan.h[:, table.link_idx[sel]]                 # (N_R, n, N)
    ci = pools[0].matrix[:, table.ci_idx[sel]]         # (K, n, N)
    cq = pools[1].matrix[:, table.cq_idx[sel]]
    xr = table.x_re[sel]
    xi = table.x_im[sel]
    if config.rail_coupling == "separated":
        s = (np.einsum("rhn,hn,khn->hrk", g.real, xr, ci)
             + 1j * np.einsum("rhn,hn,khn->hrk", g.imag, xi, cq))
    else:
        x = xr[None, :, :] * ci + 1j * xi[None, :, :] * cq  # (K, n, N)
        s = np.einsum("rhn,khn->hrk", g, x)
    return amp * s


def ml_metric(bits, composite: CompositeOutput, chan: ChannelState,
              pools: tuple[CodePool, CodePool], config: SystemConfig,
              constellation: Constellation | None = None) -> float:
    """Residual ||Y - reconstruction(bits)||^2 of one hypothesis."""
    if constellation is None:
        constellation = build_constellation(config.j_qam)
    table = _hypothesis_table(config, constellation)
    v = int(np.asarray(bits).dot(1 << np.arange(config.p_total)[::-1]))
    rec = _reconstruct(table, np.array([v]), chan, pools, config)[0]
    return float(np.sum(np.abs(composite.y - rec) ** 2))


def ml_detect(composite: CompositeOutput, chan: ChannelState,
              pools: tuple[CodePool, CodePool], config: SystemConfig,
              constellation: Constellation | None = None,
              guard_bits: int = 24, chunk: int = 4096) -> DetectionResult:
    """Argmin over all 2^p hypotheses of the composite residual; ties go to
    the lower bit-vector value."""
    p = config.p_total
    if p > guard_bits:
        raise MlGuardError(
            f"p_total={p} exceeds the {guard_bits}-bit enumeration guard")
    if constellation is None:
        constellation = build_constellation(config.j_qam)
    table = _hypothesis_table(config, constellation)
    count = 1 << p
    best_v, best_metric = -1, math.inf
    y = composite.y
    for start in range(0, count, chunk):
        sel = np.arange(start, min(start + chunk, count))
        rec = _reconstruct(table, sel, chan, pools, config)
        metrics = np.sum(np.abs(y[None] - rec) ** 2, axis=(1, 2))
        i = int(np.argmin(metrics))
        if metrics[i] < best_metric:
            best_metric = float(metrics[i])
            best_v = start + i
    bits = int_to_bits(best_v, p)
    msg = assemble_message(bits, config, constellation)
    return DetectionResult(
        bits=bits, antenna_set=msg.antenna_set, offset_set=msg.offset_set,
        realign=msg.realign, code_idx_i=msg.code_idx_i,
        code_idx_q=msg.code_idx_q, qam_indices=msg.qam_indices,
        flags=(), mults=ml_search_mult_count(config) * count,
        metric=best_metric)
