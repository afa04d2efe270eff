"""Seeded Monte Carlo BER harness with deterministic parallel accumulation.

Every trial owns an RNG stream keyed by (master_seed, snr_index, trial), and
per-field error counts are accumulated as integers, so results are identical
for any worker count or execution order.  The same noise realization feeds
both detectors when both are requested (paired trials).
"""

from __future__ import annotations

import math
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .analysis import AbepBreakdown, abep_breakdown
from .channel import NOISE_SPLITS, sample_channel, synth_paired
from .config import SystemConfig
from .detectors import (ErrorCounts, MlGuardError, count_bit_errors,
                        dblc_detect, ml_detect)
from .mapping import assemble_message, build_constellation
from .spreading import build_code_pools

DETECTOR_NAMES = ("ml", "dblc")

CSV_HEADER = ("snr_db,trials,ber_total,ber_freq,ber_code,ber_spatial,"
              "ber_realign,ber_qam,se_total,abep,p1,p2,p3,p4,p5,detector,seed")


@dataclass(frozen=True)
class SweepSpec:
    snrs: tuple[float, ...]
    trials: int
    seed: int
    detectors: tuple[str, ...] = ("dblc",)
    noise_split: str = "branch_n0_over_m"
    workers: int = 1
    compute_abep: bool = True

    def __post_init__(self):
        if not self.snrs:
            raise ValueError("empty SNR grid")
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        for d in self.detectors:
            if d not in DETECTOR_NAMES:
                raise ValueError(f"unknown detector {d!r}")
        if self.noise_split not in NOISE_SPLITS:
            raise ValueError(f"unknown noise_split {self.noise_split!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    trials: int
    detector: str
    seed: int
    errors_freq: int
    errors_code: int
    errors_spatial: int
    errors_realign: int
    errors_qam: int
    abep: float = math.nan
    p1: float = math.nan
    p2: float = math.nan
    p3: float = math.nan
    p4: float = math.nan
    p5: float = math.nan

    def _field_ber(self, errors: int, width: int) -> float:
        return errors / (self.trials * width) if width else 0.0

    def ber_total(self, config: SystemConfig) -> float:
        total = (self.errors_freq + self.errors_code + self.errors_spatial
                 + self.errors_realign + self.errors_qam)
        return total / (self.trials * config.p_total)

    def se_total(self, config: SystemConfig) -> float:
        ber = self.ber_total(config)
        return math.sqrt(ber * (1.0 - ber) / (self.trials * config.p_total))

    def csv_row(self, config: SystemConfig) -> str:
        b = config.budget
        cols = [repr(float(self.snr_db)), str(self.trials),
                repr(self.ber_total(config)),
                repr(self._field_ber(self.errors_freq, b.p_f)),
                repr(self._field_ber(self.errors_code, b.p_c)),
                repr(self._field_ber(self.errors_spatial, b.p_s)),
                repr(self._field_ber(self.errors_realign, b.p_r)),
                repr(self._field_ber(self.errors_qam, b.p_m)),
                repr(self.se_total(config)),
                repr(self.abep), repr(self.p1), repr(self.p2), repr(self.p3),
                repr(self.p4), repr(self.p5), self.detector, str(self.seed)]
        return ",".join(cols)


def trial_rng(seed: int, snr_index: int, trial: int) -> np.random.Generator:
    """Counter-based stream: one generator per (seed, point, trial)."""
    return np.random.default_rng(np.random.SeedSequence((seed, snr_index, trial)))


def run_trial_range(config: SystemConfig, snr_db: float, snr_index: int,
                    seed: int, start: int, stop: int, detectors,
                    noise_split: str) -> dict[str, ErrorCounts]:
    """Integer error tallies for trials [start, stop); order-independent."""
    constellation = build_constellation(config.j_qam)
    pools = build_code_pools(config)
    counts = {d: ErrorCounts() for d in detectors}
    for trial in range(start, stop):
        rng = trial_rng(seed, snr_index, trial)
        bits = rng.integers(0, 2, config.p_total, dtype=np.uint8)
        msg = assemble_message(bits, config, constellation)
        chan = sample_channel(config, rng)
        branches, composite = synth_paired(msg, chan, pools, config, snr_db,
                                           rng, noise_split)
        for d in detectors:
            if d == "ml":
                res = ml_detect(composite, chan, pools, config, constellation)
            else:
                res = dblc_detect(branches, chan, pools, config, constellation)
            counts[d].add(count_bit_errors(msg, res, config))
    return counts


def _worker(args):
    return run_trial_range(*args)


def run_point(config: SystemConfig, snr_db: float, snr_index: int,
              spec: SweepSpec) -> dict[str, ErrorCounts]:
    """Error tallies for one SNR point, split across workers by trial index."""
    if "ml" in spec.detectors and config.p_total > 24:
        raise MlGuardError(
            f"p_total={config.p_total} exceeds the ML enumeration guard")
    totals = {d: ErrorCounts() for d in spec.detectors}
    if spec.workers == 1:
        parts = [run_trial_range(config, snr_db, snr_index, spec.seed, 0,
                                 spec.trials, spec.detectors, spec.noise_split)]
    else:
        step = math.ceil(spec.trials / spec.workers)
        jobs = [(config, snr_db, snr_index, spec.seed, s,
                 min(s + step, spec.trials), spec.detectors, spec.noise_split)
                for s in range(0, spec.trials, step)]
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            parts = list(pool.map(_worker, jobs))
    for part in parts:
        for d, c in part.items():
            totals[d].add(c)
    return totals


def run_sweep(config: SystemConfig, spec: SweepSpec,
              out_path: str | None = None) -> list[BerRecord]:
    records: list[BerRecord] = []
    for snr_index, snr_db in enumerate(spec.snrs):
        analytical: AbepBreakdown | None = None
        if spec.compute_abep:
            analytical = abep_breakdown(config, snr_db)
            if 0.0 < analytical.abep < 1e-4:
                need = math.ceil(100.0 / (analytical.abep * config.p_total))
                warnings.warn(
                    f"deep-BER point at {snr_db} dB (predicted "
                    f"{analytical.abep:.2e}); about {need} trials are needed "
                    "for 10% relative Monte Carlo error",
                    RuntimeWarning, stacklevel=2)
        counts = run_point(config, snr_db, snr_index, spec)
        for d in spec.detectors:
            c = counts[d]
            rec = BerRecord(
                snr_db=snr_db, trials=spec.trials, detector=d, seed=spec.seed,
                errors_freq=c.freq, errors_code=c.code, errors_spatial=c.spatial,
                errors_realign=c.realign, errors_qam=c.qam)
            if analytical is not None:
                rec = replace(rec, abep=analytical.abep, p1=analytical.p1,
                              p2=analytical.p2, p3=analytical.p3,
                              p4=analytical.p4, p5=analytical.p5)
            if c.total == 0 and math.isfinite(snr_db):
                warnings.warn(
                    f"zero errors at {snr_db} dB with {spec.trials} trials; "
                    "the BER floor is below the Monte Carlo resolution",
                    RuntimeWarning, stacklevel=2)
            records.append(rec)
    if out_path is not None:
        write_csv(records, config, out_path)
    return records


def write_csv(records: list[BerRecord], config: SystemConfig, path: str) -> None:
    """Atomic CSV emission: write to a sibling temp file, then replace."""
    lines = [CSV_HEADER] + [r.csv_row(config) for r in records]
    payload = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def instrumented_counts(config: SystemConfig, seed: int = 0,
                        snr_db: float = 10.0) -> tuple[int, int]:
    """(ml, dblc) multiplication counters measured from one detector run."""
    constellation = build_constellation(config.j_qam)
    pools = build_code_pools(config)
    rng = trial_rng(seed, 0, 0)
    bits = rng.integers(0, 2, config.p_total, dtype=np.uint8)
    msg = assemble_message(bits, config, constellation)
    chan = sample_channel(config, rng)
    branches, composite = synth_paired(msg, chan, pools, config, snr_db, rng)
    ml = ml_detect(composite, chan, pools, config, constellation)
    dblc = dblc_detect(branches, chan, pools, config, constellation)
    return ml.mults, dblc.mults
