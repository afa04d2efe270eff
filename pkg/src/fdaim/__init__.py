"""Link-level simulator and analytical toolkit for a generalized
code-index / frequency-offset / spatial index-modulation scheme over
Rayleigh MIMO channels."""

from .analysis import (AbepBreakdown, RateEnergyReport, abep_breakdown,
                       abep_total, complexity_counts, data_rate,
                       energy_saving, rate_energy_report)
from .channel import (BranchOutputs, ChannelState, CompositeOutput,
                      sample_channel, synth_branch_outputs, synth_composite,
                      synth_paired)
from .config import (BitBudget, ConfigError, SystemConfig, default_config,
                     derive_bit_budget, load_config, small_config)
from .detectors import (DetectionResult, ErrorCounts, MlGuardError,
                        count_bit_errors, dblc_detect, ml_detect, ml_metric)
from .harness import (BerRecord, SweepSpec, instrumented_counts, run_point,
                      run_sweep, write_csv)
from .mapping import (Constellation, TxMessage, assemble_message,
                      build_constellation, disassemble_message,
                      rank_combination, rank_permutation, unrank_combination,
                      unrank_permutation)
from .spreading import CodePool, build_code_pools, despread, sylvester_hadamard

__version__ = "0.1.0"

__all__ = [
    "AbepBreakdown", "BerRecord", "BitBudget", "BranchOutputs", "ChannelState",
    "CodePool", "CompositeOutput", "ConfigError", "Constellation",
    "DetectionResult", "ErrorCounts", "MlGuardError", "RateEnergyReport",
    "SweepSpec", "SystemConfig", "TxMessage", "abep_breakdown", "abep_total",
    "assemble_message", "build_code_pools", "build_constellation",
    "complexity_counts", "count_bit_errors", "data_rate", "dblc_detect",
    "default_config", "derive_bit_budget", "despread", "disassemble_message",
    "energy_saving", "instrumented_counts", "load_config", "ml_detect",
    "ml_metric", "rank_combination", "rank_permutation", "rate_energy_report",
    "run_point", "run_sweep", "sample_channel", "small_config",
    "sylvester_hadamard", "synth_branch_outputs", "synth_composite",
    "synth_paired", "unrank_combination", "unrank_permutation", "write_csv",
    "__version__",
]
