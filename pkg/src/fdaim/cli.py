"""Command-line front end: simulate / abep / tables / verify.

Exit codes: 0 success, 2 configuration error, 3 runtime or I/O error,
4 guard violation (ML hypothesis space too large).
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import analysis
from .channel import NOISE_SPLITS
from .config import (ConfigError, SystemConfig, default_config, load_config,
                     small_config)
from .detectors import MlGuardError
from .harness import DETECTOR_NAMES, SweepSpec, run_sweep, write_csv
from .mapping import assemble_message, disassemble_message
from .spreading import sylvester_hadamard

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_GUARD = 4


def parse_snr_grid(text: str) -> tuple[float, ...]:
    """Either 'A:B:STEP' (inclusive) or a comma-separated list; 'inf' allowed."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"bad SNR range {text!r}, expected A:B:STEP")
        a, b, step = (float(p) for p in parts)
        if step <= 0 or b < a:
            raise ConfigError(f"bad SNR range {text!r}")
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return tuple(a + i * step for i in range(n))
    try:
        grid = tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"bad SNR list {text!r}") from exc
    if not grid:
        raise ConfigError("empty SNR grid")
    return grid


def _load(args) -> SystemConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return default_config()


def _detectors(name: str) -> tuple[str, ...]:
    return DETECTOR_NAMES if name == "both" else (name,)


def cmd_simulate(args) -> int:
    config = _load(args)
    spec = SweepSpec(snrs=parse_snr_grid(args.snr), trials=args.trials,
                     seed=args.seed, detectors=_detectors(args.detector),
                     noise_split=args.noise_split, workers=args.workers,
                     compute_abep=not args.no_abep)
    records = run_sweep(config, spec)
    if args.out:
        write_csv(records, config, args.out)
        if not args.no_plot:
            from .plotting import plot_ber_curves
            plot_ber_curves(records, config,
                            os.path.splitext(args.out)[0] + ".png")
    else:
        from .harness import CSV_HEADER
        print(CSV_HEADER)
        for r in records:
            print(r.csv_row(config))
    return EXIT_OK


def cmd_abep(args) -> int:
    config = _load(args)
    for snr in parse_snr_grid(args.snr):
        b = analysis.abep_breakdown(config, snr)
        print(f"snr={snr:g} dB  abep={b.abep:.6e}")
        print(f"  p_e={b.p_e:.6e} (printed form {b.p_e_printed:.6e})  "
              f"p_f={b.p_f:.6e}  p_f1={b.p_f1:.6e}")
        print(f"  p_e_w={b.p_e_w:.6e}  p_c_i={b.p_c_i:.6e}  "
              f"p_c_q={b.p_c_q:.6e}  p_w={b.p_w:.6e}  p_qam={b.p_qam:.6e}")
        print(f"  p1={b.p1:.6e}  p2={b.p2:.6e}  p3={b.p3:.6e}  "
              f"p4={b.p4:.6e}  p5={b.p5:.6e}")
    return EXIT_OK


def _table_configs() -> list[SystemConfig]:
    seen: dict[tuple, SystemConfig] = {}
    for params, _ in analysis.DATA_RATE_TABLE + analysis.ENERGY_SAVING_TABLE:
        n_t, n, m, l_codes, j = params
        if params not in seen:
            seen[params] = SystemConfig(n_t=n_t, n_active=n, m_offsets=m,
                                        l_codes=l_codes, j_qam=j)
    return list(seen.values())


def cmd_tables(args) -> int:
    configs = [_load(args)] if getattr(args, "config", None) else _table_configs()
    quoted_rate = {p: v for p, v in analysis.DATA_RATE_TABLE}
    quoted_esav = {p: v for p, v in analysis.ENERGY_SAVING_TABLE}
    print("n_t n m l j | p_total e_sav_pct ml_mults dblc_mults")
    for cfg in configs:
        rep = analysis.rate_energy_report(cfg)
        key = (cfg.n_t, cfg.n_active, cfg.m_offsets, cfg.l_codes, cfg.j_qam)
        print(f"{cfg.n_t} {cfg.n_active} {cfg.m_offsets} {cfg.l_codes} "
              f"{cfg.j_qam} | {rep.p_total} {rep.e_sav_pct:.1f} "
              f"{rep.ml_mults} {rep.dblc_mults}")
        if key in quoted_rate:
            pairs = ", ".join(f"{n}={v}" for n, v in
                              zip(analysis.COMPETITOR_NAMES, quoted_rate[key]))
            print(f"    quoted data rates: {pairs}")
        if key in quoted_esav:
            pairs = ", ".join(f"{n}={v:g}%" for n, v in
                              zip(analysis.COMPETITOR_NAMES, quoted_esav[key]))
            print(f"    quoted energy savings: {pairs}")
    return EXIT_OK


def cmd_verify(args) -> int:
    """Fast invariant suite; prints one line per check."""
    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    h = sylvester_hadamard(64)
    gram = h @ h.T
    check("walsh orthogonality K=64",
          bool(np.array_equal(gram, 64 * np.eye(64, dtype=np.int64))))

    cfg = small_config()
    rng = np.random.default_rng(0)
    ok = True
    for _ in range(200):
        bits = rng.integers(0, 2, cfg.p_total, dtype=np.uint8)
        msg = assemble_message(bits, cfg)
        ok = ok and bool(np.array_equal(disassemble_message(msg, cfg), bits))
    check("encode/decode round trip (p=7, 200 vectors)", ok)

    spec = SweepSpec(snrs=(math.inf,), trials=200, seed=1,
                     detectors=("ml", "dblc"), compute_abep=False)
    records = run_sweep(cfg, spec)
    check("noise-free BER = 0 (both detectors, 200 trials)",
          all(r.ber_total(cfg) == 0.0 for r in records))

    spec2 = SweepSpec(snrs=(10.0,), trials=100, seed=2, detectors=("dblc",),
                      compute_abep=False)
    rows1 = [r.csv_row(cfg) for r in run_sweep(cfg, spec2)]
    rows2 = [r.csv_row(cfg) for r in run_sweep(cfg, spec2)]
    check("determinism (repeated sweep, identical rows)", rows1 == rows2)

    return EXIT_OK if failures == 0 else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdaim",
        description="Link-level simulator and analysis for a generalized "
                    "code-index / frequency-offset / spatial index-modulation "
                    "scheme over Rayleigh MIMO channels.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, snr_default):
        p.add_argument("--config", help="JSON config path (SystemConfig keys)")
        p.add_argument("--snr", default=snr_default,
                       help="SNR grid in dB: A:B:STEP or comma list")

    p_sim = sub.add_parser("simulate", help="Monte Carlo BER sweep")
    add_common(p_sim, "0:20:5")
    p_sim.add_argument("--trials", type=int, default=10000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--detector", choices=("ml", "dblc", "both"),
                       default="dblc")
    p_sim.add_argument("--noise-split", choices=NOISE_SPLITS,
                       default="branch_n0_over_m")
    p_sim.add_argument("--out", help="CSV output path; a PNG figure is "
                                     "rendered alongside unless --no-plot")
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--no-plot", action="store_true")
    p_sim.add_argument("--no-abep", action="store_true",
                       help="skip the analytical columns")
    p_sim.set_defaults(func=cmd_simulate)

    p_abep = sub.add_parser("abep", help="analytical ABEP chain only")
    add_common(p_abep, "0:20:5")
    p_abep.set_defaults(func=cmd_abep)

    p_tab = sub.add_parser("tables",
                           help="data-rate / energy-saving / complexity report")
    p_tab.add_argument("--config", help="report a single JSON config instead "
                                        "of the built-in comparison set")
    p_tab.set_defaults(func=cmd_tables)

    p_ver = sub.add_parser("verify", help="run the fast invariant suite")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MlGuardError as exc:
        print(f"guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
