import math

import numpy as np
import pytest

from fdaim import MlGuardError, SweepSpec, default_config, run_point, \
    run_sweep, write_csv
from fdaim.harness import CSV_HEADER, instrumented_counts, run_trial_range, trial_rng


def test_trial_rng_stream_independence():
    a = trial_rng(1, 0, 0).integers(0, 1000, 10)
    b = trial_rng(1, 0, 1).integers(0, 1000, 10)
    c = trial_rng(1, 0, 0).integers(0, 1000, 10)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, c)


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(snrs=(), trials=10, seed=0)
    with pytest.raises(ValueError):
        SweepSpec(snrs=(0.0,), trials=0, seed=0)
    with pytest.raises(ValueError):
        SweepSpec(snrs=(0.0,), trials=10, seed=0, detectors=("bogus",))
    with pytest.raises(ValueError):
        SweepSpec(snrs=(0.0,), trials=10, seed=0, noise_split="bogus")
    with pytest.raises(ValueError):
        SweepSpec(snrs=(0.0,), trials=10, seed=0, workers=0)


def test_ml_guard_in_run_point():
    cfg = default_config()  # 25 bits
    spec = SweepSpec(snrs=(10.0,), trials=5, seed=0, detectors=("ml",))
    with pytest.raises(MlGuardError):
        run_point(cfg, 10.0, 0, spec)


def test_zero_noise_zero_ber(small_cfg):
    spec = SweepSpec(snrs=(math.inf,), trials=400, seed=3,
                     detectors=("ml", "dblc"), compute_abep=False)
    for r in run_sweep(small_cfg, spec):
        assert r.ber_total(small_cfg) == 0.0
        assert r.se_total(small_cfg) == 0.0


def test_field_decomposition(small_cfg):
    counts = run_trial_range(small_cfg, 0.0, 0, 4, 0, 300, ("dblc",),
                             "branch_n0_over_m")["dblc"]
    assert counts.total == (counts.freq + counts.code + counts.spatial
                            + counts.realign + counts.qam)
    assert counts.trials == 300


def test_worker_count_invariance(small_cfg):
    base = SweepSpec(snrs=(5.0,), trials=60, seed=9, detectors=("dblc",),
                     compute_abep=False)
    c1 = run_point(small_cfg, 5.0, 0, base)
    split = SweepSpec(snrs=(5.0,), trials=60, seed=9, detectors=("dblc",),
                      compute_abep=False, workers=3)
    c3 = run_point(small_cfg, 5.0, 0, split)
    assert c1["dblc"].__dict__ == c3["dblc"].__dict__


def test_chunking_matches_single_range(small_cfg):
    whole = run_trial_range(small_cfg, 5.0, 0, 9, 0, 50, ("dblc",),
                            "branch_n0_over_m")["dblc"]
    parts = [run_trial_range(small_cfg, 5.0, 0, 9, a, b, ("dblc",),
                             "branch_n0_over_m")["dblc"]
             for a, b in ((0, 17), (17, 40), (40, 50))]
    total = sum(p.total for p in parts)
    assert whole.total == total


def test_detector_selection_does_not_change_stream(small_cfg):
    """Paired synthesis: a detector's tallies are identical whether it runs
    alone or alongside the other detector."""
    both = run_trial_range(small_cfg, 5.0, 0, 11, 0, 100, ("ml", "dblc"),
                           "branch_n0_over_m")
    alone = run_trial_range(small_cfg, 5.0, 0, 11, 0, 100, ("dblc",),
                            "branch_n0_over_m")
    assert both["dblc"].__dict__ == alone["dblc"].__dict__


def test_csv_output(tmp_path, small_cfg):
    spec = SweepSpec(snrs=(0.0, 10.0), trials=50, seed=1,
                     detectors=("ml", "dblc"), compute_abep=False)
    records = run_sweep(small_cfg, spec)
    assert len(records) == 4
    path = tmp_path / "out.csv"
    write_csv(records, small_cfg, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 5
    assert lines[1].split(",")[-2] == "ml"
    # repeated run is byte-identical
    path2 = tmp_path / "out2.csv"
    write_csv(run_sweep(small_cfg, spec), small_cfg, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_abep_columns_match_standalone(small_cfg):
    from fdaim.analysis import abep_breakdown
    spec = SweepSpec(snrs=(5.0,), trials=20, seed=2, detectors=("dblc",))
    rec = run_sweep(small_cfg, spec)[0]
    standalone = abep_breakdown(small_cfg, 5.0)
    assert rec.abep == standalone.abep
    assert (rec.p1, rec.p2, rec.p3, rec.p4, rec.p5) == (
        standalone.p1, standalone.p2, standalone.p3, standalone.p4,
        standalone.p5)


def test_zero_error_warning(small_cfg):
    spec = SweepSpec(snrs=(60.0,), trials=30, seed=5, detectors=("dblc",),
                     compute_abep=False)
    with pytest.warns(RuntimeWarning, match="zero errors"):
        run_sweep(small_cfg, spec)


def test_deep_ber_warning():
    cfg = default_config()
    spec = SweepSpec(snrs=(40.0,), trials=10, seed=5, detectors=("dblc",))
    with pytest.warns(RuntimeWarning, match="trials are needed"):
        run_sweep(cfg, spec)


def test_instrumented_counts(small_cfg):
    ml, dblc = instrumented_counts(small_cfg)
    assert ml == 13312
    assert dblc < ml


def test_ber_nonincreasing_with_snr(small_cfg):
    spec = SweepSpec(snrs=(0.0, 10.0, 20.0), trials=2000, seed=6,
                     detectors=("dblc",), compute_abep=False)
    records = run_sweep(small_cfg, spec)
    bers = [r.ber_total(small_cfg) for r in records]
    ses = [r.se_total(small_cfg) for r in records]
    for i in range(len(bers) - 1):
        assert bers[i + 1] <= bers[i] + 2 * (ses[i] + ses[i + 1])
