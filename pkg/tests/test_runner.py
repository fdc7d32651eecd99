import json
import math

import numpy as np
import pytest

from fdisac.errors import InvalidInputError
from fdisac.runner import (
    SubframeRecord,
    export_results,
    read_records_csv,
    rmse_over_run,
    run_scenario,
    summarize,
    write_records_csv,
)

from conftest import small_config


def _rec(i, errs, **kw):
    base = dict(
        index=i, true_doas_deg=[0.0] * len(errs), est_doas_deg=list(errs), true_ranges_m=[10.0] * len(errs),
        est_ranges_m=[10.5] * len(errs), range_bins=[6] * len(errs), doa_errors_deg=list(errs),
        range_errors_m=[0.5] * len(errs), doa_rmse_deg=float(np.sqrt(np.mean(np.square(errs)))),
        user_rates=[1.0, 2.0], sum_rate=3.0, radar_snr=12.5, residual_si_dbm=-40.0, alpha=8,
        saturation_ok=True, saturation_flags=[True, False], fallback_used=False, spectrum_degenerate=False,
    )
    base.update(kw)
    return SubframeRecord(**base)


def _strip(records):
    return [{k: v for k, v in r.__dict__.items() if k != "spectrum"} for r in records]


def test_runs_are_deterministic():
    cfg = small_config(seed=11)
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert _strip(a) == _strip(b)
    c = run_scenario(cfg.replace(seed=12))
    assert _strip(a) != _strip(c)


def test_half_duplex_rate_is_half_of_ideal():
    base = small_config(seed=3, simulate_radar=False, n_subframes=4)
    hd = run_scenario(base.replace(mode="hd_isac"))
    ideal = run_scenario(base.replace(mode="ideal_fd"))
    for h, i in zip(hd, ideal):
        assert h.sum_rate == pytest.approx(0.5 * i.sum_rate, rel=1e-12)


def test_full_taps_reach_ideal_rate():
    base = small_config(seed=5, simulate_radar=False, n_subframes=4)
    fd = run_scenario(base.replace(mode="fd_isac", n_taps=16))
    ideal = run_scenario(base.replace(mode="ideal_fd"))
    for f, i in zip(fd, ideal):
        assert f.saturation_ok and f.alpha == 4
        assert f.sum_rate == pytest.approx(i.sum_rate, rel=1e-9)


def test_fd_rate_does_not_exceed_ideal():
    for seed in range(4):
        base = small_config(seed=seed, simulate_radar=False, n_subframes=3, n_taps=2)
        fd = run_scenario(base.replace(mode="fd_isac"))
        ideal = run_scenario(base.replace(mode="ideal_fd"))
        assert np.mean([r.sum_rate for r in fd]) <= np.mean([r.sum_rate for r in ideal]) + 1e-12


def test_transmit_fallback_never_reuses():
    cfg = small_config(seed=2, rf_saturation_dbm=-200.0, saturation_fallback="transmit", n_taps=0)
    recs = run_scenario(cfg)
    assert not any(r.saturation_ok for r in recs)
    assert not any(r.fallback_used for r in recs)


def test_previous_fallback_needs_an_accepted_set():
    cfg = small_config(seed=2, rf_saturation_dbm=-200.0, saturation_fallback="previous", n_taps=0)
    assert not any(r.fallback_used for r in run_scenario(cfg))


def test_records_shape_and_sensing():
    cfg = small_config(seed=1, mode="ideal_fd", n_subframes=20, grid_step_deg=0.1)
    recs = run_scenario(cfg)
    assert len(recs) == 20 and [r.index for r in recs] == list(range(20))
    for r in recs:
        assert len(r.est_doas_deg) == 2 and len(r.user_rates) == 2
        assert all(not math.isnan(x) for x in r.est_ranges_m)


def test_rmse_examples():
    recs = [_rec(0, [0.1, -0.1]), _rec(1, [0.3, 0.0])]
    assert rmse_over_run(recs) == pytest.approx(math.sqrt((0.01 + 0.01 + 0.09) / 4))
    assert rmse_over_run(recs, slice(1, 2)) == pytest.approx(math.sqrt(0.09 / 2))
    with pytest.raises(InvalidInputError):
        rmse_over_run(recs, slice(5, 6))


def test_csv_round_trip(tmp_path):
    recs = [_rec(i, [0.01 * i, -0.02]) for i in range(20)]
    recs[3] = _rec(3, [0.0, 0.0], est_ranges_m=[float("nan"), 3.0], residual_si_dbm=-math.inf,
                   saturation_flags=[False, False], fallback_used=True)
    path = tmp_path / "records.csv"
    write_records_csv(recs, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 21
    back = read_records_csv(path)
    for a, b in zip(recs, back):
        for k, v in _strip([a])[0].items():
            w = getattr(b, k)
            if isinstance(v, list) and v and isinstance(v[0], float):
                np.testing.assert_array_equal(np.array(v), np.array(w))
            elif isinstance(v, float) and math.isnan(v):
                assert math.isnan(w)
            else:
                assert v == w, k


def test_empty_records_write_header_only(tmp_path):
    path = tmp_path / "records.csv"
    write_records_csv([], path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("index,")
    assert read_records_csv(path) == []
    assert summarize([]) == {"n_subframes": 0}


def test_export_writes_all_outputs(tmp_path):
    cfg = small_config(seed=4, n_subframes=2)
    recs = run_scenario(cfg, keep_spectra=True)
    summary = export_results(recs, tmp_path / "out", cfg, spectra=True)
    out = tmp_path / "out"
    assert (out / "records.csv").exists()
    on_disk = json.loads((out / "summary.json").read_text())
    assert on_disk["metrics"] == summary["metrics"]
    assert on_disk["config"]["seed"] == 4
    for i in range(2):
        rows = (out / f"spectrum_{i}.csv").read_text().splitlines()
        assert rows[0] == "theta_deg,pseudo_power" and len(rows) > 100


def test_export_reports_unwritable_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        export_results([_rec(0, [0.0])], blocker / "sub")
