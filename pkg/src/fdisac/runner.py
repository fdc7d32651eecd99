"""Subframe-by-subframe FD ISAC protocol: estimate, optimize, transmit, receive, score."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .arrays import SPEED_OF_LIGHT, ArrayGeometry, dft_codebook
from .channels import (
    SiChannel,
    TargetState,
    build_dl_channel,
    build_si_channel,
    evolve_targets,
    pathloss_magnitude,
    random_phase,
    reflection_magnitude,
)
from .config import ScenarioConfig
from .errors import InvalidInputError
from .estimation import associate_and_score, music_doa, range_estimate, sample_covariance
from .optimizer import BeamformerSet, RadarPrior, optimize_subframe, radar_snr
from .cancellation import residual_si_power
from .waveform import NoiseSpec, SubframeGrid, Stage, bb_combine, generate_symbols, radar_receive, tx_precode

log = logging.getLogger(__name__)


@dataclass
class SubframeRecord:
    """Per-subframe outputs. Angles are in degrees, ranges in metres."""

    index: int
    true_doas_deg: list
    est_doas_deg: list
    true_ranges_m: list
    est_ranges_m: list
    range_bins: list
    doa_errors_deg: list
    range_errors_m: list
    doa_rmse_deg: float
    user_rates: list
    sum_rate: float
    radar_snr: float
    residual_si_dbm: float
    alpha: int
    saturation_ok: bool
    saturation_flags: list
    fallback_used: bool
    spectrum_degenerate: bool
    spectrum: Optional[tuple] = field(default=None, repr=False, compare=False)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------
def dl_user_rates(h_dl: Sequence[np.ndarray], bf: BeamformerSet, sigma_u2: float) -> list[float]:
    """Per-user log-det rate with inter-user interference treated as noise."""
    t = bf.precoder
    n_users = len(h_dl)
    n_streams = t.shape[1] // n_users
    rates = []
    for u, h in enumerate(h_dl):
        cols = [t[:, j * n_streams:(j + 1) * n_streams] for j in range(n_users)]
        q = sigma_u2 * np.eye(h.shape[0], dtype=complex)
        for j in range(n_users):
            if j != u:
                ht = h @ cols[j]
                q = q + ht @ ht.conj().T
        hs = h @ cols[u]
        m = np.eye(h.shape[0]) + np.linalg.solve(q, hs @ hs.conj().T)
        _, logdet = np.linalg.slogdet(m)
        rates.append(max(float(logdet / np.log(2.0)), 0.0))
    return rates


def dl_sum_rate(h_dl: Sequence[np.ndarray], bf: BeamformerSet, sigma_u2: float) -> float:
    return float(sum(dl_user_rates(h_dl, bf, sigma_u2)))


def rmse_over_run(records: Sequence[SubframeRecord], window: Optional[slice] = None) -> float:
    """DoA RMSE in degrees over every target of every record in ``window``."""
    chosen = list(records)[window] if window is not None else list(records)
    errs = [e for r in chosen for e in r.doa_errors_deg]
    if not errs:
        raise InvalidInputError("empty window")
    return float(np.sqrt(np.mean(np.square(errs))))


# ---------------------------------------------------------------------------
# scene setup
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class System:
    """Geometry, codebooks and fixed channels derived from a config."""

    config: ScenarioConfig
    tx_geom: ArrayGeometry
    rx_geom: ArrayGeometry
    user_geom: ArrayGeometry
    tx_codebook: object
    rx_codebook: object
    h_si: object
    noise: NoiseSpec

    @classmethod
    def build(cls, cfg: ScenarioConfig) -> "System":
        wavelength = SPEED_OF_LIGHT / cfg.carrier_hz
        spacing = cfg.element_spacing_wavelengths * wavelength
        tx = ArrayGeometry(cfg.n_tx, spacing, wavelength)
        rx = ArrayGeometry(cfg.n_rx, spacing, wavelength)
        user = ArrayGeometry(cfg.n_user_antennas, spacing, wavelength)
        si = build_si_channel(tx, rx, cfg.si_separation)
        if cfg.si_isolation_db:
            # extra passive isolation on top of the normalized LoS coupling
            si = SiChannel(si.matrix * 10.0 ** (-cfg.si_isolation_db / 20.0), si.tx_rx_separation)
        return cls(
            cfg, tx, rx, user,
            dft_codebook(cfg.codebook_bits, cfg.n_tx_sub, cfg.element_spacing_wavelengths),
            dft_codebook(cfg.codebook_bits, cfg.n_rx_sub, cfg.element_spacing_wavelengths),
            si,
            NoiseSpec(cfg.noise_mw, cfg.noise_mw),
        )


def draw_targets(cfg: ScenarioConfig, wavelength: float, rng: np.random.Generator) -> list[TargetState]:
    lo, hi = np.deg2rad(cfg.doa_sector_deg)
    doas = rng.uniform(lo, hi, cfg.n_targets)
    ranges = rng.uniform(cfg.min_range, cfg.max_range, cfg.n_targets)
    dl_idx = sorted(int(i) for i in rng.choice(cfg.n_targets, cfg.n_users, replace=False))
    targets = []
    for k in range(cfg.n_targets):
        if cfg.reflection_model == "radar":
            magnitude = reflection_magnitude(ranges[k], wavelength, cfg.reflectivity)
        else:
            magnitude = 10.0 ** (cfg.fixed_reflection_db / 20.0)
        alpha = magnitude * random_phase(rng)
        if k in dl_idx:
            targets.append(TargetState(
                float(doas[k]), float(ranges[k]), complex(alpha), True, dl_idx.index(k),
                float(rng.uniform(lo, hi)), complex(pathloss_magnitude(cfg.pathloss_db) * random_phase(rng))))
        else:
            targets.append(TargetState(float(doas[k]), float(ranges[k]), complex(alpha)))
    return targets


def _advance(cfg: ScenarioConfig, targets, rng):
    if cfg.doa_step_deg is not None:
        # fixed angular step for every target, independent of range
        step = np.deg2rad(cfg.doa_step_deg)
        velocities = [t.range * np.tan(step) / cfg.subframe_duration for t in targets]
        return [evolve_targets([t], v, cfg.subframe_duration, rng)[0] for t, v in zip(targets, velocities)]
    return evolve_targets(targets, cfg.velocity, cfg.subframe_duration, rng)


def _user_channels(sysm: System, targets) -> list[np.ndarray]:
    dl = sorted((t for t in targets if t.is_dl_scatterer), key=lambda t: t.dl_user_index)
    return [build_dl_channel(t, sysm.user_geom, sysm.tx_geom).matrix for t in dl]


def _dbm(power_mw: float) -> float:
    return 10.0 * math.log10(power_mw) if power_mw > 0 else -math.inf


# ---------------------------------------------------------------------------
# protocol loop
# ---------------------------------------------------------------------------
def run_scenario(cfg: ScenarioConfig, keep_spectra: bool = False) -> list[SubframeRecord]:
    """Run ``cfg.n_subframes`` subframes of the configured protocol."""
    cfg.validate()
    sysm = System.build(cfg)
    root = np.random.SeedSequence(cfg.seed)
    scene_ss, *frame_ss = root.spawn(cfg.n_subframes + 1)
    scene_rng = np.random.default_rng(scene_ss)

    fd = cfg.mode == "fd_isac"
    h_si = sysm.h_si if fd else None
    h_si_matrix = h_si.matrix if h_si is not None else None
    q_sense = cfg.n_symbols
    dl_fraction = 1.0
    if cfg.mode == "hd_isac":
        dl_fraction = cfg.hd_dl_fraction
        q_sense = max(1, cfg.n_symbols - int(round(cfg.hd_dl_fraction * cfg.n_symbols)))

    lo, hi = cfg.doa_sector_deg
    search = np.deg2rad((lo - cfg.search_margin_deg, hi + cfg.search_margin_deg))
    grid_step = np.deg2rad(cfg.grid_step_deg)

    targets = draw_targets(cfg, sysm.tx_geom.wavelength, scene_rng)
    prev_targets = None
    prev_estimates = None
    prev_set: Optional[BeamformerSet] = None
    records = []

    for i in range(cfg.n_subframes):
        (evo_ss, prior_ss, sym_ss, noise_ss, canc_ss) = frame_ss[i].spawn(5)
        if i > 0:
            prev_targets = targets
            targets = _advance(cfg, targets, np.random.default_rng(evo_ss))

        if prev_estimates is None:
            err = np.deg2rad(cfg.initial_prior_error_deg)
            prior_rng = np.random.default_rng(prior_ss)
            prior_doas = [t.doa + prior_rng.uniform(-err, err) for t in targets]
        else:
            prior_doas = list(prev_estimates)
        prior = RadarPrior.from_doas(prior_doas, sysm.tx_geom, sysm.rx_geom)

        h_dl_now = _user_channels(sysm, targets)
        h_dl_est = _user_channels(sysm, prev_targets) if prev_targets is not None else h_dl_now

        outcome = optimize_subframe(
            h_si_matrix, h_dl_est, cfg.n_taps, cfg.tx_power_mw, cfg.rho_b_mw, prior,
            sysm.tx_codebook, sysm.rx_codebook, cfg.n_rf_tx, cfg.n_rf_rx,
            distinct_beams=cfg.distinct_beams, canceller_error_db=cfg.canceller_error_db,
            rng=np.random.default_rng(canc_ss),
        )
        bf = outcome.beamformers
        fallback = False
        if not outcome.success and cfg.saturation_fallback == "previous" and prev_set is not None:
            bf = prev_set
            fallback = True

        rates = [dl_fraction * r for r in dl_user_rates(h_dl_now, bf, cfg.noise_mw)]
        c, d = bf.cancellers.analog, bf.cancellers.digital
        if h_si_matrix is not None:
            true_eff = bf.w_rf.assembled.conj().T @ h_si_matrix @ bf.v_rf.assembled
        else:
            true_eff = np.zeros_like(c)
        resid_total, rows = residual_si_power(true_eff, c, d, bf.v_bb)
        sat_flags = (rows <= cfg.rho_b_mw).tolist()

        est_doas = np.array(prior_doas)
        est_ranges = np.full(cfg.n_targets, np.nan)
        bins = [-1] * cfg.n_targets
        degenerate = False
        spectrum = None
        if cfg.simulate_radar:
            sym = generate_symbols(cfg.n_subcarriers, q_sense, cfg.n_users, cfg.n_user_antennas,
                                   np.random.default_rng(sym_ss), n_rf=cfg.n_rf_tx)
            tx = tx_precode(sym, bf.v_rf, bf.v_bb)
            rx = radar_receive(tx, targets, h_si, sysm.noise, np.random.default_rng(noise_ss),
                               delta_f=cfg.subcarrier_spacing, tx_geom=sysm.tx_geom, rx_geom=sysm.rx_geom)
            bb = bb_combine(rx, bf.w_rf, c, d, bf.v_bb, sym)
            cov = sample_covariance(bb)
            est_doas, spec = music_doa(cov, cfg.n_targets, bf.w_rf, sysm.rx_geom, grid_step, search,
                                       cfg.music_normalized)
            degenerate = spec.degenerate
            if keep_spectra:
                spectrum = (np.rad2deg(spec.thetas), spec.pseudo_power)
            for k, theta in enumerate(est_doas):
                bins[k], _, est_ranges[k] = range_estimate(
                    bb, bf.w_rf, tx, float(theta), cfg.subcarrier_spacing, sysm.tx_geom, sysm.rx_geom)

        score = associate_and_score(est_doas, est_ranges, targets)
        perm = score.assignment
        records.append(SubframeRecord(
            index=i,
            true_doas_deg=[float(np.rad2deg(t.doa)) for t in targets],
            est_doas_deg=[float(np.rad2deg(est_doas[perm[k]])) for k in range(cfg.n_targets)],
            true_ranges_m=[float(t.range) for t in targets],
            est_ranges_m=[float(est_ranges[perm[k]]) for k in range(cfg.n_targets)],
            range_bins=[int(bins[perm[k]]) for k in range(cfg.n_targets)],
            doa_errors_deg=[float(np.rad2deg(e)) for e in score.doa_errors],
            range_errors_m=[float(e) for e in score.range_errors],
            doa_rmse_deg=score.rmse_deg,
            user_rates=[float(r) for r in rates],
            sum_rate=float(sum(rates)),
            radar_snr=float(radar_snr(prior, bf, cfg.noise_mw)),
            residual_si_dbm=_dbm(resid_total),
            alpha=int(bf.effective_streams),
            saturation_ok=bool(outcome.success),
            saturation_flags=[bool(f) for f in sat_flags],
            fallback_used=fallback,
            spectrum_degenerate=bool(degenerate),
            spectrum=spectrum,
        ))
        if outcome.success:
            prev_set = bf
        prev_estimates = est_doas
    return records


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------
_LIST_FIELDS = {f.name for f in fields(SubframeRecord)
                if f.name not in ("spectrum",) and f.type in ("list", list)}
_CSV_FIELDS = [f.name for f in fields(SubframeRecord) if f.name != "spectrum"]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _record_row(rec: SubframeRecord) -> list[str]:
    row = []
    for name in _CSV_FIELDS:
        value = getattr(rec, name)
        if name in _LIST_FIELDS:
            row.append(";".join(_fmt(v) for v in value))
        else:
            row.append(_fmt(value))
    return row


def write_records_csv(records: Sequence[SubframeRecord], path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_CSV_FIELDS)
            for rec in records:
                writer.writerow(_record_row(rec))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


_INT_LISTS = {"range_bins"}
_BOOL_LISTS = {"saturation_flags"}
_BOOLS = {"saturation_ok", "fallback_used", "spectrum_degenerate"}


def read_records_csv(path) -> list[SubframeRecord]:
    out = []
    with Path(path).open(encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            kwargs = {}
            for name in _CSV_FIELDS:
                raw = row[name]
                if name in _LIST_FIELDS:
                    parts = raw.split(";") if raw else []
                    if name in _INT_LISTS:
                        kwargs[name] = [int(p) for p in parts]
                    elif name in _BOOL_LISTS:
                        kwargs[name] = [p == "1" for p in parts]
                    else:
                        kwargs[name] = [float(p) for p in parts]
                elif name in _BOOLS:
                    kwargs[name] = raw == "1"
                elif name in ("index", "alpha"):
                    kwargs[name] = int(raw)
                else:
                    kwargs[name] = float(raw)
            out.append(SubframeRecord(**kwargs))
    return out


def _finite(x):
    return x if isinstance(x, (int, float)) and math.isfinite(x) else None


def summarize(records: Sequence[SubframeRecord]) -> dict:
    if not records:
        return {"n_subframes": 0}
    sensed = [r for r in records if not all(math.isnan(x) for x in r.est_ranges_m)]
    return {
        "n_subframes": len(records),
        "doa_rmse_deg": _finite(rmse_over_run(records)),
        "mean_sum_rate": _finite(float(np.mean([r.sum_rate for r in records]))),
        "mean_radar_snr": _finite(float(np.mean([r.radar_snr for r in records]))),
        "saturation_success_fraction": float(np.mean([r.saturation_ok for r in records])),
        "fallback_fraction": float(np.mean([r.fallback_used for r in records])),
        "mean_alpha": float(np.mean([r.alpha for r in records])),
        "max_abs_range_error_m": _finite(float(max(abs(e) for r in sensed for e in r.range_errors_m)))
        if sensed else None,
    }


def export_results(records: Sequence[SubframeRecord], out_dir, config: Optional[ScenarioConfig] = None,
                   spectra: bool = False) -> dict:
    """Write ``records.csv``, ``summary.json`` and optionally ``spectrum_<i>.csv``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    write_records_csv(records, out_dir / "records.csv")
    summary = {"config": config.to_dict() if config else None, "metrics": summarize(records)}
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if spectra:
        for rec in records:
            if rec.spectrum is None:
                continue
            thetas, power = rec.spectrum
            with (out_dir / f"spectrum_{rec.index}.csv").open("w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["theta_deg", "pseudo_power"])
                for t, p in zip(thetas, power):
                    w.writerow([repr(float(t)), repr(float(p))])
    return summary
