"""Full-duplex massive-MIMO ISAC simulator: multi-user downlink plus multi-target tracking."""

from .arrays import (
    SPEED_OF_LIGHT,
    AnalogBeamformer,
    ArrayGeometry,
    BeamCodebook,
    assemble_analog,
    dft_codebook,
    steering_vector,
)
from .cancellation import CancellerPair, design_analog_canceller, design_digital_canceller, residual_si_power
from .channels import (
    DlChannel,
    SiChannel,
    TargetState,
    build_dl_channel,
    build_si_channel,
    evolve_targets,
    radar_response,
)
from .config import ScenarioConfig, load_config
from .errors import ConfigError, EstimationFailure, InvalidInputError, RankDeficiencyError
from .estimation import associate_and_score, music_doa, range_estimate, sample_covariance
from .optimizer import (
    BeamformerSet,
    OptimizationOutcome,
    RadarPrior,
    bd_precoder,
    dl_snr_sum,
    optimize_subframe,
    radar_snr,
    select_rx_analog,
    select_tx_analog,
)
from .runner import SubframeRecord, dl_sum_rate, export_results, rmse_over_run, run_scenario
from .waveform import (
    NoiseSpec,
    Stage,
    SubframeGrid,
    bb_combine,
    check_saturation,
    generate_symbols,
    radar_receive,
    tx_precode,
    user_receive,
)

__version__ = "0.1.0"
