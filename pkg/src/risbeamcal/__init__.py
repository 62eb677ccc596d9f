"""Beam-pattern modeling and calibration for phase-controlled reflecting
arrays, with pseudo-true localization-bias analysis."""

from .array_core import (
    AngleGrid,
    Codebook,
    SteeringMatrix,
    build_codebook,
    ideal_codeword,
    make_angle_grid,
    quantize_codeword,
    steering_matrix,
    steering_vector,
)
from .beam_models import (
    BeamPatternSet,
    CorrectionCurve,
    CouplingSet,
    PerturbedCodebook,
    eval_ci,
    eval_ideal,
    eval_mcm,
    eval_nc,
    loss_l1,
    metric_weights,
    toeplitz_mcm,
)
from .calibrators import (
    CalibrationReport,
    CiOptions,
    IllPosedError,
    calibrate_ci,
    calibrate_mcm_direct,
    calibrate_mcm_twostep,
    calibrate_nc,
    ci_stage_gamma,
    ci_stage_w,
    run_all_models,
    spectral_gamma_init,
)
from .isac_channel import (
    ChannelParams,
    CiBeamSource,
    IdealBeamSource,
    McmBeamSource,
    NcBeamSource,
    PatternBeamSource,
    SceneGeometry,
    SignalConfig,
    UeState,
    beam_schedule,
    beam_source_from_report,
    channel_params,
    delay_response,
    geo_params,
    noise_free_signal,
    noise_power,
    path_gains,
    simulate_received,
)
from .mismatch import (
    AlbGrid,
    PseudoTrueOptions,
    PseudoTrueResult,
    alb,
    alb_grid,
    cdf,
    locate,
    pseudo_true,
)
from .scene import SceneConfig, default_scene_dict, load_scene_config, scene_from_dict
from .truth_forge import (
    ArrayConfig,
    ImpairmentConfig,
    TruthRecord,
    load_patterns,
    save_patterns,
    synth_ground_truth,
)

__version__ = "0.1.0"
