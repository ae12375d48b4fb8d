"""Multi-objective spectral-mapping speech enhancement toolkit.

A feed-forward network maps spliced noisy log-power spectra (optionally
with cepstral features and a static noise estimate) to clean spectral
targets under a weighted multi-head loss; an estimated time-frequency mask
then gates a per-bin blend of the noisy and estimated spectra before the
waveform is rebuilt with the noisy phase. Includes corpus mixing at target
SNRs, deterministic training, and segmental-SNR / intelligibility /
log-spectral-distortion evaluation.
"""

from .config import RunConfig
from .container import read_features, write_features
from .corpus import (
    Batch,
    MixSpec,
    NormStats,
    TrainingData,
    Variant,
    assemble_batches,
    build_corpus,
    build_input_rows,
    denormalize,
    estimate_noise_aware_vector,
    fit_norm_stats,
    input_dim,
    load_training_data,
    mix_at_snr,
    normalize,
    read_corpus_stats,
    read_manifest,
    read_norm_stats,
    write_manifest,
    write_norm_stats,
)
from .dsp import (
    Spectrogram,
    StftConfig,
    Waveform,
    dct_matrix,
    frame_count,
    istft,
    magnitude_phase,
    combine_magnitude_phase,
    stft,
    window,
)
from .enhance import (
    BranchCounts,
    EnhanceResult,
    PostProcessConfig,
    enhance_features,
    enhance_waveform,
    oracle_post_process,
    post_process,
    reconstruct,
    write_diagnostics,
)
from .errors import (
    AudioFormatError,
    ConfigError,
    FeatureKindError,
    MetricError,
    ScalingError,
    SpecJointError,
    TrainingDivergedError,
)
from .features import (
    FeatureKind,
    FeatureMatrix,
    IbmConfig,
    MelBank,
    compute_ibm,
    hz_to_mel,
    lps,
    lps_to_magnitude,
    mel_bank,
    mel_to_hz,
    mfcc,
    splice,
)
from .metrics import (
    DistortionProfile,
    MetricReport,
    distortion_profile,
    evaluate_condition,
    profile_csv,
    report_csv,
    ssnr,
    stoi,
)
from .network import (
    EpochStats,
    HeadSpec,
    LossReport,
    Model,
    TrainConfig,
    backward,
    batch_loss,
    init_model,
    load_model,
    loss_and_output_grad,
    predict,
    save_model,
    sgd_step,
    train,
)
from .wavio import read_wav, write_wav

__version__ = "0.1.0"

__all__ = [
    "AudioFormatError",
    "Batch",
    "BranchCounts",
    "ConfigError",
    "DistortionProfile",
    "EnhanceResult",
    "EpochStats",
    "FeatureKind",
    "FeatureKindError",
    "FeatureMatrix",
    "HeadSpec",
    "IbmConfig",
    "LossReport",
    "MelBank",
    "MetricError",
    "MetricReport",
    "MixSpec",
    "Model",
    "NormStats",
    "PostProcessConfig",
    "RunConfig",
    "ScalingError",
    "SpecJointError",
    "Spectrogram",
    "StftConfig",
    "TrainConfig",
    "TrainingData",
    "TrainingDivergedError",
    "Variant",
    "Waveform",
    "assemble_batches",
    "backward",
    "batch_loss",
    "build_corpus",
    "build_input_rows",
    "combine_magnitude_phase",
    "compute_ibm",
    "dct_matrix",
    "denormalize",
    "distortion_profile",
    "enhance_features",
    "enhance_waveform",
    "estimate_noise_aware_vector",
    "evaluate_condition",
    "fit_norm_stats",
    "frame_count",
    "hz_to_mel",
    "init_model",
    "input_dim",
    "istft",
    "load_model",
    "load_training_data",
    "loss_and_output_grad",
    "lps",
    "lps_to_magnitude",
    "magnitude_phase",
    "mel_bank",
    "mel_to_hz",
    "mfcc",
    "mix_at_snr",
    "normalize",
    "oracle_post_process",
    "post_process",
    "predict",
    "profile_csv",
    "read_corpus_stats",
    "read_features",
    "read_manifest",
    "read_norm_stats",
    "read_wav",
    "reconstruct",
    "report_csv",
    "save_model",
    "sgd_step",
    "splice",
    "ssnr",
    "stft",
    "stoi",
    "train",
    "window",
    "write_diagnostics",
    "write_features",
    "write_manifest",
    "write_norm_stats",
    "write_wav",
]
