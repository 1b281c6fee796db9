"""Hyperspectral image denoising with an attention-based residual network."""

from .cube import (
    CubeFormatError,
    HsiCube,
    Region,
    SplitSpec,
    default_split,
    load_cube,
    normalize_per_band,
    patch_grid,
    save_cube,
    spectral_window,
    spectral_window_indices,
)
from .inference import denoise_cube
from .metrics import (
    QualityReport,
    RunStats,
    evaluate,
    format_mean_std,
    psnr_band,
    report_csv,
    report_table,
    ssim_band,
)
from .model import (
    AdrnModel,
    ChannelAttentionBlock,
    CheckpointError,
    FeatureExtractionBlock,
    ModelConfig,
    desk_model_config,
    init_params,
    load_checkpoint,
    reconstruct,
    save_checkpoint,
)
from .noise import (
    NoiseSpec,
    apply_noise,
    band_sigma_profile,
    band_sigmas,
    load_noise_spec,
    save_noise_spec,
)
from .synthetic import make_synthetic_cube
from .training import (
    PatchDataset,
    TrainConfig,
    TrainingDivergedError,
    TrainingSample,
    build_dataset,
    desk_train_config,
    schedule_lr,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdrnModel",
    "ChannelAttentionBlock",
    "CheckpointError",
    "CubeFormatError",
    "FeatureExtractionBlock",
    "HsiCube",
    "ModelConfig",
    "NoiseSpec",
    "PatchDataset",
    "QualityReport",
    "Region",
    "RunStats",
    "SplitSpec",
    "TrainConfig",
    "TrainingDivergedError",
    "TrainingSample",
    "apply_noise",
    "band_sigma_profile",
    "band_sigmas",
    "build_dataset",
    "default_split",
    "denoise_cube",
    "desk_model_config",
    "desk_train_config",
    "evaluate",
    "format_mean_std",
    "init_params",
    "load_checkpoint",
    "load_cube",
    "load_noise_spec",
    "make_synthetic_cube",
    "normalize_per_band",
    "patch_grid",
    "psnr_band",
    "reconstruct",
    "report_csv",
    "report_table",
    "save_checkpoint",
    "save_cube",
    "save_noise_spec",
    "schedule_lr",
    "spectral_window",
    "spectral_window_indices",
    "ssim_band",
    "train",
]
