"""Smartphone-based reflectance transformation imaging toolkit."""

from .core import (
    CameraIntrinsics,
    ImagePlane,
    LightDirection,
    RgbImage,
    build_intrinsics_from_exif,
    rgb_to_yuv,
    yuv_to_rgb,
)
from .errors import (
    AmbiguousMarkerError,
    DegenerateGeometryError,
    DegenerateImageError,
    DivergenceError,
    EmptyMlicError,
    MarkerError,
    MarkerNotFoundError,
    ModelFormatError,
    RtiError,
    SplitError,
    SyncError,
)
from .evaluation import (
    EvalReport,
    PipelineRunConfig,
    PtmModel,
    SweepReport,
    evaluate,
    psnr,
    ptm_fit,
    ptm_relight,
    run_pipeline,
    ssim,
    sweep,
)
from .marker import (
    Contour,
    MarkerDetection,
    detect_marker,
    extract_contours,
    otsu_threshold,
    rdp_simplify,
)
from .mlic import (
    MLIC,
    LightSplit,
    build_mlic,
    load_mlic,
    rectify_crop,
    save_mlic,
    split_lights,
)
from .neural import (
    FourierMatrix,
    MlpWeights,
    TrainConfig,
    fourier_embed,
    mlp_backward,
    mlp_forward,
    train,
)
from .pca import KGrid, PcaBasis, pca_fit, pca_project, pca_reconstruct
from .pose import (
    Homography,
    Pose,
    estimate_homography,
    factor_homography,
    light_direction,
    marker_light_direction,
)
from .relight import RelightModel, load_model, relight_image, relight_pixel, save_model
from .sync import AudioTrack, FrameIndexMap, audio_offset, pair_frames
from .synthgen import (
    DomeTrajectory,
    OrbitTrajectory,
    SyntheticScene,
    bump_scene,
    hemisphere_scene,
    synth_mlic,
    synth_render,
)

__version__ = "0.1.0"
