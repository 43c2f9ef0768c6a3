"""Real-time bag-of-visual-words video frame classification.

Per-frame path: packed YUV 4:2:2 capture -> BT.601 RGB -> ROI gray crop ->
dense SIFT on a regular grid at two scales -> vocabulary-tree quantization ->
scaled bag-of-words histogram -> probability-calibrated linear SVM ->
annotated frame, all inside a per-frame latency budget.
"""

from .dsift import DescriptorSet, DsiftParams, extract_dsift, grid_count, to_gray
from .errors import ConfigError, FormatError
from .features import (
    BowHistogram,
    ScalerParams,
    apply_scaler,
    build_histogram,
    fit_scaler,
    load_scaler,
    save_scaler,
)
from .ingest import (
    FrameSource,
    ImageDirectorySource,
    RawFrame,
    RawStreamFileSource,
    RgbFrame,
    SyntheticSource,
    decode_yuv422_to_rgb,
    encode_rgb_to_yuv422,
    open_source,
    synth_texture_frame,
    write_raw_stream,
)
from .pipeline import (
    ArtifactBundle,
    BenchReport,
    FrameResult,
    Pipeline,
    PipelineConfig,
    annotate_frame,
    banner_text,
    format_percent,
    format_probabilities,
    run_bench,
    smooth_probabilities,
)
from .roi import RoiSpec
from .svm import (
    BinarySvm,
    ClassProbabilities,
    CvReport,
    SvmModel,
    couple_pairwise,
    cross_validate,
    fit_platt,
    load_model,
    predict_proba,
    save_model,
    train_binary,
    train_model,
)
from .train import TrainConfig, classify_patch, synth_dataset, train_from_directory
from .vocab import (
    VocabTrainConfig,
    VocabularyTree,
    load_tree,
    lloyd_kmeans,
    quantize,
    quantize_batch,
    save_tree,
    train_tree,
)

__version__ = "0.1.0"
