"""Class-specific mean autoencoder: hidden features are pulled toward
their own class's mean feature while reconstruction is learned, then a
small feed-forward head classifies the stacked encodings."""

from .autoencoder import (
    ClassMeans,
    CsmaModel,
    LayerWeights,
    TrainConfig,
    ae_gradients,
    ae_loss,
    class_mean,
    csma_gradients,
    csma_loss,
    decode,
    encode,
    extract_features,
    train_denoising_baseline,
    train_plain_baseline,
    train_single_layer,
    train_stacked,
)
from .classifier import (
    ClassifierModel,
    classifier_gradients,
    classifier_loss,
    predict_labels,
    predict_score,
    train_classifier,
)
from .config import (
    ExperimentConfig,
    build_manifest,
    config_from_sources,
    read_config_file,
    write_manifest,
)
from .data import (
    LabeledDataset,
    PerturbationSpec,
    class_matrices,
    dataset_fingerprint,
    gaussian_kernel,
    load_csv,
    load_idx,
    perturb,
    save_csv,
    split_balanced,
    synth_two_class,
)
from .errors import (
    ConsistencyError,
    CsmaError,
    DegenerateLabelsError,
    DivergenceError,
    EmptyClassError,
    EmptyInputError,
    FormatError,
    InsufficientDataError,
    MissingShapeError,
    ParameterError,
    ShapeError,
    UndefinedRateError,
    ValidationError,
)
from .metrics import (
    EvalReport,
    McNemarResult,
    evaluate,
    format_pct,
    mcnemar_test,
    minor_misclassification_rate,
    roc_auc,
    roc_points,
    write_report,
    write_roc_csv,
)
from .persist import load_model, save_model

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
