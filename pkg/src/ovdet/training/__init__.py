from .config import TrainConfig, default_learning_rates, default_milestones
from .evaluate import (
    EvalReport,
    average_precision,
    concept_list_input,
    eleven_point_ap,
    evaluate,
    plot_precision_recall,
    predict,
    random_box_predictions,
    score_detections,
)
from .train import (
    BatchBuilder,
    TrainData,
    TrainResult,
    batch_loss,
    build_model,
    build_optimizer,
    child_seed,
    load_training_data,
    lr_at_epoch,
    make_batches,
    pseudo_label_records,
    stage_hashes,
    train,
)

__all__ = [
    "BatchBuilder",
    "EvalReport",
    "TrainConfig",
    "TrainData",
    "TrainResult",
    "average_precision",
    "batch_loss",
    "build_model",
    "build_optimizer",
    "child_seed",
    "concept_list_input",
    "default_learning_rates",
    "default_milestones",
    "eleven_point_ap",
    "evaluate",
    "load_training_data",
    "lr_at_epoch",
    "make_batches",
    "plot_precision_recall",
    "predict",
    "pseudo_label_records",
    "random_box_predictions",
    "score_detections",
    "stage_hashes",
    "train",
]
