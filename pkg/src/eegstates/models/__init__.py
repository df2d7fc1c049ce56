from .base import (
    DEFAULT_HYPERPARAMETERS,
    MLP_HIDDEN_SIZES,
    MLP_KINDS,
    ClassifierSpec,
    ModelKind,
    TrainedModel,
    accuracy,
    fit,
    load_model,
    predict,
    save_model,
)
from .mlp import MlpModel, evaluate, init_mlp, loss_and_grads, mlp_backward, mlp_forward
from .svm import LinearSvmModel, fit_linear_svm
from .trees import (
    GradientBoostModel,
    RandomForestModel,
    Tree,
    build_tree,
    fit_gradient_boost,
    fit_random_forest,
)

__all__ = [
    "DEFAULT_HYPERPARAMETERS",
    "MLP_HIDDEN_SIZES",
    "MLP_KINDS",
    "ClassifierSpec",
    "ModelKind",
    "TrainedModel",
    "accuracy",
    "fit",
    "load_model",
    "predict",
    "save_model",
    "MlpModel",
    "evaluate",
    "init_mlp",
    "loss_and_grads",
    "mlp_backward",
    "mlp_forward",
    "LinearSvmModel",
    "fit_linear_svm",
    "GradientBoostModel",
    "RandomForestModel",
    "Tree",
    "build_tree",
    "fit_gradient_boost",
    "fit_random_forest",
]
