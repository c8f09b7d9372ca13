from causalcat.baselines.cnn_lstm import CnnLstmArch, CnnLstmClassifier, CnnLstmModel, train_cnn_lstm
from causalcat.baselines.core import (
    BaselineTrainConfig,
    TrainedClassifier,
    cross_entropy,
    softmax,
    softmax_cross_entropy_grad,
)
from causalcat.baselines.logreg import (
    LogRegClassifier,
    SoftmaxRegressionModel,
    TfidfFeaturizer,
    train_logreg,
)

__all__ = [
    "BaselineTrainConfig",
    "CnnLstmArch",
    "CnnLstmClassifier",
    "CnnLstmModel",
    "LogRegClassifier",
    "SoftmaxRegressionModel",
    "TfidfFeaturizer",
    "TrainedClassifier",
    "cross_entropy",
    "softmax",
    "softmax_cross_entropy_grad",
    "train_cnn_lstm",
    "train_logreg",
]
