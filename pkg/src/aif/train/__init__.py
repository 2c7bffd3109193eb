from .aifb import build_vocabulary, train_aifb
from .aifd import finetune_decoder, pretrain_autoencoder, train_aifd, train_predictor
from .classifiers import accuracy_weights, extract_features, fit_ensemble_weights, train_ensemble
from .common import LossLog, read_manifest, write_manifest

__all__ = [
    "build_vocabulary",
    "train_aifb",
    "finetune_decoder",
    "pretrain_autoencoder",
    "train_aifd",
    "train_predictor",
    "accuracy_weights",
    "extract_features",
    "fit_ensemble_weights",
    "train_ensemble",
    "LossLog",
    "read_manifest",
    "write_manifest",
]
