from .data import AugmentConfig, Dataset, affine_resample, augment, synth_dataset
from .optim import LR_PRESETS, Nadam, NadamState, nadam_step
from .simulation import SimConfig, loss_trajectory, simulate_scores, sinusoid_curves
from .training import TrainResult, evaluate_loss, mean_foreground_dice, train

__all__ = [
    "AugmentConfig", "Dataset", "affine_resample", "augment", "synth_dataset",
    "LR_PRESETS", "Nadam", "NadamState", "nadam_step",
    "SimConfig", "loss_trajectory", "simulate_scores", "sinusoid_curves",
    "TrainResult", "evaluate_loss", "mean_foreground_dice", "train",
]
