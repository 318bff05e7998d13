"""Trainable 3D Gabor kernels, correlation-based segmentation losses and a
small numpy autodiff stack to train them."""
from .functional import conv3d, group_norm, softmax_channel, spatial_dropout, upsample3d
from .gabor import (CoordGrid, GaborDLParams, GaborFullParams, KernelBank, coordinate_grid,
                    gabor_dl, gabor_full, init_gabor, materialize_bank, rotated_x)
from .losses import (LossConfig, PredictionBatch, cross_entropy, dice_loss, hard_dice_metric,
                     matthews_corrcoef, pcc_loss, pearson_r)
from .segnet import (NetworkConfig, ParamReport, SegNet, build_network, count_params,
                     predict_labels)
from .tensor import Tensor, finite_diff_grad, no_grad

__version__ = "0.1.0"

__all__ = [
    "conv3d", "group_norm", "softmax_channel", "spatial_dropout", "upsample3d",
    "CoordGrid", "GaborDLParams", "GaborFullParams", "KernelBank", "coordinate_grid",
    "gabor_dl", "gabor_full", "init_gabor", "materialize_bank", "rotated_x",
    "LossConfig", "PredictionBatch", "cross_entropy", "dice_loss", "hard_dice_metric",
    "matthews_corrcoef", "pcc_loss", "pearson_r",
    "NetworkConfig", "ParamReport", "SegNet", "build_network", "count_params", "predict_labels",
    "Tensor", "finite_diff_grad", "no_grad",
]
