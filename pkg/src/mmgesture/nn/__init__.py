from .layers import (BatchNorm2d, Conv2d, Flatten, Layer, Linear, MaxPool2d,
                     Parameter, ReLU, ResidualBlock, Sequential,
                     softmax_cross_entropy)
from .network import BranchNet, GestureNet
from .training import (Adam, ConfusionMatrix, TrainConfig, evaluate,
                       load_checkpoint, read_history_csv, save_checkpoint,
                       train, write_history_csv)

__all__ = [
    "Adam", "BatchNorm2d", "BranchNet", "ConfusionMatrix", "Conv2d", "Flatten",
    "GestureNet", "Layer", "Linear", "MaxPool2d", "Parameter", "ReLU",
    "ResidualBlock", "Sequential", "TrainConfig", "evaluate",
    "load_checkpoint", "read_history_csv", "save_checkpoint",
    "softmax_cross_entropy", "train", "write_history_csv",
]
