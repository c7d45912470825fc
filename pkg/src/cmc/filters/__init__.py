from .distributed import DistributedSetup, cmc_dpf, gaussian_dpf
from .models import (
    BearingsOnlyTracking,
    CoordinatedTurn,
    LinearGaussian,
    ScalarAbsLog,
    StateSpaceModel,
)
from .particle import FilterResult, KalmanResult, bpf, cpf, gpf, igpf, kalman_filter, mse

__all__ = [
    "BearingsOnlyTracking",
    "CoordinatedTurn",
    "DistributedSetup",
    "FilterResult",
    "KalmanResult",
    "LinearGaussian",
    "ScalarAbsLog",
    "StateSpaceModel",
    "bpf",
    "cmc_dpf",
    "cpf",
    "gaussian_dpf",
    "gpf",
    "igpf",
    "kalman_filter",
    "mse",
]
