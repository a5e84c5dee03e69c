"""Mixed H-/H-infinity fault detection filters for quasi-linear Ito systems."""

from .catalog import benchmark_plant
from .errors import Infeasible, MixFdfError, NumericalBlowup
from .hji import HjiParams, QuadraticStorage, eval_hinf_hji, eval_hminus_hji, eval_xvf_hjis, scan
from .model import AugmentedModel, FilterRealization, NonlinearPlant, QuasiLinearModel, augment
from .simulate import (SignalSpec, SimConfig, ThresholdDetector, calibrate_threshold, detect,
                       residual_evaluation, simulate)
from .synthesis import MixedFdfSynthesizer, SynthesisSpec, check_ari, check_analysis, synthesize

__version__ = "0.1.0"
