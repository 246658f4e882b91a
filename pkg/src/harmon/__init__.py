"""Human activity classification from a chest-worn tri-axial accelerometer.

Raw millivolt traces are calibrated, smoothed, high-pass filtered and
combined into a body-acceleration magnitude; 128-sample windows give 22
FFT magnitude features, which a 22-7-7-1 tansig/purelin perceptron trained
by Levenberg-Marquardt maps to rest (0), walk (1) or run (2).
"""

from .ellip import IirFilter, design_highpass_elliptic
from .evaluation import (EvalReport, LabeledDataset, baseline_classify, classification_rate,
                         cross_validate, decode_class, make_folds, topology_sweep)
from .features import (NormStats, apply_normalizer, fft_magnitudes, fit_normalizer,
                       make_windows, select_features)
from .lm import TrainConfig, TrainLog
from .nn import MlpParams, Topology, forward, init_nguyen_widrow, jacobian, mse, tansig, train_lm
from .pipeline import Model, PipelineConfig, StreamClassifier, stream_classify
from .sigproc import (CalibrationParams, RawTrace, calibrate, derive_calibration, filter_apply,
                      magnitude, moving_average)
from .synth import SynthSpec, synth_trace, synthetic_dataset

__version__ = "0.1.0"
