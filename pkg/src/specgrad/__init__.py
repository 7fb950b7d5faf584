"""STFT amplitude/phase spectral losses with analytic waveform gradients,
and gradient-descent waveform inversion built on them."""

from .errors import (
    ConfigError,
    DegenerateInputError,
    DimensionError,
    DivergenceError,
    EvaluationError,
    FormatError,
    SpecgradError,
    UnsupportedFormatError,
)
from .gradcheck import FdReport, check, check_gradient, fd_gradient
from .inversion import (
    Adam,
    AdamState,
    GaussianNoise,
    InversionSettings,
    InversionTrace,
    Provided,
    Sgd,
    Zeros,
    adam_step,
    invert,
    snr,
    synthetic_target,
)
from .losses import (
    AlphaScheme,
    LossBreakdown,
    LossWeights,
    amplitude_grad,
    amplitude_loss,
    bessel_i0,
    combined_grad,
    combined_loss,
    negative_log_likelihood,
    phase_grad,
    phase_loss,
    waveform_loss,
)
from .preproc import VuvDetectorConfig, detect_vuv, feedback_transform
from .signal_io import (
    VuvFlags,
    Waveform,
    normalize,
    read_flags,
    read_spectra,
    read_wav,
    write_flags,
    write_spectra,
    write_wav,
)
from .stft import (
    AMPLITUDE_FLOOR,
    ComplexSpectrogram,
    StftConfig,
    StftOperator,
    Window,
    amp_phase,
    make_operator,
    stft_fast,
    stft_matrix,
)

__version__ = "0.1.0"
