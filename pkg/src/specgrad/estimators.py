"""scikit-learn style wrappers around the functional API.

These let the transforms and the inversion sit in pipelines and use
``get_params`` / ``set_params`` / ``clone``. Waveform inputs are 1-D arrays
(or :class:`~specgrad.signal_io.Waveform`); batched inputs are 2-D with one
signal or segment per row.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import as_samples
from .inversion import Adam, GaussianNoise, InversionSettings, Provided, Zeros, invert, snr
from .losses import LossWeights, combined_loss
from .preproc import VuvDetectorConfig, detect_vuv, feedback_transform
from .signal_io import normalize
from .stft import StftConfig, make_operator, stft_fast


class _StftParams:
    def _stft_config(self) -> StftConfig:
        return StftConfig(self.frame_length, self.frame_shift, self.fft_size, self.window, self.one_sided)


class StftTransformer(_StftParams, TransformerMixin, BaseEstimator):
    """Waveform -> complex ``(T, K)`` spectrogram (or amplitude/phase views).

    Parameters
    ----------
    output : {"complex", "amplitude", "phase"}
        Which view :meth:`transform` returns.
    """

    def __init__(self, frame_length=400, frame_shift=16, fft_size=512, window="rectangular",
                 one_sided=True, output="complex"):
        self.frame_length = frame_length
        self.frame_shift = frame_shift
        self.fft_size = fft_size
        self.window = window
        self.one_sided = one_sided
        self.output = output

    def fit(self, X, y=None):
        self.config_ = self._stft_config()
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        x = as_samples(X, name="X")
        op = make_operator(self.config_, x.shape[0])
        Y = stft_fast(op, x)
        if self.output == "complex":
            return np.array(Y.entries)
        if self.output == "amplitude":
            return Y.amplitude
        if self.output == "phase":
            return Y.phase
        raise ValueError(f"output must be 'complex', 'amplitude' or 'phase', got {self.output!r}")


class FeedbackTransformer(TransformerMixin, BaseEstimator):
    """Rows of signal segments -> unit-magnitude-spectrum segments of length ``fft_size``."""

    def __init__(self, fft_size=512):
        self.fft_size = fft_size

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=True)
        if X.shape[1] > self.fft_size:
            raise ValueError(f"segments of {X.shape[1]} samples exceed fft_size {self.fft_size}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, ensure_2d=True)
        return np.stack([feedback_transform(row, self.fft_size) for row in X])


class VuvDetector(BaseEstimator):
    """Per-frame voiced/unvoiced classifier; :meth:`predict` returns 0/1 flags.

    Stateless: :meth:`fit` only validates the configuration.
    """

    def __init__(self, frame_length=400, frame_shift=16, energy_threshold=0.05,
                 periodicity_threshold=0.35, min_lag=32, max_lag=320):
        self.frame_length = frame_length
        self.frame_shift = frame_shift
        self.energy_threshold = energy_threshold
        self.periodicity_threshold = periodicity_threshold
        self.min_lag = min_lag
        self.max_lag = max_lag

    def fit(self, X=None, y=None):
        self.config_ = VuvDetectorConfig(**self.get_params())
        return self

    def predict(self, X):
        check_is_fitted(self, "config_")
        return np.asarray(detect_vuv(X, self.config_).flags)


class SpectralInverter(_StftParams, TransformerMixin, BaseEstimator):
    """Analysis-by-synthesis: fit waveform samples to the spectrogram of ``X``.

    :meth:`fit` normalizes the target waveform, runs :func:`~specgrad.inversion.invert`
    and stores the de-normalized reconstruction in ``waveform_`` and the run
    record in ``trace_``. :meth:`transform` repeats the inversion for a new
    signal, warm-started from ``waveform_`` when lengths agree and
    ``warm_start`` is set.

    Parameters
    ----------
    alpha : {"0", "1", "vuv"}
        Phase weighting scheme; ``"vuv"`` needs ``flags`` passed to :meth:`fit`.
    init : {"noise", "zeros"}
    """

    def __init__(self, frame_length=400, frame_shift=16, fft_size=512, window="rectangular",
                 one_sided=True, alpha="1", lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 max_iters=20000, init="noise", init_scale=1e-4, seed=1, stop_tol=0.0,
                 log_every=100, patience=200, warm_start=False):
        self.frame_length = frame_length
        self.frame_shift = frame_shift
        self.fft_size = fft_size
        self.window = window
        self.one_sided = one_sided
        self.alpha = alpha
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.max_iters = max_iters
        self.init = init
        self.init_scale = init_scale
        self.seed = seed
        self.stop_tol = stop_tol
        self.log_every = log_every
        self.patience = patience
        self.warm_start = warm_start

    def _settings(self, start=None) -> InversionSettings:
        if start is not None:
            init = Provided(start)
        elif self.init == "zeros":
            init = Zeros()
        elif self.init == "noise":
            init = GaussianNoise(self.seed, self.init_scale)
        else:
            raise ValueError(f"init must be 'noise' or 'zeros', got {self.init!r}")
        return InversionSettings(
            Adam(self.lr, self.beta1, self.beta2, self.eps), self.max_iters, init, self.stop_tol, self.log_every,
            self.patience,
        )

    def _run(self, X, flags, start=None):
        target, mean, std = normalize(X)
        op = make_operator(self._stft_config(), len(target))
        weights = LossWeights.voiced_only(flags) if self.alpha == "vuv" else LossWeights(self.alpha)
        trace = invert(stft_fast(op, target), op, weights, self._settings(start))
        return trace, target, mean, std, op, weights

    def fit(self, X, y=None, flags=None):
        trace, target, mean, std, op, weights = self._run(X, flags)
        self.trace_ = trace
        self.mean_, self.std_ = mean, std
        self.waveform_ = trace.waveform * std + mean
        self.snr_ = snr(target, trace.waveform)
        return self

    def transform(self, X, flags=None):
        check_is_fitted(self, "waveform_")
        x = as_samples(X, name="X")
        start = None
        if self.warm_start and x.shape[0] == self.waveform_.shape[0]:
            start = (self.waveform_ - self.mean_) / self.std_
        trace, _, mean, std, _, _ = self._run(x, flags, start)
        return trace.waveform * std + mean

    def fit_transform(self, X, y=None, flags=None):
        return self.fit(X, flags=flags).waveform_

    def score(self, X, y=None):
        """SNR in dB of the fitted reconstruction against ``X``."""
        if not hasattr(self, "waveform_"):
            raise NotFittedError("SpectralInverter is not fitted yet")
        return snr(as_samples(X), self.waveform_)

    def loss(self, X, flags=None):
        """Combined loss of the fitted reconstruction against ``X``, on the normalized scale."""
        check_is_fitted(self, "waveform_")
        target = normalize(X)[0]
        op = make_operator(self._stft_config(), len(target))
        weights = LossWeights.voiced_only(flags) if self.alpha == "vuv" else LossWeights(self.alpha)
        return combined_loss(target, (self.waveform_ - self.mean_) / self.std_, op, weights)
