"""Baseline-removal preprocessing: first-order Butterworth high-pass.

The 0.5 Hz cutoff matches the lower end of the diagnostic ECG band. The
filter is applied causally per lead by default (matching clinical
acquisition chains); a zero-phase forward-backward variant is available
behind a flag since acquisition phase handling is not otherwise pinned down.
"""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

from .errors import DegenerateInputError
from .records import SAMPLE_RATE_HZ

DEFAULT_CUTOFF_HZ = 0.5
DEFAULT_ORDER = 1


def butterworth_coefficients(cutoff_hz=DEFAULT_CUTOFF_HZ, order=DEFAULT_ORDER,
                             fs=SAMPLE_RATE_HZ):
    nyquist = fs / 2.0
    if not 0 < cutoff_hz < nyquist:
        raise ValueError(f"cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz")
    return sps.butter(order, cutoff_hz, btype="highpass", fs=fs)


def highpass_filter(sig, cutoff_hz=DEFAULT_CUTOFF_HZ, order=DEFAULT_ORDER,
                    fs=SAMPLE_RATE_HZ, zero_phase=False):
    """Filter each lead independently; output has the input's shape and dtype."""
    sig = np.asarray(sig)
    finite_per_lead = np.isfinite(sig).all(axis=-1)
    if not np.all(finite_per_lead):
        bad = int(np.flatnonzero(~np.atleast_1d(finite_per_lead))[0])
        raise DegenerateInputError(f"non-finite samples in lead {bad}")
    b, a = butterworth_coefficients(cutoff_hz, order, fs)
    if zero_phase:
        out = sps.filtfilt(b, a, sig, axis=-1)
    else:
        out = sps.lfilter(b, a, sig, axis=-1)
    return out.astype(sig.dtype, copy=False)


def magnitude_response(freq_hz, cutoff_hz=DEFAULT_CUTOFF_HZ, order=DEFAULT_ORDER,
                       fs=SAMPLE_RATE_HZ):
    """Steady-state gain of the discrete filter at the given frequency."""
    b, a = butterworth_coefficients(cutoff_hz, order, fs)
    _, h = sps.freqz(b, a, worN=[freq_hz], fs=fs)
    return float(np.abs(h[0]))
