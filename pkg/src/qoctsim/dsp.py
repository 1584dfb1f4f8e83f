"""Interferogram post-processing: transforms, spectral filtering, envelope
extraction, and the standard curve fits.

All transforms use the unitary DFT convention (|X| = |fft(x)|/sqrt(N)),
so trace energy equals spectrum energy.  Frequency axes are expressed in
units of the pump angular frequency.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import hilbert, savgol_filter

from .errors import ConfigError, GridError
from .fitting import FitResult, damped_least_squares, finite_difference_jacobian  # noqa: F401
from .units import C_M_PER_S, STD_TO_FWHM, TWO_PI


@dataclass
class SpectrumTrace:
    """One-sided magnitude spectrum on a pump-normalized frequency axis."""

    omega_over_pump: np.ndarray
    magnitude: np.ndarray
    meta: dict = field(default_factory=dict)


def delay_step_from_positions(positions_um) -> float:
    """Optical-delay step of a uniform mirror-position grid (µm)."""
    x = np.asarray(positions_um, dtype=float)
    dx = np.diff(x)
    if dx.size == 0 or not np.allclose(dx, dx[0], rtol=1e-6, atol=1e-12 * abs(dx[0]) if dx[0] else 1e-18):
        raise GridError("positions must form a uniform grid")
    return 2.0 * dx[0] * 1e-6 / C_M_PER_S


def dft_magnitude(values, delay_step: float, pump_omega: float) -> SpectrumTrace:
    """One-sided DFT magnitude of a uniformly sampled delay trace."""
    y = np.asarray(values, dtype=float)
    if delay_step <= 0:
        raise GridError("delay step must be positive")
    mag = np.abs(np.fft.rfft(y, norm="ortho"))
    omega = TWO_PI * np.fft.rfftfreq(y.size, d=delay_step)
    return SpectrumTrace(
        omega_over_pump=omega / pump_omega,
        magnitude=mag,
        meta={"n": y.size, "delay_step_s": delay_step, "pump_omega": pump_omega,
              "normalization": "unitary"},
    )


def spectrum_from_positions(positions_um, values, pump_omega: float) -> SpectrumTrace:
    return dft_magnitude(values, delay_step_from_positions(positions_um), pump_omega)


def lowpass_extract(values, delay_step: float, pump_omega: float, cutoff: float = 0.015):
    """Discard spectral content above ``cutoff`` (units of the pump
    frequency) and transform back; isolates the envelope-only dip structure
    from the fringe carriers.  Hard rectangular truncation; DC preserved."""
    y = np.asarray(values, dtype=float)
    nyquist = math.pi / delay_step
    wc = cutoff * pump_omega
    if cutoff <= 0 or wc >= nyquist:
        raise ConfigError(
            f"cutoff {cutoff} * pump frequency must lie in (0, Nyquist={nyquist / pump_omega:.3g})"
        )
    spec = np.fft.rfft(y)
    omega = TWO_PI * np.fft.rfftfreq(y.size, d=delay_step)
    spec[omega > wc] = 0.0
    return np.fft.irfft(spec, n=y.size)


def analytic_envelope(values) -> np.ndarray:
    """Magnitude of the analytic signal of a zero-baseline oscillation."""
    return np.abs(hilbert(np.asarray(values, dtype=float)))


def measure_fwhm(x, y) -> float:
    """Full width at half maximum of a single positive peak by linear
    interpolation of the half-maximum crossings."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = y[i] / 2.0
    left = right = None
    for j in range(i, 0, -1):
        if y[j - 1] <= half <= y[j]:
            left = x[j - 1] + (half - y[j - 1]) / (y[j] - y[j - 1]) * (x[j] - x[j - 1])
            break
    for j in range(i, y.size - 1):
        if y[j + 1] <= half <= y[j]:
            right = x[j] + (y[j] - half) / (y[j] - y[j + 1]) * (x[j + 1] - x[j])
            break
    if left is None or right is None:
        raise ConfigError("half-maximum crossings not found; peak not resolved on the grid")
    return float(right - left)


def fit_gaussian_feature(x, values) -> FitResult:
    """Fit a single Gaussian dip or peak: offset + sign*amp*G(x|center,sigma).

    The sign is chosen from the data (dip vs peak) and reported in
    ``extras['sign']`` along with the FWHM.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(values, dtype=float)
    med = float(np.median(y))
    span = float(y.max() - y.min())
    if span <= 0 or not np.isfinite(span):
        raise ConfigError("flat or invalid trace; nothing to fit")
    sign = 1.0 if (y.max() - med) >= (med - y.min()) else -1.0
    dev = sign * (y - med)
    i0 = int(np.argmax(dev))
    amp0 = float(dev[i0])
    above = dev > amp0 / 2.0
    width0 = max((x[1] - x[0]) * max(np.count_nonzero(above), 2) / STD_TO_FWHM, abs(x[1] - x[0]))

    def model(p):
        center, sigma, amp, off = p
        return off + sign * amp * np.exp(-0.5 * ((x - center) / sigma) ** 2)

    result = damped_least_squares(
        model,
        [x[i0], width0, amp0, med],
        y,
        bounds=[(x[0], x[-1]), (1e-12, None), (0.0, None), (None, None)],
        names=["center", "sigma", "amplitude", "offset"],
    )
    result.extras["sign"] = sign
    result.extras["fwhm"] = STD_TO_FWHM * result["sigma"]
    result.extras["fwhm_sigma"] = STD_TO_FWHM * result.sigma("sigma")
    return result


def fit_sinc_envelope(x, values) -> FitResult:
    """Envelope of an oscillatory trace fitted with |sinc|.

    The envelope is the analytic-signal magnitude of the baseline-removed
    trace; ``extras['fwhm']`` reports the main-lobe full width at half
    maximum (1.2067 * width parameter).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(values, dtype=float)
    osc = y - np.mean(y)
    spec = np.abs(np.fft.rfft(osc))
    if spec.size < 8 or np.sum(spec[: max(2, spec.size // 16)]) > 0.8 * np.sum(spec):
        raise ConfigError("input does not look oscillatory; cannot extract an envelope")
    env = analytic_envelope(osc)
    i0 = int(np.argmax(env))
    amp0 = float(env[i0])
    above = env > amp0 / 2.0
    w0 = max(float(np.count_nonzero(above)) * abs(x[1] - x[0]) / 1.2067, abs(x[1] - x[0]))

    def model(p):
        center, width, amp, off = p
        return off + amp * np.abs(np.sinc((x - center) / width))

    result = damped_least_squares(
        model,
        [x[i0], w0, amp0, 0.0],
        env,
        bounds=[(x[0], x[-1]), (1e-12, None), (0.0, None), (None, None)],
        names=["center", "width", "amplitude", "offset"],
    )
    result.extras["fwhm"] = 1.2067 * result["width"]
    return result


@dataclass
class TwoGaussianSpectralFit:
    """Two-line spectral model: constant plus Gaussians locked to half the
    pump frequency and to the pump frequency."""

    c: float
    a1: float
    a2: float
    sigma1: float
    sigma2: float
    fit: FitResult

    def as_dict(self) -> dict:
        return {
            "c": self.c,
            "a1": self.a1,
            "a2": self.a2,
            "sigma1_over_pump": self.sigma1,
            "sigma2_over_pump": self.sigma2,
            "fit": self.fit.as_dict(),
        }


def fit_two_gaussian_spectrum(spec: SpectrumTrace, sigma1_fixed: float | None = None) -> TwoGaussianSpectralFit:
    """Fit the coincidence-spectrum model c + a1*G(0.5) + a2*G(1.0) with
    centers locked; ``sigma1_fixed`` freezes the half-pump line width
    (units of the pump frequency)."""
    w = np.asarray(spec.omega_over_pump, dtype=float)
    m = np.asarray(spec.magnitude, dtype=float)
    if w[0] > 0.2 or w[-1] < 1.4:
        raise GridError("spectrum must cover [0.2, 1.4] of the pump frequency")

    sigma1_0 = sigma1_fixed if sigma1_fixed is not None else 0.1
    near1 = np.abs(w - 1.0) < 0.05
    a2_0 = float(m[near1].max() - np.median(m)) if np.any(near1) else float(m.max())
    near_half = np.abs(w - 0.5) < 0.05
    a1_0 = float(max(m[near_half].max() - np.median(m), 0.0)) if np.any(near_half) else 0.0

    def model(p):
        c, a1, a2, s1, s2 = p
        return (
            c
            + a1 * np.exp(-0.5 * ((w - 0.5) / s1) ** 2)
            + a2 * np.exp(-0.5 * ((w - 1.0) / s2) ** 2)
        )

    result = damped_least_squares(
        model,
        [float(np.median(m)), a1_0, max(a2_0, 1e-12), sigma1_0, 0.3],
        m,
        bounds=[(None, None), (0.0, None), (0.0, None), (1e-4, None), (1e-4, None)],
        fixed_mask=[False, False, False, sigma1_fixed is not None, False],
        names=["c", "a1", "a2", "sigma1", "sigma2"],
    )
    return TwoGaussianSpectralFit(
        c=result["c"],
        a1=result["a1"],
        a2=result["a2"],
        sigma1=result["sigma1"],
        sigma2=result["sigma2"],
        fit=result,
    )


def savgol_smooth(values, positions_um, window_um: float = 17.0, order: int = 3) -> np.ndarray:
    """Savitzky-Golay smoothing with the window given in position units."""
    x = np.asarray(positions_um, dtype=float)
    y = np.asarray(values, dtype=float)
    dx = float(np.mean(np.diff(x)))
    window = int(round(window_um / dx))
    window += 1 - window % 2  # odd
    if window < order + 2:
        raise ConfigError(
            f"smoothing window {window_um} µm covers only {window} samples; "
            f"need at least {order + 2}"
        )
    window = min(window, y.size - 1 + (y.size % 2))
    if window > y.size:
        raise ConfigError("smoothing window exceeds the trace length")
    return savgol_filter(y, window, order)


def standardize_runs(runs) -> list:
    """Align repeated traces: per-run standardization, then rescale to the
    average mean and average standard deviation of the whole set."""
    runs = [np.asarray(r, dtype=float) for r in runs]
    means = np.array([r.mean() for r in runs])
    stds = np.array([r.std() for r in runs])
    if np.any(stds == 0):
        raise ConfigError("constant trace cannot be standardized")
    gm, gs = means.mean(), stds.mean()
    return [(r - mu) / sd * gs + gm for r, mu, sd in zip(runs, means, stds)]


def envelope_minmax(runs, positions_um, window_um: float = 17.0, order: int = 3):
    """Upper/lower envelopes of repeated traces: pointwise extrema after
    alignment, Savitzky-Golay smoothed."""
    if len(runs) == 1:
        warnings.warn("single run: upper and lower envelopes coincide", stacklevel=2)
    aligned = standardize_runs(runs)
    stackd = np.stack(aligned)
    upper = savgol_smooth(stackd.max(axis=0), positions_um, window_um, order)
    lower = savgol_smooth(stackd.min(axis=0), positions_um, window_um, order)
    return upper, lower


def moment_width(spec: SpectrumTrace, lo: float = 0.05, hi: float | None = None) -> float:
    """RMS spectral width (square root of the power-weighted second moment
    about the centroid) over a band of the pump-normalized axis.  A blunt,
    fit-free broadening metric that responds to noise floors as well as to
    line broadening."""
    w = spec.omega_over_pump
    m = spec.magnitude**2
    sel = w >= lo
    if hi is not None:
        sel &= w <= hi
    w, m = w[sel], m[sel]
    total = np.sum(m)
    if total <= 0:
        raise ConfigError("empty spectrum band")
    mean = np.sum(w * m) / total
    return float(np.sqrt(np.sum((w - mean) ** 2 * m) / total))
