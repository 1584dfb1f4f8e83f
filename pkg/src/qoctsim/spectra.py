"""Spectral densities: Gaussian lines, the photon-pair joint density of a
collinear degenerate down-conversion source, its single-photon marginal, and
tabulated measured spectra.

Density convention: spectra are normalized probability densities over
angular frequency (unit integral), and the two-photon joint density carries
an explicit factor 2 so that its single-frequency marginal is again a
normalized Gaussian.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .fitting import FitResult, damped_least_squares
from .units import C_M_PER_S, TWO_PI


@dataclass(frozen=True)
class GaussianSpectrum:
    """Normalized Gaussian line: center and standard deviation in rad/s."""

    center: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ConfigError(f"Gaussian std must be > 0, got {self.std}")

    def fwhm(self) -> float:
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) * self.std


@dataclass(frozen=True)
class SpdcSource:
    """Photon-pair source parameters.

    pump_center: pump angular frequency (rad/s); photons are centered at
    half of it.  pump_std: pump bandwidth (rad/s, standard deviation).
    phasematch_std: phase-matching bandwidth (rad/s, standard deviation) of
    the frequency anti-correlation.
    """

    pump_center: float
    pump_std: float
    phasematch_std: float

    def __post_init__(self):
        # pump_std == 0 is tolerated as the degenerate narrowband-pump limit
        # (closed forms only; pair quadrature rejects it)
        if not (self.pump_center > 0 and self.pump_std >= 0 and self.phasematch_std > 0):
            raise ConfigError("SpdcSource frequencies/bandwidths must be positive")
        if self.pump_std > self.phasematch_std / 10.0:
            warnings.warn(
                "pump bandwidth is not small against the phase-matching "
                f"bandwidth ({self.pump_std:.3g} vs {self.phasematch_std:.3g} rad/s); "
                "narrowband-pump approximations degrade",
                stacklevel=2,
            )

    @property
    def delta_plus(self) -> float:
        """Quadrature sum of phase-matching and pump bandwidths (rad/s)."""
        return math.hypot(self.phasematch_std, self.pump_std)

    @property
    def degenerate_center(self) -> float:
        """Center frequency of each photon, half the pump frequency."""
        return 0.5 * self.pump_center


def gaussian_pdf(omega, g: GaussianSpectrum):
    """Normalized Gaussian density at ``omega`` (rad/s -> 1/(rad/s))."""
    x = (np.asarray(omega, dtype=float) - g.center) / g.std
    return np.exp(-0.5 * x * x) / (math.sqrt(TWO_PI) * g.std)


def joint_density(omega_s, omega_i, src: SpdcSource):
    """Two-photon spectral density |F(omega_s, omega_i)|^2.

    Product of the phase-matching Gaussian in the difference frequency and
    the pump Gaussian in the sum frequency, times 2; symmetric under
    exchange of the two photons and normalized to unit double integral.
    """
    pm = gaussian_pdf(
        np.asarray(omega_s) - np.asarray(omega_i),
        GaussianSpectrum(center=0.0, std=src.phasematch_std),
    )
    pump = gaussian_pdf(
        np.asarray(omega_s) + np.asarray(omega_i),
        GaussianSpectrum(center=src.pump_center, std=src.pump_std),
    )
    return 2.0 * pm * pump


def marginal(src: SpdcSource) -> GaussianSpectrum:
    """Single-photon spectrum obtained by integrating out the partner photon."""
    return GaussianSpectrum(center=0.5 * src.pump_center, std=0.5 * src.delta_plus)


@dataclass(frozen=True)
class TabulatedSpectrum:
    """Measured spectrum as (angular frequency, density) samples."""

    omega: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        de = np.asarray(self.density, dtype=float)
        if om.ndim != 1 or om.size < 8:
            raise ConfigError("tabulated spectrum needs at least 8 rows")
        if not np.all(np.diff(om) > 0):
            raise ConfigError("tabulated spectrum frequencies must be strictly increasing")
        if np.any(de < 0):
            raise ConfigError("tabulated spectrum densities must be non-negative")
        if np.allclose(de, de[0]):
            raise ConfigError("tabulated spectrum is degenerate (all densities equal)")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "density", de)

    @property
    def center_estimate(self) -> float:
        return float(np.sum(self.omega * self.density) / np.sum(self.density))


def load_tabulated(rows) -> TabulatedSpectrum:
    """Build a TabulatedSpectrum from an iterable of (omega_rad_s, density)."""
    arr = np.asarray(list(rows), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError("expected rows of (omega_rad_s, density)")
    return TabulatedSpectrum(omega=arr[:, 0], density=arr[:, 1])


def load_tabulated_wavelength(rows_nm_counts) -> TabulatedSpectrum:
    """Build a TabulatedSpectrum from (wavelength_nm, counts) rows.

    Converts to angular frequency and applies the Jacobian |dlambda/domega|
    so the tabulated values stay densities per rad/s.
    """
    arr = np.asarray(list(rows_nm_counts), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError("expected rows of (wavelength_nm, counts)")
    lam = arr[:, 0] * 1e-9
    if np.any(lam <= 0):
        raise ConfigError("wavelengths must be positive")
    omega = TWO_PI * C_M_PER_S / lam
    density = arr[:, 1] * lam**2 / (TWO_PI * C_M_PER_S)
    order = np.argsort(omega)
    return TabulatedSpectrum(omega=omega[order], density=density[order])


def fit_gaussian(spec: TabulatedSpectrum) -> tuple[GaussianSpectrum, FitResult]:
    """Least-squares Gaussian fit (amplitude, center, std, offset) to a
    tabulated spectrum.  Unweighted unless the caller pre-scales densities.
    """
    om, de = spec.omega, spec.density
    total = np.trapz(de, om)
    center0 = float(np.trapz(om * de, om) / total)
    var0 = float(np.trapz((om - center0) ** 2 * de, om) / total)
    std0 = math.sqrt(max(var0, (om[1] - om[0]) ** 2))
    amp0 = float(de.max() - de.min())

    def model(p):
        amp, center, std, off = p
        return off + amp * np.exp(-0.5 * ((om - center) / std) ** 2)

    result = damped_least_squares(
        model,
        [amp0, center0, std0, float(de.min())],
        de,
        bounds=[(0.0, None), (om[0], om[-1]), (1e-6 * std0, None), (None, None)],
        names=["amplitude", "center", "std", "offset"],
    )
    g = GaussianSpectrum(center=result["center"], std=result["std"])
    return g, result
