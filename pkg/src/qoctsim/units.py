"""Physical constants and unit conversions.

Internal convention throughout the package: angular frequency in rad/s,
optical delay in seconds, length in meters.  The user-facing position axis
is one-way mirror displacement x (µm), related to optical delay by
x = c*tau/2 — the axis scan stages, reported point-spread widths, and gap
sizes live on.
"""

from __future__ import annotations

import math

from scipy.constants import c as C_M_PER_S

TWO_PI = 2.0 * math.pi

# FWHM of a Gaussian = STD_TO_FWHM * (its standard deviation)
STD_TO_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))


def omega_from_wavelength(wavelength_m):
    """Vacuum wavelength (m) -> angular frequency (rad/s)."""
    return TWO_PI * C_M_PER_S / wavelength_m


def wavelength_from_omega(omega_rad_s):
    """Angular frequency (rad/s) -> vacuum wavelength (m)."""
    return TWO_PI * C_M_PER_S / omega_rad_s


def omega_bandwidth_from_wavelength(dlambda_m, center_m):
    """Wavelength width (m) at a center wavelength -> angular-frequency width.

    First-order Jacobian |domega/dlambda| = 2*pi*c/lambda^2; the width kind
    (std vs FWHM) is preserved by the linear map.
    """
    return TWO_PI * C_M_PER_S * dlambda_m / center_m**2


def tau_from_mirror(x_m):
    """Mirror displacement (m) -> round-trip optical delay (s)."""
    return 2.0 * x_m / C_M_PER_S


def mirror_from_tau(tau_s):
    """Optical delay (s) -> one-way mirror displacement (m)."""
    return 0.5 * C_M_PER_S * tau_s


def mirror_um_from_tau(tau_s):
    """Optical delay (s) -> mirror displacement in µm (plot/CSV axis)."""
    return mirror_from_tau(tau_s) * 1e6


def tau_from_mirror_um(x_um):
    """Mirror displacement in µm -> optical delay (s)."""
    return tau_from_mirror(x_um * 1e-6)
