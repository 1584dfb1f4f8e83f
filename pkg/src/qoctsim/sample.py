"""Complex frequency responses H(omega) of the supported samples and the
dispersion-broadening analysis for a slab in front of a mirror.

Samples are passive: |H| <= 1 is expected everywhere in band.  The position
axis convention is mirror displacement (see units), so a feature at mirror
position x corresponds to optical delay 2x/c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import materials
from .errors import ConfigError
from .spectra import SpdcSource
from .units import C_M_PER_S


@dataclass(frozen=True)
class SingleLayer:
    """Dispersionless reflector: H(omega) = r * exp(i*omega*delay).

    ``delay`` is the optical delay T in seconds (mirror position x maps to
    T = 2x/c).  Reflectivity R = r^2.
    """

    r: float
    delay: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ConfigError(f"reflection amplitude must be in [0, 1], got {self.r}")

    @property
    def reflectivity(self) -> float:
        return self.r**2

    def response(self, omega):
        return self.r * np.exp(1j * np.asarray(omega, dtype=float) * self.delay)


@dataclass(frozen=True)
class DispersiveSlab:
    """Mirror (amplitude ``backing_r``) behind a dispersive slab.

    H(omega) = backing_r * exp(i * passes * omega * n(omega) * thickness / c)

    ``passes`` counts traversals of the slab (2 for the usual reflection
    round trip).  ``expansion`` selects the index model:

    - "linear" (default): n(omega) = n(ref) + n'(ref) * (omega - ref), the
      first-order model whose quadratic spectral phase matches the
      broadening-factor formulas exactly;
    - "full": the complete Sellmeier curve (validity window enforced).

    ``reference_omega`` anchors the linear expansion; typically half the
    pump frequency.
    """

    thickness: float
    material: str = "silicon"
    backing_r: float = 1.0
    passes: int = 2
    expansion: str = "linear"
    reference_omega: float | None = None
    delay: float = 0.0

    def __post_init__(self):
        if self.thickness < 0:
            raise ConfigError("slab thickness must be >= 0")
        if not 0.0 <= self.backing_r <= 1.0:
            raise ConfigError("backing reflectivity amplitude must be in [0, 1]")
        if self.passes < 1:
            raise ConfigError("passes must be >= 1")
        if self.expansion not in ("linear", "full"):
            raise ConfigError(f"unknown expansion {self.expansion!r}")
        if self.expansion == "linear" and self.reference_omega is None:
            raise ConfigError("linear expansion needs reference_omega")

    def index(self, omega):
        mat = materials.get_material(self.material)
        if self.expansion == "full":
            return materials.sellmeier_index(mat, omega)
        ref = self.reference_omega
        n0 = float(materials.sellmeier_index(mat, ref))
        n1 = float(materials.sellmeier_dn_domega(mat, ref))
        return n0 + n1 * (np.asarray(omega, dtype=float) - ref)

    def response(self, omega):
        omega = np.asarray(omega, dtype=float)
        phase = self.passes * omega * self.index(omega) * self.thickness / C_M_PER_S
        return self.backing_r * np.exp(1j * (phase + omega * self.delay))


@dataclass(frozen=True)
class GapSample:
    """Two interfaces separated by a gap, as a truncated ray series.

    ``gap`` and ``first_interface`` are mirror-axis positions/sizes in
    meters (delay 2x/c).  The response is

        H = e^{i*omega*tau1} * [r1 + sum_{k=1..K} t1^2 r2 (r1 r2)^{k-1}
                                      e^{i*omega*k*tau_d}]

    with tau1 = 2*first_interface/c and tau_d = 2*gap/c; K = echo_count.
    Amplitudes may be signed (or complex) to encode interface phase flips.
    """

    r1: float | complex
    r2: float | complex
    t1: float | complex
    gap: float
    first_interface: float = 0.0
    echo_count: int = 4

    def __post_init__(self):
        for name, val in (("r1", self.r1), ("r2", self.r2), ("t1", self.t1)):
            if abs(val) > 1.0:
                raise ConfigError(f"|{name}| must be <= 1, got {abs(val)}")
        if abs(self.r1) ** 2 + abs(self.t1) ** 2 > 1.0 + 1e-12:
            raise ConfigError("energy bound violated: |r1|^2 + |t1|^2 > 1")
        if self.gap < 0:
            raise ConfigError("gap must be >= 0")
        if self.echo_count < 0:
            raise ConfigError("echo_count must be >= 0")

    @property
    def tau_first(self) -> float:
        return 2.0 * self.first_interface / C_M_PER_S

    @property
    def tau_gap(self) -> float:
        return 2.0 * self.gap / C_M_PER_S

    def reflection_series(self):
        """(amplitude, extra delay) of each term in the truncated ray series."""
        terms = [(complex(self.r1), 0.0)]
        amp = complex(self.t1) ** 2 * complex(self.r2)
        for k in range(1, self.echo_count + 1):
            terms.append((amp, k * self.tau_gap))
            amp = amp * complex(self.r1) * complex(self.r2)
        return terms

    def response(self, omega):
        omega = np.asarray(omega, dtype=float)
        h = np.zeros(np.shape(omega), dtype=complex)
        for amp, dtau in self.reflection_series():
            h = h + amp * np.exp(1j * omega * dtau)
        return h * np.exp(1j * omega * self.tau_first)


def respond(sample, omega):
    """Sample response H(omega); rejects non-positive frequencies."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ConfigError("sample response is defined for omega > 0 only")
    return sample.response(omega)


@dataclass(frozen=True)
class DispersionReport:
    """Slab dispersion summary: quadratic-phase coefficient kappa (s^2) and
    the width multipliers of the pair-interference dip (alpha0) and of the
    single-photon fringe envelope (alpha1)."""

    kappa: float
    alpha0: float
    alpha1: float
    dn_domega: float
    index: float
    reference_omega: float

    def as_dict(self) -> dict:
        return {
            "kappa_s2": self.kappa,
            "alpha0": self.alpha0,
            "alpha1": self.alpha1,
            "dn_domega_s": self.dn_domega,
            "index": self.index,
            "reference_omega_rad_s": self.reference_omega,
        }


def broadening_factors(src: SpdcSource, material, thickness: float) -> DispersionReport:
    """Dispersion broadening of the interferogram features for a slab of the
    given one-way ``thickness`` (m) traversed twice.

    kappa = (l/c) * dn/domega at half the pump frequency, l = 2*thickness;
    alpha0 = sqrt(1 + delta^2 * Delta^2 * kappa^2);
    alpha1 = sqrt(1 + (delta^2 + Delta^2)^2 * kappa^2 / 4).
    """
    if thickness < 0:
        raise ConfigError("thickness must be >= 0")
    omega0 = src.degenerate_center
    mat = materials.get_material(material) if isinstance(material, str) else material
    dn = float(materials.sellmeier_dn_domega(mat, omega0))
    n0 = float(materials.sellmeier_index(mat, omega0))
    length = 2.0 * thickness
    kappa = length / C_M_PER_S * dn
    d2 = src.pump_std**2
    dd2 = src.phasematch_std**2
    alpha0 = math.sqrt(1.0 + d2 * dd2 * kappa**2)
    alpha1 = math.sqrt(1.0 + (d2 + dd2) ** 2 * kappa**2 / 4.0)
    return DispersionReport(
        kappa=kappa,
        alpha0=alpha0,
        alpha1=alpha1,
        dn_domega=dn,
        index=n0,
        reference_omega=omega0,
    )
