"""Michelson interference engine for single photons and photon pairs.

Produces interferogram terms on a delay grid three ways:

- closed form for a dispersionless single layer and Gaussian pair source;
- numerical quadrature of the pair-projection integrals for arbitrary
  passive samples (tensor Gauss-Hermite in the rotated frame where the
  pair density factorizes);
- a 1-D integral for single-photon (classical OCT style) interferograms.

The oscillatory terms are kept as complex analytic amplitudes (the measured
term is the real part) so carrier phases can be manipulated downstream
without re-integrating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, GridError, NonConvergenceError, TermConsistencyError
from .sample import SingleLayer, respond
from .spectra import GaussianSpectrum, SpdcSource, TabulatedSpectrum
from .units import mirror_um_from_tau

_TAU_CHUNK = 32768


def alpha_beta(h, omega, tau):
    """Output-mode coefficients of the interferometer for sample response
    ``h`` at frequency ``omega`` and reference delay ``tau``.

    alpha feeds the input-side port, beta the other port;
    |alpha|^2 + |beta|^2 = (1 + |h|^2) / 2.
    """
    ref = np.exp(1j * np.asarray(omega, dtype=float) * tau)
    alpha = (ref + h) / 2.0
    beta = 1j * (ref - h) / 2.0
    return alpha, beta


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor quadrature nodes in the rotated pair-frequency frame.

    ``nu_minus`` is the difference-frequency axis (anti-correlation,
    std = phase-matching bandwidth), ``nu_plus`` the sum-frequency axis
    (pump, std = pump bandwidth).  Nodes are Gauss-Hermite points mapped to
    each axis Gaussian; weights sum to 1.
    """

    nu_minus: np.ndarray
    w_minus: np.ndarray
    nu_plus: np.ndarray
    w_plus: np.ndarray

    def __post_init__(self):
        for nodes in (self.nu_minus, self.nu_plus):
            if not np.allclose(nodes, -nodes[::-1], rtol=0, atol=1e-9 * np.max(np.abs(nodes))):
                raise GridError("quadrature nodes must be symmetric about 0")

    @property
    def nodes_per_axis(self) -> int:
        return self.nu_minus.size

    @property
    def extent_minus(self) -> float:
        return float(np.max(np.abs(self.nu_minus)))

    @classmethod
    def for_source(cls, src: SpdcSource, nodes: int = 64) -> "QuadratureGrid":
        if src.pump_std <= 0:
            raise ConfigError("pair quadrature requires a nonzero pump bandwidth")
        xm, wm = _hermite_nodes(nodes, src.phasematch_std)
        xp, wp = _hermite_nodes(nodes, src.pump_std)
        grid = cls(nu_minus=xm, w_minus=wm, nu_plus=xp, w_plus=wp)
        if grid.extent_minus < 6.0 * src.phasematch_std:
            raise GridError(
                f"{nodes} nodes span only {grid.extent_minus / src.phasematch_std:.1f} "
                "standard deviations; need >= 6"
            )
        return grid


def _hermite_nodes(n: int, sigma: float):
    x, w = np.polynomial.hermite.hermgauss(n)
    return math.sqrt(2.0) * sigma * x, w / math.sqrt(math.pi)


@dataclass
class InterferogramTerms:
    """Pair-interferogram building blocks on a delay grid.

    ``mc`` is the constant term; ``hom`` the envelope-only pair dip/peak
    structure; ``fringe_half`` and ``fringe_pump`` are complex analytic
    amplitudes of the oscillatory terms with carriers at half the pump
    frequency and at the pump frequency (measured values are their real
    parts).
    """

    tau_grid: np.ndarray
    mc: float
    hom: np.ndarray
    fringe_half: np.ndarray
    fringe_pump: np.ndarray
    carrier: float  # rad/s, half the pump frequency
    meta: dict = field(default_factory=dict)

    @property
    def m0(self) -> np.ndarray:
        return np.real(self.hom)

    @property
    def m1(self) -> np.ndarray:
        return np.real(self.fringe_half)

    @property
    def m2(self) -> np.ndarray:
        return np.real(self.fringe_pump)

    def with_carrier_phase(self, eps_delay: np.ndarray) -> "InterferogramTerms":
        """Rotate the oscillatory carriers by a per-point path error
        ``eps_delay`` (seconds of optical delay); envelope terms unchanged."""
        eps = np.asarray(eps_delay, dtype=float)
        if eps.shape != self.tau_grid.shape:
            raise GridError("path-error array must match the delay grid")
        return replace(
            self,
            hom=self.hom.copy(),
            fringe_half=self.fringe_half * np.exp(-1j * self.carrier * eps),
            fringe_pump=self.fringe_pump * np.exp(-2j * self.carrier * eps),
            meta=dict(self.meta),
        )


@dataclass
class Interferogram:
    """A coincidence or single-count trace vs delay."""

    tau_grid: np.ndarray
    values: np.ndarray
    kind: str  # single | auto | cross
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("single", "auto", "cross"):
            raise ConfigError(f"unknown interferogram kind {self.kind!r}")
        if not np.all(np.diff(self.tau_grid) > 0):
            raise GridError("delay grid must be strictly increasing")

    @property
    def positions_um(self) -> np.ndarray:
        return mirror_um_from_tau(self.tau_grid)


def closed_form_terms(src: SpdcSource, layer: SingleLayer, tau_grid) -> InterferogramTerms:
    """Analytic pair-interferogram terms for a dispersionless single layer."""
    if not isinstance(layer, SingleLayer):
        raise ConfigError("closed form supports single dispersionless layers only; "
                          "use quadrature_terms for other samples")
    tau = np.asarray(tau_grid, dtype=float)
    x = layer.delay - tau
    r = layer.r
    big_r = layer.reflectivity
    delta = src.pump_std
    dd = src.phasematch_std
    dplus = src.delta_plus
    omega0 = src.degenerate_center

    mc = 0.25 * (1.0 + big_r) ** 2
    hom = (0.5 * big_r * np.exp(-0.5 * dd**2 * x**2)).astype(complex)
    fringe_half = r * (1.0 + big_r) * np.exp(-(dplus**2) * x**2 / 8.0) * np.exp(1j * omega0 * x)
    fringe_pump = 0.5 * big_r * np.exp(-0.5 * delta**2 * x**2) * np.exp(2j * omega0 * x)
    return InterferogramTerms(
        tau_grid=tau,
        mc=mc,
        hom=hom,
        fringe_half=fringe_half,
        fringe_pump=fringe_pump,
        carrier=omega0,
        meta={"engine": "closed_form", "layer_r": r, "layer_delay": layer.delay},
    )


def quadrature_terms(
    src: SpdcSource,
    sample,
    tau_grid,
    grid: QuadratureGrid | None = None,
    *,
    nodes: int = 64,
    include_half_fringe: bool = True,
    mismatch_tol: float = 1e-8,
) -> InterferogramTerms:
    """Pair-interferogram terms by tensor quadrature of the projection
    integrals; works for any passive sample response.

    The two single-photon fringe integrals that must coincide for an
    exchange-symmetric pair amplitude are evaluated independently; their
    disagreement beyond ``mismatch_tol`` (relative to the constant term)
    raises TermConsistencyError.  ``include_half_fringe=False`` skips them
    both (they do not enter the cross-correlation composition).
    """
    tau = np.asarray(tau_grid, dtype=float)
    if grid is None:
        grid = QuadratureGrid.for_source(src, nodes)
    omega0 = src.degenerate_center

    u = grid.nu_minus[:, None]  # difference axis
    v = grid.nu_plus[None, :]  # sum axis
    nu1 = omega0 + (u + v) / 2.0
    nu2 = omega0 + (v - u) / 2.0
    h1 = np.asarray(respond(sample, nu1), dtype=complex)
    h2 = np.asarray(respond(sample, nu2), dtype=complex)
    hmax = max(np.max(np.abs(h1)), np.max(np.abs(h2)))
    if hmax > 1.0 + 1e-9:
        raise ConfigError(f"sample is not passive on the quadrature support (max |H| = {hmax:.6g})")
    w2 = grid.w_minus[:, None] * grid.w_plus[None, :]

    one_plus_h1 = 1.0 + np.abs(h1) ** 2
    one_plus_h2 = 1.0 + np.abs(h2) ** 2
    mc = float(np.sum(w2 * one_plus_h1 * one_plus_h2) / 4.0)

    c_hom = np.sum(w2 * h1 * np.conj(h2), axis=1)  # collapse the sum axis
    c_pump = np.sum(w2 * h1 * h2, axis=0)  # collapse the difference axis
    p_half = w2 * h1 * one_plus_h2
    p_half_swap = w2 * h2 * one_plus_h1

    hom = np.empty(tau.size, dtype=complex)
    fringe_pump = np.empty(tau.size, dtype=complex)
    fringe_half = np.zeros(tau.size, dtype=complex)
    fringe_half_swap = np.zeros(tau.size, dtype=complex)

    um = grid.nu_minus
    vp = grid.nu_plus
    for start in range(0, tau.size, _TAU_CHUNK):
        sl = slice(start, min(start + _TAU_CHUNK, tau.size))
        t = tau[sl]
        eu = np.exp(-1j * np.outer(um, t))
        hom[sl] = 0.5 * (c_hom @ eu)
        ev_full = np.exp(-1j * np.outer(vp, t))
        fringe_pump[sl] = 0.5 * np.exp(-2j * omega0 * t) * (c_pump @ ev_full)
        if include_half_fringe:
            eu_h = np.exp(-0.5j * np.outer(um, t))
            ev_h = np.exp(-0.5j * np.outer(vp, t))
            carrier = np.exp(-1j * omega0 * t)
            fringe_half[sl] = carrier * np.sum(eu_h * (p_half @ ev_h), axis=0)
            fringe_half_swap[sl] = carrier * np.sum(np.conj(eu_h) * (p_half_swap @ ev_h), axis=0)

    mismatch = 0.0
    if include_half_fringe:
        mismatch = float(np.max(np.abs(fringe_half.real - fringe_half_swap.real)))
        if mismatch > mismatch_tol * max(mc, 1e-30):
            raise TermConsistencyError(
                f"single-photon fringe terms disagree by {mismatch:.3g} "
                "(sample breaks exchange symmetry or the grid failed)"
            )
        fringe_half = 0.5 * (fringe_half + fringe_half_swap)

    return InterferogramTerms(
        tau_grid=tau,
        mc=mc,
        hom=hom,
        fringe_half=fringe_half,
        fringe_pump=fringe_pump,
        carrier=omega0,
        meta={
            "engine": "quadrature",
            "nodes": grid.nodes_per_axis,
            "fringe_mismatch": mismatch,
        },
    )


def compose(terms: InterferogramTerms, scheme: str) -> Interferogram:
    """Combine the terms into a measurable coincidence interferogram.

    auto (both photons in one output, coincidence behind a splitter):
        (Mc + M0 - M1 + M2) / 4
    cross (one photon per output):
        (Mc - M0 - M2) / 2
    """
    if scheme == "auto":
        values = (terms.mc + terms.m0 - terms.m1 + terms.m2) / 4.0
    elif scheme == "cross":
        values = (terms.mc - terms.m0 - terms.m2) / 2.0
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    values = np.where(values < 0.0, np.where(values > -1e-9, 0.0, values), values)
    if np.any(values < 0):
        raise TermConsistencyError("composed probabilities went negative beyond tolerance")
    return Interferogram(
        tau_grid=terms.tau_grid,
        values=values,
        kind=scheme,
        meta={**terms.meta, "scheme": scheme, "mc": terms.mc, "carrier": terms.carrier},
    )


def pair_outcome_probabilities(terms: InterferogramTerms) -> dict[str, np.ndarray]:
    """Probabilities of the pair landing (both in a), (one in each), (both
    in b).  Their sum equals the constant term for every delay."""
    aa = (terms.mc + terms.m0 + terms.m1 + terms.m2) / 4.0
    bb = (terms.mc + terms.m0 - terms.m1 + terms.m2) / 4.0
    ab = (terms.mc - terms.m0 - terms.m2) / 2.0
    return {"aa": aa, "ab": ab, "bb": bb}


@dataclass
class SinglePhotonTerms:
    """Single-photon interferogram pieces: constant baseline and complex
    fringe amplitude with carrier at the spectrum center."""

    tau_grid: np.ndarray
    baseline: float
    fringe: np.ndarray
    carrier: float
    meta: dict = field(default_factory=dict)

    def values(self, port: str = "b") -> np.ndarray:
        if port == "b":
            return self.baseline - np.real(self.fringe)
        if port == "a":
            return self.baseline + np.real(self.fringe)
        raise ConfigError(f"unknown output port {port!r}")

    def to_interferogram(self, port: str = "b") -> Interferogram:
        return Interferogram(
            tau_grid=self.tau_grid,
            values=self.values(port),
            kind="single",
            meta={**self.meta, "port": port, "carrier": self.carrier},
        )

    def with_carrier_phase(self, eps_delay: np.ndarray) -> "SinglePhotonTerms":
        eps = np.asarray(eps_delay, dtype=float)
        if eps.shape != self.tau_grid.shape:
            raise GridError("path-error array must match the delay grid")
        return replace(self, fringe=self.fringe * np.exp(-1j * self.carrier * eps), meta=dict(self.meta))


def single_photon_terms(
    spectrum,
    sample,
    tau_grid,
    *,
    nodes: int = 128,
    check_convergence: bool = False,
) -> SinglePhotonTerms:
    """Single-photon interference integral over the given spectrum.

    For a Gaussian spectrum a Gauss-Hermite rule matched to the line is
    used; tabulated spectra integrate on their own grid by the trapezoid
    rule (normalized to unit area).  ``check_convergence=True`` re-evaluates
    with doubled nodes and raises NonConvergenceError on disagreement.
    """
    tau = np.asarray(tau_grid, dtype=float)
    if isinstance(spectrum, GaussianSpectrum):
        x, w = _hermite_nodes(nodes, spectrum.std)
        omegas = spectrum.center + x
        if np.any(omegas <= 0):
            raise ConfigError("spectrum quadrature nodes reach non-positive frequencies")
        carrier = spectrum.center
    elif isinstance(spectrum, TabulatedSpectrum):
        omegas = spectrum.omega
        w = _trapezoid_weights(omegas) * spectrum.density
        w = w / np.sum(w)
        carrier = spectrum.center_estimate
    else:
        raise ConfigError(f"unsupported spectrum type {type(spectrum).__name__}")

    h = np.asarray(respond(sample, omegas), dtype=complex)
    baseline = float(np.sum(w * (1.0 + np.abs(h) ** 2)) / 4.0)
    wh = w * h
    fringe = np.empty(tau.size, dtype=complex)
    for start in range(0, tau.size, _TAU_CHUNK):
        sl = slice(start, min(start + _TAU_CHUNK, tau.size))
        fringe[sl] = 0.5 * (wh @ np.exp(-1j * np.outer(omegas, tau[sl])))

    if check_convergence and isinstance(spectrum, GaussianSpectrum):
        finer = single_photon_terms(spectrum, sample, tau, nodes=2 * nodes)
        err = np.max(np.abs(fringe - finer.fringe))
        if err > 1e-8 * max(baseline, 1e-30):
            raise NonConvergenceError(
                f"single-photon quadrature not converged (refinement change {err:.3g})"
            )

    return SinglePhotonTerms(
        tau_grid=tau,
        baseline=baseline,
        fringe=fringe,
        carrier=carrier,
        meta={"nodes": int(np.size(omegas))},
    )


def single_photon_interferogram(spectrum, sample, tau_grid, port: str = "b", **kwargs) -> Interferogram:
    """Count-rate interferogram of a single-photon (or classical) source."""
    return single_photon_terms(spectrum, sample, tau_grid, **kwargs).to_interferogram(port)


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2.0
    w[1:] += dx / 2.0
    return w


@dataclass(frozen=True)
class FourierEnvelope:
    """Gaussian envelope of one interferogram term's transform magnitude."""

    center: float
    std: float
    amplitude: float


@dataclass(frozen=True)
class SpectralEnvelopes:
    """Analytic transform-magnitude envelopes of the three delay-dependent
    terms for a single layer, under the e^{-i omega tau}/(2 sqrt(pi)) kernel."""

    hom: FourierEnvelope
    half_pump: FourierEnvelope
    pump: FourierEnvelope
    separation_ok: bool

    def rows(self):
        return [
            ("hom", self.hom),
            ("half_pump", self.half_pump),
            ("pump", self.pump),
        ]


def fourier_magnitudes(src: SpdcSource, layer: SingleLayer) -> SpectralEnvelopes:
    """Centers, widths and amplitudes of the interferogram spectral peaks
    for a single layer, plus a flag telling whether the pair dip peak is
    spectrally separable from the half-pump fringe peak (requires the
    phase-matching bandwidth below a third of the pump frequency)."""
    r = layer.r
    big_r = layer.reflectivity
    sqrt_pi = math.sqrt(math.pi)
    hom = FourierEnvelope(0.0, src.phasematch_std, sqrt_pi * big_r / 2.0)
    half = FourierEnvelope(src.degenerate_center, src.delta_plus / 2.0, sqrt_pi * r * (1.0 + big_r) / 2.0)
    pump = FourierEnvelope(src.pump_center, src.pump_std, sqrt_pi * big_r / 4.0)
    return SpectralEnvelopes(
        hom=hom,
        half_pump=half,
        pump=pump,
        separation_ok=src.phasematch_std < src.pump_center / 3.0,
    )
