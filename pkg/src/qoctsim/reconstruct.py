"""Two-interface sample reconstruction from a filtered coincidence trace.

The gap between the interfaces shows up as five equally spaced features
(spacing d/2): direct reflections of the two interfaces, internal-echo
dips, and interference cross terms between pairs of reflections, which sit
at midpoints and can be negative (peaks).  A five-Gaussian model fit
localizes the features; a physical amplitude model maps the fitted
amplitudes to interface reflection/transmission coefficients; a refit with
frozen amplitudes extracts the gap with its uncertainty.

Amplitude sign convention: dips positive.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonConvergenceError
from .fitting import FitResult, damped_least_squares
from .units import STD_TO_FWHM


@dataclass
class FeatureModel:
    """Physical amplitude model of the five features.

    amplitude: common scale (trace units); r1, r2: interface reflection
    amplitudes; t1: first-interface transmission amplitude; phi0: carrier
    phase accumulated across the gap (rad).  Gauge: r1 real non-negative
    and r2 real signed, with residual phases carried by phi0 and by the
    transmission phase.  |t1| is a field coefficient and may exceed 1.
    """

    amplitude: float
    r1: complex
    r2: complex
    t1: complex
    phi0: float
    gap_um: float = float("nan")
    x1_um: float = float("nan")
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "amplitude": abs(self.amplitude),
            "r1": _c2pair(self.r1),
            "r2": _c2pair(self.r2),
            "t1": _c2pair(self.t1),
            "phi0_rad": self.phi0,
            "gap_um": self.gap_um,
            "x1_um": self.x1_um,
            "degenerate": self.degenerate,
        }


def _c2pair(z):
    z = complex(z)
    return [z.real, z.imag] if z.imag else z.real


def reflection_chain(model: FeatureModel) -> list:
    """Effective reflection amplitudes of the successive dips.

    First the direct front-interface reflection, then the transmitted
    second-interface reflection, then one extra internal round trip per
    echo."""
    r1, r2, t1 = complex(model.r1), complex(model.r2), complex(model.t1)
    chain = [r1, r1 * r2 * t1**2]
    for _ in range(3, 6):
        chain.append(chain[-1] * r1 * r2)
    return chain


def predict_amplitudes(model: FeatureModel) -> np.ndarray:
    """Signed amplitudes of the five trace features (dips positive).

    Slots at x1 + (j-1)*d/2: direct dip; 1-2 cross term; second dip plus
    1-3 cross; 2-3 and 1-4 crosses; first echo plus 2-4 and 1-5 crosses.
    Cross terms between dips k and l carry the relative carrier phase
    (k - l)*phi0 and may be negative.
    """
    a = model.amplitude
    rt = reflection_chain(model)

    def dip(k):
        return 0.5 * a * abs(rt[k - 1]) ** 2

    def cross(k, l):
        return a * (rt[k - 1] * rt[l - 1].conjugate() * cmath.exp(1j * (k - l) * model.phi0)).real

    return np.array(
        [
            dip(1),
            cross(1, 2),
            dip(2) + cross(1, 3),
            cross(2, 3) + cross(1, 4),
            dip(3) + cross(2, 4) + cross(1, 5),
        ]
    )


@dataclass
class ReconFit:
    """Five-Gaussian interferogram model parameters.

    Features sit at x1 + (j-1)*gap/2 for j = 1..5 with shared width sigma;
    trace model: baseline - sum_j A_j * G_j + slope * x (dips positive).
    """

    baseline: float
    amplitudes: np.ndarray
    sigma_um: float
    x1_um: float
    gap_um: float
    slope: float
    gap_identifiable: bool = True
    meta: dict = field(default_factory=dict)

    def centers(self) -> np.ndarray:
        return self.x1_um + 0.5 * self.gap_um * np.arange(5)

    def trace(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.baseline + self.slope * x
        for amp, c in zip(self.amplitudes, self.centers()):
            y = y - amp * np.exp(-0.5 * ((x - c) / self.sigma_um) ** 2)
        return y

    def as_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "amplitudes": list(map(float, self.amplitudes)),
            "sigma_um": self.sigma_um,
            "x1_um": self.x1_um,
            "gap_um": self.gap_um,
            "slope": self.slope,
            "gap_identifiable": self.gap_identifiable,
            "feature_centers_um": list(map(float, self.centers())),
        }


def find_features(positions_um, values, prominence_sigmas: float = 3.0, min_separation_um: float = 2.0):
    """Locate dip/peak candidates on a detrended trace.

    Robust baseline: median; noise scale: scaled median absolute deviation
    of the first differences.  Returns (positions, signed amplitudes),
    dips positive, ordered by position.
    """
    x = np.asarray(positions_um, dtype=float)
    y = np.asarray(values, dtype=float)
    coeffs = np.polyfit(x, y, 1)
    dev = np.polyval(coeffs, x) - y  # dips positive
    noise = 1.4826 * np.median(np.abs(np.diff(dev))) / math.sqrt(2.0)
    if noise == 0:
        noise = 1e-12 * max(np.max(np.abs(dev)), 1.0)
    threshold = prominence_sigmas * noise

    candidates = []
    for i in range(1, x.size - 1):
        if abs(dev[i]) >= abs(dev[i - 1]) and abs(dev[i]) > abs(dev[i + 1]) and abs(dev[i]) > threshold:
            candidates.append((abs(dev[i]), x[i], dev[i]))
    candidates.sort(reverse=True)
    kept: list = []
    for _, xi, ai in candidates:
        if all(abs(xi - xk) >= min_separation_um for xk, _ in kept):
            kept.append((xi, ai))
    kept.sort()
    if not kept:
        return np.array([]), np.array([])
    pos, amp = zip(*kept)
    return np.array(pos), np.array(amp)


def fit_reconstruction(positions_um, values, init: ReconFit | None = None) -> tuple[ReconFit, FitResult]:
    """Fit the five-feature model to a filtered trace.

    Without an explicit ``init``, the first feature position and the gap
    are seeded by peak picking (features spaced by half the gap).  Raises
    NonConvergenceError when the optimizer fails or the fitted gap
    collapses below four feature widths.
    """
    x = np.asarray(positions_um, dtype=float)
    y = np.asarray(values, dtype=float)
    if init is None:
        init = _initial_guess(x, y)
    if not init.gap_identifiable:
        single = _fit_single_feature(x, y, init)
        return single

    p0 = np.concatenate(
        [[init.baseline], init.amplitudes, [init.sigma_um, init.x1_um, init.gap_um, init.slope]]
    )
    names = ["baseline", "a1", "a2", "a3", "a4", "a5", "sigma", "x1", "d", "slope"]

    def model(p):
        return ReconFit(p[0], p[1:6], p[6], p[7], p[8], p[9]).trace(x)

    span = x[-1] - x[0]
    result = damped_least_squares(
        model,
        p0,
        y,
        bounds=[(None, None)] * 6 + [(1e-3, span), (x[0] - span, x[-1] + span), (1e-3, span), (None, None)],
        names=names,
        max_iter=400,
    )
    recon = ReconFit(
        baseline=result["baseline"],
        amplitudes=result.values[1:6].copy(),
        sigma_um=result["sigma"],
        x1_um=result["x1"],
        gap_um=result["d"],
        slope=result["slope"],
    )
    if recon.gap_um < 4.0 * recon.sigma_um:
        raise NonConvergenceError(
            f"fitted gap {recon.gap_um:.3g} µm below 4 feature widths "
            f"({recon.sigma_um:.3g} µm); unresolvable"
        )
    return recon, result


def _initial_guess(x, y) -> ReconFit:
    pos, amp = find_features(x, y)
    coeffs = np.polyfit(x, y, 1)
    baseline = float(np.polyval(coeffs, x).mean())
    slope = float(coeffs[0])
    if pos.size < 2:
        sigma0 = (x[-1] - x[0]) / 20.0
        x1 = float(pos[0]) if pos.size else float(x[np.argmin(y)])
        a1 = float(amp[0]) if amp.size else float(np.median(y) - y.min())
        return ReconFit(
            baseline=baseline,
            amplitudes=np.array([a1, 0, 0, 0, 0], dtype=float),
            sigma_um=sigma0,
            x1_um=x1,
            gap_um=float("nan"),
            slope=slope,
            gap_identifiable=False,
        )
    spacing = float(np.median(np.diff(pos)))
    gap0 = 2.0 * spacing
    x1 = float(pos[0])
    centers = x1 + 0.5 * gap0 * np.arange(5)
    amps0 = np.zeros(5)
    for p, a in zip(pos, amp):
        j = int(round((p - x1) / (0.5 * gap0)))
        if 0 <= j < 5:
            amps0[j] = a
    sigma0 = max(spacing / 6.0, float(x[1] - x[0]))
    return ReconFit(
        baseline=baseline,
        amplitudes=amps0,
        sigma_um=sigma0,
        x1_um=x1,
        gap_um=gap0,
        slope=slope,
        meta={"picked_features": pos.tolist()},
    )


def _fit_single_feature(x, y, init: ReconFit) -> tuple[ReconFit, FitResult]:
    def model(p):
        base, a1, sigma, x1, slope = p
        return base + slope * x - a1 * np.exp(-0.5 * ((x - x1) / sigma) ** 2)

    result = damped_least_squares(
        model,
        [init.baseline, init.amplitudes[0], init.sigma_um, init.x1_um, init.slope],
        y,
        bounds=[(None, None), (None, None), (1e-3, None), (x[0], x[-1]), (None, None)],
        names=["baseline", "a1", "sigma", "x1", "slope"],
    )
    recon = ReconFit(
        baseline=result["baseline"],
        amplitudes=np.array([result["a1"], 0, 0, 0, 0]),
        sigma_um=result["sigma"],
        x1_um=result["x1"],
        gap_um=float("nan"),
        slope=result["slope"],
        gap_identifiable=False,
    )
    return recon, result


def refit_with_fixed_amplitudes(positions_um, values, recon: ReconFit, amplitudes) -> tuple[ReconFit, FitResult]:
    """Refit the trace with the five amplitudes frozen to model values;
    only baseline, width, positions, and slope stay free."""
    x = np.asarray(positions_um, dtype=float)
    y = np.asarray(values, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    p0 = np.concatenate(
        [[recon.baseline], amplitudes, [recon.sigma_um, recon.x1_um, recon.gap_um, recon.slope]]
    )
    names = ["baseline", "a1", "a2", "a3", "a4", "a5", "sigma", "x1", "d", "slope"]
    fixed = [False] + [True] * 5 + [False, False, False, False]

    def model(p):
        return ReconFit(p[0], p[1:6], p[6], p[7], p[8], p[9]).trace(x)

    result = damped_least_squares(model, p0, y, fixed_mask=fixed, names=names, max_iter=400)
    refit = ReconFit(
        baseline=result["baseline"],
        amplitudes=amplitudes.copy(),
        sigma_um=result["sigma"],
        x1_um=result["x1"],
        gap_um=result["d"],
        slope=result["slope"],
    )
    return refit, result


def approximate_physical(
    amplitudes,
    amplitude_fixed: float | None = None,
    n_phase_starts: int = 5,
) -> tuple[FeatureModel, FitResult]:
    """Least-squares map from the five fitted amplitudes to the physical
    model (A, r1, r2, t1, phi0).

    Gauge: r1 and r2 real (r2 signed), the transmission complex.  The
    transmission phase is a genuine degree of freedom: it decouples the
    dip-to-dip step phase from the echo step phase, without which the
    observed amplitude patterns are unreachable.  |t1| may exceed 1 (field
    transmission into the rarer medium does); reflection amplitudes beyond
    1 are rejected by bounds.  ``amplitude_fixed`` pins the overall scale,
    which removes the scale gauge freedom and makes the magnitudes
    identifiable.  Deterministic multistart over both step phases;
    per-slot residuals are reported in ``extras``.
    """
    amps = np.asarray(amplitudes, dtype=float)
    if amps.shape != (5,):
        raise ConfigError("expected five feature amplitudes")
    scale = float(np.max(np.abs(amps)))
    if scale == 0.0:
        model = FeatureModel(amplitude=0.0, r1=0, r2=0, t1=0, phi0=0.0, degenerate=True)
        fit = FitResult(["A", "r1", "r2", "t1_mag", "t1_phase", "phi0"], np.zeros(6),
                        np.zeros(6), np.zeros((6, 6)), 0.0, 0, True, 0.0,
                        extras={"degenerate": True, "predicted": [0.0] * 5,
                                "per_row_residual": [0.0] * 5})
        return model, fit

    def unpack(p):
        a, r1, r2, t1m, t1p, phi0 = p
        return FeatureModel(a, r1, r2, t1m * cmath.exp(1j * t1p), phi0)

    def model_vec(p):
        return predict_amplitudes(unpack(p))

    fixed = [amplitude_fixed is not None] + [False] * 5
    r1_starts = (0.25, 0.5, 0.8)
    best = None
    for r1_0 in r1_starts:
        a0 = amplitude_fixed if amplitude_fixed is not None else 2.0 * abs(amps[0]) / r1_0**2
        if a0 <= 0:
            a0 = 2.0 * scale
        for k1 in range(n_phase_starts):
            for k2 in range(n_phase_starts):
                p0 = [
                    a0,
                    r1_0,
                    0.6,
                    1.0,
                    2.0 * math.pi * k1 / n_phase_starts,
                    2.0 * math.pi * k2 / n_phase_starts,
                ]
                try:
                    res = damped_least_squares(
                        model_vec,
                        p0,
                        amps,
                        bounds=[(1e-12, None), (1e-6, 1.0), (-1.0, 1.0), (0.0, 4.0),
                                (None, None), (None, None)],
                        fixed_mask=fixed,
                        names=["A", "r1", "r2", "t1_mag", "t1_phase", "phi0"],
                        raise_on_failure=False,
                    )
                except NonConvergenceError:
                    continue
                if best is None or res.residual_norm < best.residual_norm - 1e-12:
                    best = res
    if best is None:
        raise NonConvergenceError("physical amplitude approximation failed from every start")
    model = unpack(best.values)
    model.phi0 %= 2.0 * math.pi
    predicted = predict_amplitudes(model)
    best.extras["predicted"] = predicted.tolist()
    best.extras["per_row_residual"] = (amps - predicted).tolist()
    return model, best


def extract_gap(recon: ReconFit, fit: FitResult) -> tuple[float, float]:
    """Gap and its 1-sigma uncertainty from a (re)fit result."""
    if not recon.gap_identifiable:
        raise NonConvergenceError("gap is not identifiable from a single feature")
    return float(recon.gap_um), float(fit.sigma("d"))


@dataclass
class ReconstructionResult:
    """Full reconstruction chain output."""

    initial: ReconFit
    initial_fit: FitResult
    model: FeatureModel
    refit: ReconFit
    refit_result: FitResult
    gap_um: float
    gap_sigma_um: float

    def as_dict(self) -> dict:
        rows = []
        predicted = self.model and predict_amplitudes(self.model)
        for j, (fitted, pred) in enumerate(zip(self.initial.amplitudes, predicted), start=1):
            rows.append(
                {
                    "feature": j,
                    "position_um": float(self.refit.centers()[j - 1]),
                    "fitted_amplitude": float(fitted),
                    "model_amplitude": float(pred),
                }
            )
        return {
            "gap_um": self.gap_um,
            "gap_sigma_um": self.gap_sigma_um,
            "sigma_um": self.refit.sigma_um,
            "sigma_fwhm_um": STD_TO_FWHM * self.refit.sigma_um,
            "x1_um": self.refit.x1_um,
            "five_gaussian_fit": self.initial.as_dict(),
            "physical_model": self.model.as_dict(),
            "amplitude_table": rows,
            "initial_fit": self.initial_fit.as_dict(),
            "refit": self.refit_result.as_dict(),
        }


def reconstruct_gap(positions_um, values, init: ReconFit | None = None) -> ReconstructionResult:
    """End-to-end reconstruction: five-feature fit, physical amplitude
    approximation, frozen-amplitude refit, gap extraction."""
    recon, fit = fit_reconstruction(positions_um, values, init=init)
    if not recon.gap_identifiable:
        raise NonConvergenceError("gap is not identifiable: fewer than two features found")
    model, model_fit = approximate_physical(recon.amplitudes)
    model.gap_um = recon.gap_um
    model.x1_um = recon.x1_um
    refit, refit_result = refit_with_fixed_amplitudes(
        positions_um, values, recon, predict_amplitudes(model)
    )
    gap, gap_sigma = extract_gap(refit, refit_result)
    model.gap_um = gap
    return ReconstructionResult(
        initial=recon,
        initial_fit=fit,
        model=model,
        refit=refit,
        refit_result=refit_result,
        gap_um=gap,
        gap_sigma_um=gap_sigma,
    )
