"""From ideal interferograms to measured photon-counting traces.

Covers scan plans (piezo step scan / continuous stage scan with hardware
count binning), carrier phase noise from optical-path fluctuations,
detector efficiencies and darks, the output-splitter loss of the
autocorrelation scheme, Poisson shot noise, and multi-run normalization by
summed single-count rates.

Detector wiring follows the three-detector layout: D1 on the recycled
input-side output, D2/D3 behind a 50/50 splitter on the other output.
Auto coincidences are D2-D3; cross coincidences sum D1-D2 and D1-D3;
the classical-style single-count trace is the D2+D3 sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, GridError
from .interferometer import Interferogram, InterferogramTerms, SinglePhotonTerms
from .units import C_M_PER_S, mirror_um_from_tau, tau_from_mirror


@dataclass(frozen=True)
class ScanPlan:
    """Delay-scan protocol.

    span is (tau_start, tau_end) in seconds of optical delay.  Step mode
    dwells ``exposure`` at mirror steps of ``step_size``; continuous mode
    translates at ``velocity`` and bins counts into ``bin_width`` intervals
    (mirror-axis meters).  ``samples_per_bin`` sets the within-bin
    integration resolution of the simulation.
    """

    span: tuple
    mode: str = "step"
    step_size: float = 70e-9
    exposure: float = 0.1
    velocity: float = 16.7e-9
    bin_width: float = 300e-9
    samples_per_bin: int = 600

    def __post_init__(self):
        if self.mode not in ("step", "continuous"):
            raise ConfigError(f"unknown scan mode {self.mode!r}")
        if not self.span[1] > self.span[0]:
            raise ConfigError("scan span is empty")
        if self.mode == "step" and not (self.step_size > 0 and self.exposure > 0):
            raise ConfigError("step mode needs positive step_size and exposure")
        if self.mode == "continuous" and not (
            self.velocity > 0 and self.bin_width > 0 and self.samples_per_bin >= 1
        ):
            raise ConfigError("continuous mode needs positive velocity, bin_width, samples_per_bin")

    def sample_points(self) -> "SamplePoints":
        t0, t1 = self.span
        if self.mode == "step":
            dtau = tau_from_mirror(self.step_size)
            n = int(math.floor((t1 - t0) / dtau + 1e-9)) + 1
            tau = t0 + dtau * np.arange(n)
            return SamplePoints(
                tau=tau,
                dwell=np.full(n, self.exposure),
                bin_index=np.arange(n),
                bin_tau=tau.copy(),
                bin_exposure=np.full(n, self.exposure),
            )
        bin_dtau = tau_from_mirror(self.bin_width)
        n_bins = max(int(math.floor((t1 - t0) / bin_dtau + 1e-9)), 1)
        m = self.samples_per_bin
        sub = (np.arange(m) + 0.5) / m
        tau = (t0 + bin_dtau * (np.arange(n_bins)[:, None] + sub[None, :])).ravel()
        bin_time = self.bin_width / self.velocity
        return SamplePoints(
            tau=tau,
            dwell=np.full(tau.size, bin_time / m),
            bin_index=np.repeat(np.arange(n_bins), m),
            bin_tau=t0 + bin_dtau * (np.arange(n_bins) + 0.5),
            bin_exposure=np.full(n_bins, bin_time),
        )


@dataclass(frozen=True)
class SamplePoints:
    """Simulation grid of a scan: fine acquisition samples plus the mapping
    onto recorded points (identity for step scans, count bins otherwise)."""

    tau: np.ndarray
    dwell: np.ndarray
    bin_index: np.ndarray
    bin_tau: np.ndarray
    bin_exposure: np.ndarray

    @property
    def positions_um(self) -> np.ndarray:
        return mirror_um_from_tau(self.bin_tau)


@dataclass(frozen=True)
class NoiseModel:
    """Acquisition noise and calibration parameters.

    path_jitter_std: rms optical-path error per acquisition sample (m),
    white in sample index.  drift_rate: rms slow path drift per unit of
    scanned optical path (dimensionless), an integrated AR(1)-velocity
    process with correlation length ``drift_correlation`` samples; this is
    the component that broadens fringe carriers in proportion to their
    frequency.  pair_rate is the generated pair rate (1/s) calibrating
    absolute count rates.
    """

    pair_rate: float = 1e6
    path_jitter_std: float = 0.0
    drift_rate: float = 0.0
    drift_correlation: int = 64
    efficiencies: tuple = (1.0, 1.0, 1.0)
    dark_rates: tuple = (0.0, 0.0, 0.0)
    coincidence_window: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if any(not 0.0 <= e <= 1.0 for e in self.efficiencies):
            raise ConfigError("detector efficiencies must be in [0, 1]")
        if (
            self.pair_rate < 0
            or self.path_jitter_std < 0
            or self.drift_rate < 0
            or any(d < 0 for d in self.dark_rates)
            or self.coincidence_window < 0
        ):
            raise ConfigError("noise rates must be non-negative")
        if self.drift_correlation < 1:
            raise ConfigError("drift_correlation must be >= 1 sample")


def sample_path_error(tau_grid, rng, jitter_std=0.0, drift_rate=0.0, drift_correlation=64):
    """Per-sample optical-path error in seconds of delay.

    White component: iid Normal(0, jitter_std/c) per sample.  Drift
    component: path velocity follows a stationary AR(1) sequence with the
    given correlation length; its integral over the scanned delay is scaled
    by ``drift_rate``.
    """
    tau = np.asarray(tau_grid, dtype=float)
    eps = np.zeros(tau.size)
    if jitter_std > 0:
        eps += rng.normal(0.0, jitter_std / C_M_PER_S, tau.size)
    if drift_rate > 0 and tau.size > 1:
        rho = math.exp(-1.0 / drift_correlation)
        scale = math.sqrt(1.0 - rho * rho)
        xi = rng.standard_normal(tau.size)
        xi[0] /= scale  # stationary start
        v = lfilter([scale], [1.0, -rho], xi)
        dtau = np.diff(tau, prepend=tau[0])
        eps += drift_rate * np.cumsum(v * dtau)
    return eps


def apply_phase_jitter(
    terms: InterferogramTerms,
    jitter_std: float,
    seed,
    *,
    drift_rate: float = 0.0,
    drift_correlation: int = 64,
) -> InterferogramTerms:
    """Apply random optical-path phase errors to the oscillatory terms.

    The carrier at half the pump frequency is rotated by that frequency
    times the path error, the pump-frequency carrier by twice as much; the
    constant and envelope-only terms are left untouched (their femtosecond-
    scale envelope shift is negligible against the dip width).
    """
    if jitter_std == 0.0 and drift_rate == 0.0:
        return terms
    rng = np.random.default_rng(seed)
    eps = sample_path_error(
        terms.tau_grid, rng, jitter_std, drift_rate, drift_correlation
    )
    return terms.with_carrier_phase(eps)


def singles_rates(sp_terms: SinglePhotonTerms, noise: NoiseModel) -> dict[str, np.ndarray]:
    """Expected single-count rates (1/s) at the three detectors."""
    eta1, eta2, eta3 = noise.efficiencies
    d1, d2, d3 = noise.dark_rates
    m_a = sp_terms.values("a")
    m_b = sp_terms.values("b")
    return {
        "D1": noise.pair_rate * 2.0 * m_a * eta1 + d1,
        "D2": noise.pair_rate * m_b * eta2 + d2,
        "D3": noise.pair_rate * m_b * eta3 + d3,
    }


def detection_rates(
    ifg: Interferogram,
    scheme: str,
    noise: NoiseModel,
    singles: dict[str, np.ndarray] | None = None,
) -> np.ndarray:
    """Expected detected rate (1/s) for a measurement scheme.

    auto:   pair_rate * p * eta2*eta3 / 2   (output splitter halves the
            coincidence yield) plus the D2-D3 accidental floor;
    cross:  pair_rate * p * eta1*(eta2+eta3)/2 plus D1-D2 and D1-D3
            accidentals;
    single: D2+D3 summed count rate, twice the per-photon output
            probability times the pair rate.

    Accidentals are singles-rate products times the coincidence window;
    with no singles traces supplied, dark rates alone set the floor.
    """
    if scheme != ifg.kind:
        raise ConfigError(f"interferogram kind {ifg.kind!r} does not match scheme {scheme!r}")
    eta1, eta2, eta3 = noise.efficiencies
    d1, d2, d3 = noise.dark_rates
    w = noise.coincidence_window
    if singles is None:
        r1 = np.full_like(ifg.values, d1)
        r2 = np.full_like(ifg.values, d2)
        r3 = np.full_like(ifg.values, d3)
    else:
        r1, r2, r3 = singles["D1"], singles["D2"], singles["D3"]
    if scheme == "auto":
        return noise.pair_rate * ifg.values * eta2 * eta3 / 2.0 + w * r2 * r3
    if scheme == "cross":
        return (
            noise.pair_rate * ifg.values * eta1 * (eta2 + eta3) / 2.0
            + w * r1 * (r2 + r3)
        )
    if scheme == "single":
        return noise.pair_rate * 2.0 * ifg.values * (eta2 + eta3) / 2.0 + d2 + d3
    raise ConfigError(f"unknown scheme {scheme!r}")


@dataclass
class MeasuredTrace:
    """Recorded counts per scan point or bin for one logical channel."""

    positions_um: np.ndarray
    counts: np.ndarray
    exposure_s: np.ndarray
    channel: str
    meta: dict = field(default_factory=dict)

    def rates(self) -> np.ndarray:
        return self.counts / self.exposure_s


def simulate_scan(rates, plan: ScanPlan, seed, channel: str = "counts") -> MeasuredTrace:
    """Poisson-sample a rate trace according to the scan plan.

    ``rates`` is either an array aligned with ``plan.sample_points().tau``
    or an Interferogram-like object carrying its own grid (interpolated;
    the plan span must lie inside it).  Continuous mode integrates the rate
    across each bin before drawing counts, which is what averages carrier
    fringes out in hardware.
    """
    pts = plan.sample_points()
    if isinstance(rates, Interferogram):
        grid, values = rates.tau_grid, rates.values
        if pts.tau[0] < grid[0] - 1e-18 or pts.tau[-1] > grid[-1] + 1e-18:
            raise GridError("scan span extends outside the rate trace grid")
        rate = np.interp(pts.tau, grid, values)
    else:
        rate = np.asarray(rates, dtype=float)
        if rate.shape != pts.tau.shape:
            raise GridError(
                f"rate array length {rate.size} does not match plan samples {pts.tau.size}"
            )
    expected = np.bincount(pts.bin_index, weights=rate * pts.dwell, minlength=pts.bin_tau.size)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(expected)
    return MeasuredTrace(
        positions_um=pts.positions_um,
        counts=counts.astype(np.int64),
        exposure_s=pts.bin_exposure.copy(),
        channel=channel,
        meta={"mode": plan.mode},
    )


@dataclass
class Run:
    """One scan repetition: all channels on a shared position grid."""

    positions_um: np.ndarray
    traces: dict[str, MeasuredTrace]
    seed: int
    meta: dict = field(default_factory=dict)


@dataclass
class RunSet:
    """Repeated scans sharing a position grid."""

    runs: list

    def __post_init__(self):
        if not self.runs:
            raise ConfigError("RunSet needs at least one run")
        ref = self.runs[0].positions_um
        for run in self.runs[1:]:
            if run.positions_um.shape != ref.shape or not np.allclose(run.positions_um, ref):
                raise ConfigError("all runs must share the scan grid")
        for run in self.runs:
            for tr in run.traces.values():
                if np.any(tr.counts < 0):
                    raise ConfigError("counts must be non-negative")

    @property
    def positions_um(self) -> np.ndarray:
        return self.runs[0].positions_um

    def channels(self) -> list[str]:
        return list(self.runs[0].traces)

    def stack(self, channel: str) -> np.ndarray:
        return np.stack([run.traces[channel].counts for run in self.runs])


@dataclass
class IdealTraces:
    """Noise-free terms evaluated on a plan's sample grid, reusable across
    repeated runs."""

    plan: ScanPlan
    points: SamplePoints
    terms: InterferogramTerms
    single: SinglePhotonTerms | None


def prepare_ideal(src, sample, plan: ScanPlan, *, schemes=("cross", "auto"), want_singles=True,
                  nodes: int = 64, engine: str | None = None) -> IdealTraces:
    """Evaluate interferogram terms once on the plan's acquisition grid."""
    from .interferometer import closed_form_terms, quadrature_terms, single_photon_terms
    from .sample import SingleLayer
    from .spectra import marginal

    pts = plan.sample_points()
    if engine is None:
        engine = "closed_form" if isinstance(sample, SingleLayer) else "quadrature"
    if engine == "closed_form":
        terms = closed_form_terms(src, sample, pts.tau)
    else:
        terms = quadrature_terms(
            src, sample, pts.tau, nodes=nodes, include_half_fringe="auto" in schemes
        )
    single = single_photon_terms(marginal(src), sample, pts.tau) if want_singles else None
    return IdealTraces(plan=plan, points=pts, terms=terms, single=single)


def measure_run(ideal: IdealTraces, noise: NoiseModel, seed, schemes=("cross", "auto")) -> Run:
    """One noisy acquisition of the prepared ideal traces.

    The same path-error realization rotates the pair-fringe and
    single-count carriers (one physical path), then every channel is
    Poisson-sampled with its own child stream.
    """
    from .interferometer import compose

    ss = np.random.SeedSequence(seed)
    eps_seed, *count_seeds = ss.spawn(6)
    eps = sample_path_error(
        ideal.points.tau,
        np.random.default_rng(eps_seed),
        noise.path_jitter_std,
        noise.drift_rate,
        noise.drift_correlation,
    )
    terms = ideal.terms.with_carrier_phase(eps)
    traces: dict[str, MeasuredTrace] = {}
    singles = None
    if ideal.single is not None:
        sp = ideal.single.with_carrier_phase(eps)
        singles = singles_rates(sp, noise)
        for k, name in enumerate(("D1", "D2", "D3")):
            traces[name] = simulate_scan(singles[name], ideal.plan, count_seeds[k], channel=name)
    for k, scheme in enumerate(schemes):
        ifg = compose(terms, scheme)
        rate = detection_rates(ifg, scheme, noise, singles=singles)
        traces[scheme] = simulate_scan(rate, ideal.plan, count_seeds[3 + k], channel=scheme)
    positions = next(iter(traces.values())).positions_um
    seed_val = int(seed) if isinstance(seed, (int, np.integer)) else -1
    return Run(positions_um=positions, traces=traces, seed=seed_val, meta={"schemes": list(schemes)})


def simulate_runs(src, sample, plan: ScanPlan, noise: NoiseModel, n_runs: int, seed,
                  schemes=("cross", "auto"), *, want_singles=True, nodes: int = 64,
                  engine: str | None = None) -> RunSet:
    """Repeat the measurement ``n_runs`` times with independent noise."""
    ideal = prepare_ideal(src, sample, plan, schemes=schemes, want_singles=want_singles,
                          nodes=nodes, engine=engine)
    children = np.random.SeedSequence(seed).spawn(n_runs)
    runs = [measure_run(ideal, noise, child, schemes=schemes) for child in children]
    return RunSet(runs=runs)


@dataclass
class NormalizedRuns:
    """Brightness-normalized traces: every channel divided by the pointwise
    weighted singles sum over its trace average."""

    positions_um: np.ndarray
    values: dict[str, list]
    kappa2: float
    kappa3: float
    r_norm: list

    def mean(self, channel: str) -> np.ndarray:
        return np.mean(np.stack(self.values[channel]), axis=0)


def normalize_runs(runset: RunSet) -> NormalizedRuns:
    """Normalize away slow source-brightness drifts across repeated runs.

    Weights kappa2, kappa3 balance the three single-count channels so the
    D1 average equals twice each weighted partner average (pooled over all
    runs); each trace is then divided pointwise by the weighted singles sum
    over its own trace mean.
    """
    for name in ("D1", "D2", "D3"):
        if name not in runset.channels():
            raise ConfigError("normalization needs D1, D2, D3 single-count traces")
    r1_runs = [run.traces["D1"].rates() for run in runset.runs]
    r2_runs = [run.traces["D2"].rates() for run in runset.runs]
    r3_runs = [run.traces["D3"].rates() for run in runset.runs]
    mean_r1 = float(np.mean(np.concatenate(r1_runs)))
    mean_r2 = float(np.mean(np.concatenate(r2_runs)))
    mean_r3 = float(np.mean(np.concatenate(r3_runs)))
    if mean_r2 <= 0 or mean_r3 <= 0 or mean_r1 <= 0:
        raise ConfigError("zero-mean detector channel; cannot normalize")
    kappa2 = mean_r1 / (2.0 * mean_r2)
    kappa3 = mean_r1 / (2.0 * mean_r3)

    values: dict[str, list] = {ch: [] for ch in runset.channels()}
    r_norms = []
    for run, r1, r2, r3 in zip(runset.runs, r1_runs, r2_runs, r3_runs):
        s = r1 + kappa2 * r2 + kappa3 * r3
        r_norm = s / np.mean(s)
        r_norms.append(r_norm)
        for ch, tr in run.traces.items():
            values[ch].append(tr.counts / r_norm)
    return NormalizedRuns(
        positions_um=runset.positions_um,
        values=values,
        kappa2=kappa2,
        kappa3=kappa3,
        r_norm=r_norms,
    )
