"""Time-domain Monte Carlo oracle for the analytic PSD engine.

User signals are synthesised block by block in the frequency domain, so each
block of ``L`` samples is one period of a circularly-stationary Gaussian process
whose discrete PSD is exactly the spectrum grid. All delays (precoder advances and
propagation) are circular phase ramps on those blocks, which makes the expected
Welch estimate of the received signal computable exactly from the analytic PSD
(:func:`expected_welch`).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps
from scipy import stats

from .engine import Scenario, psd_at_frequency
from .errors import BeamspotError, GridError
from .geometry import ArrayDescriptor, CarrierConfig
from .pa import PaPolynomial, amplify
from .precoder import MfWeights, UserSet
from .signals import SpectrumGrid, lag_to_spectrum, spectrum_to_lag


@dataclass(frozen=True)
class TimeSeries:
    sample_rate: float
    samples: np.ndarray = field(repr=False)
    seed: int | None = None
    block_length: int | None = None

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class WelchConfig:
    segment_length: int = 512
    overlap: float = 0.0
    window: str = "hann"
    num_segments: int | None = None

    def __post_init__(self):
        n = self.segment_length
        if n < 2 or n & (n - 1):
            raise ValueError("segment_length must be a power of two")
        if not 0.0 <= self.overlap <= 0.9:
            raise ValueError("overlap must lie in [0, 0.9]")

    @property
    def hop(self) -> int:
        return max(1, int(round(self.segment_length * (1 - self.overlap))))

    def taper(self) -> np.ndarray:
        return sps.get_window(self.window, self.segment_length, fftbins=True)


@dataclass(frozen=True)
class PsdEstimate:
    spectrum: SpectrumGrid
    stderr: np.ndarray = field(repr=False)
    num_segments: int


def user_generators(seed: int, num_users: int) -> list[np.random.Generator]:
    """Independent counter-based streams, one per user."""
    children = np.random.SeedSequence(seed).spawn(num_users)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _block_spectra(spectrum: SpectrumGrid, rng: np.random.Generator, num_blocks: int) -> np.ndarray:
    """Frequency-domain blocks (unshifted FFT order) of a Gaussian process with PSD ``spectrum``."""
    n = spectrum.num_points
    fs = spectrum.span_hz
    var = np.clip(np.fft.ifftshift(spectrum.values.real), 0, None) * n * fs
    noise = rng.standard_normal((num_blocks, n, 2)).view(complex)[..., 0] * np.sqrt(0.5)
    return noise * np.sqrt(var)


def generate_user_signal(spectrum: SpectrumGrid, length: int, seed: int) -> TimeSeries:
    """Circularly-symmetric Gaussian samples at ``spectrum.span_hz`` with the given PSD.

    ``length`` must be a multiple of the grid size; each block of that size is
    periodic and independent of the others.
    """
    n = spectrum.num_points
    if length % n:
        raise GridError(f"length {length} is not a multiple of the block length {n}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    blocks = np.fft.ifft(_block_spectra(spectrum, rng, length // n), axis=-1)
    return TimeSeries(spectrum.span_hz, blocks.reshape(-1), seed, n)


def _fft_omega(n: int, sample_rate: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(n, 1 / sample_rate)


def _advance(blocks_f: np.ndarray, omega: np.ndarray, tau) -> np.ndarray:
    """Time-domain blocks advanced by ``tau`` (``s(t + tau)``)."""
    return np.fft.ifft(blocks_f * np.exp(1j * omega * tau), axis=-1)


def synthesize_pa_input(users: list[TimeSeries], weights: MfWeights, m: int, n: int) -> TimeSeries:
    """``x_{m,n}(t) = sum_k s_k(t + tau_m^k) exp(j (phi_m^k n + psi_m^k))``."""
    block = users[0].block_length or users[0].samples.size
    fs = users[0].sample_rate
    omega = _fft_omega(block, fs)
    if np.any(np.abs(weights.tau[m]) * fs >= block / 2):
        raise GridError("precoder advance exceeds half a block")
    out = np.zeros(users[0].samples.size, dtype=complex)
    for k, s in enumerate(users):
        blocks_f = np.fft.fft(s.samples.reshape(-1, block), axis=-1)
        adv = _advance(blocks_f, omega, weights.tau[m, k]).reshape(-1)
        out += adv * np.exp(1j * (weights.phi[m, k] * n + weights.psi[m, k]))
    return TimeSeries(fs, out, None, block)


def simulate_received(
    scenario: Scenario, observer, num_samples: int, seed: int, batch_blocks: int = 32
) -> TimeSeries:
    """Received baseband signal at ``observer`` under the full nonlinear chain.

    Blocks are processed in batches to bound memory; the result depends only on
    ``seed`` and not on ``batch_blocks``.
    """
    spec = scenario.spectrum
    n = spec.num_points
    if num_samples % n:
        raise GridError(f"num_samples {num_samples} is not a multiple of the block length {n}")
    fs = spec.span_hz
    omega = _fft_omega(n, fs)
    w = scenario.weights
    obs = scenario.observer_links(observer)
    if max(np.max(np.abs(w.tau)), max(l.tau for l in obs)) * fs >= n / 2:
        raise GridError("delays exceed half a block; enlarge the grid")
    gens = user_generators(seed, scenario.num_users)
    num_blocks = num_samples // n
    out = np.empty((num_blocks, n), dtype=complex)
    for start in range(0, num_blocks, batch_blocks):
        count = min(batch_blocks, num_blocks - start)
        users_f = [np.sqrt(p) * _block_spectra(spec, g, count) for p, g in zip(scenario.users.powers, gens)]
        acc = np.zeros((count, n), dtype=complex)
        for m, arr in enumerate(scenario.arrays):
            idx = np.arange(arr.num_antennas)
            x = np.zeros((arr.num_antennas, count, n), dtype=complex)
            for k, uf in enumerate(users_f):
                adv = _advance(uf, omega, w.tau[m, k])
                x += np.exp(1j * (w.phi[m, k] * idx + w.psi[m, k]))[:, None, None] * adv
            y = amplify(x, scenario.pa)
            z = np.einsum("n,nbl->bl", np.exp(-1j * obs[m].phi * idx), y)
            delayed = np.fft.ifft(np.fft.fft(z, axis=-1) * np.exp(-1j * omega * obs[m].tau), axis=-1)
            acc += obs[m].beta * delayed
        out[start : start + count] = acc
    return TimeSeries(fs, out.reshape(-1), seed, n)


def estimate_psd(series: TimeSeries, cfg: WelchConfig = WelchConfig()) -> PsdEstimate:
    """Two-sided Welch PSD (per Hz, equal to ``S(w)`` in the package convention).

    Segments never straddle the block boundaries of block-synthesised series.
    Standard errors come from the spread of the segment periodograms.
    """
    seg = cfg.segment_length
    x = series.samples
    block = series.block_length or x.size
    if block < seg or x.size < seg:
        raise BeamspotError(f"series of {x.size} samples (blocks of {block}) is shorter than a segment ({seg})")
    blocks = x[: (x.size // block) * block].reshape(-1, block)
    starts = np.arange(0, block - seg + 1, cfg.hop)
    segments = np.lib.stride_tricks.sliding_window_view(blocks, seg, axis=-1)[:, starts, :].reshape(-1, seg)
    if cfg.num_segments is not None:
        segments = segments[: cfg.num_segments]
    taper = cfg.taper()
    scale = series.sample_rate * np.sum(taper**2)
    pgrams = np.abs(np.fft.fft(segments * taper, axis=-1)) ** 2 / scale
    count = pgrams.shape[0]
    mean = np.fft.fftshift(pgrams.mean(axis=0))
    stderr = np.fft.fftshift(pgrams.std(axis=0, ddof=1)) / np.sqrt(count) if count > 1 else np.full(seg, np.inf)
    grid = SpectrumGrid(2 * np.pi * series.sample_rate / seg, mean)
    return PsdEstimate(grid, stderr, count)


def expected_welch(psd: SpectrumGrid, cfg: WelchConfig = WelchConfig()) -> SpectrumGrid:
    """Exact expectation of :func:`estimate_psd` for a process with (periodic) PSD ``psd``.

    Multiplies the autocorrelation by the window's autocorrelation and samples the
    result on the segment's frequency bins.
    """
    n = psd.num_points
    seg = cfg.segment_length
    if n % seg or seg > n // 2:
        raise GridError("segment length must divide the grid size and be at most half of it")
    r = spectrum_to_lag(psd.values, psd.freq_step)
    taper = cfg.taper()
    w_ac = np.correlate(taper, taper, mode="full")  # lags -(seg-1)..(seg-1)
    lag_weight = np.zeros(n)
    centre = n // 2
    lag_weight[centre - seg + 1 : centre + seg] = w_ac / np.sum(taper**2)
    smoothed = lag_to_spectrum(r * lag_weight, psd.lag_step)
    # every step-th bin from index 0 lands on the centred segment grid
    step = n // seg
    return SpectrumGrid(psd.freq_step * step, smoothed[::step])


@dataclass(frozen=True)
class BinCheck:
    freq_hz: float
    region: str
    analytic: float
    empirical: float
    stderr: float
    rel_error: float
    tolerance: float
    passed: bool


def band_regions(freq_hz: np.ndarray, bandwidth: float, rolloff: float) -> np.ndarray:
    """Label bins ``"in"`` (``|f| <= B/2``), ``"shoulder"`` (up to ``(1 + a) B``) or ``""``."""
    f = np.abs(freq_hz)
    labels = np.full(f.shape, "", dtype=object)
    labels[f <= bandwidth / 2] = "in"
    labels[(f > bandwidth / 2) & (f <= (1 + rolloff) * bandwidth)] = "shoulder"
    return labels


def compare_psd(
    estimate: PsdEstimate,
    reference: SpectrumGrid,
    bandwidth: float,
    rolloff: float,
    in_band_tol: float = 0.05,
    shoulder_tol: float = 0.15,
) -> list[BinCheck]:
    """Per-bin relative comparison of a Welch estimate against its expected value."""
    freqs = estimate.spectrum.freq_hz
    labels = band_regions(freqs, bandwidth, rolloff)
    out = []
    for i, region in enumerate(labels):
        if not region:
            continue
        ref = float(reference.values[i].real)
        emp = float(estimate.spectrum.values[i].real)
        tol = in_band_tol if region == "in" else shoulder_tol
        rel = abs(emp - ref) / abs(ref) if ref != 0 else np.inf
        out.append(BinCheck(float(freqs[i]), region, ref, emp, float(estimate.stderr[i]), rel, tol, rel <= tol))
    return out


# --- LoS fading statistics ------------------------------------------------------------


def fading_amplitudes(
    num_arrays: int = 16,
    num_points: int = 10_000,
    radius: float = 50.0,
    region_radius: float = 5.0,
    seed: int = 0,
    carrier: CarrierConfig | None = None,
) -> np.ndarray:
    """Received amplitudes at random points away from a single UE.

    Single-antenna arrays sit on a circle around the origin so every array
    contributes about equally; the UE is near the circle, observers are drawn
    uniformly in a disk around the origin.
    """
    carrier = carrier or CarrierConfig()
    angles = 2 * np.pi * np.arange(num_arrays) / num_arrays
    arrays = tuple(
        ArrayDescriptor((radius * np.cos(a), radius * np.sin(a)), a + np.pi / 2, 1, carrier.wavelength / 2)
        for a in angles
    )
    ue = (0.6 * radius, 0.3 * radius)
    scenario = Scenario(arrays, UserSet.at([ue]), PaPolynomial((1.0,)), carrier=carrier)
    rng = np.random.default_rng(seed)
    r = region_radius * np.sqrt(rng.uniform(size=num_points))
    t = rng.uniform(0, 2 * np.pi, size=num_points)
    pts = np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
    sig, _ = psd_at_frequency(scenario, scenario.observer_link_arrays(pts))
    return np.sqrt(sig)


def rayleigh_qq_correlation(amplitudes) -> float:
    """Correlation of the sorted amplitudes against Rayleigh quantiles."""
    amps = np.sort(np.asarray(amplitudes, dtype=float))
    probs = (np.arange(1, amps.size + 1) - 0.5) / amps.size
    theo = stats.rayleigh.ppf(probs)
    return float(np.corrcoef(amps, theo)[0, 1])
