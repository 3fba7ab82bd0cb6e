"""Pulse spectra, autocorrelations and their self-intermodulation spectra.

Fourier convention, used by every module::

    S(w) = integral R(tau) exp(-j w tau) dtau
    R(tau) = 1/(2 pi) integral S(w) exp(+j w tau) dw

Both sides live on centred, periodic grids of ``N`` points (``N`` even), bin ``i``
sitting at ``(i - N/2) * step``. The frequency step ``dw`` and the lag step
``dt`` are tied by ``dw * dt * N = 2 pi``, so the lag step is exactly one sample
period of a simulation running at the grid's frequency span.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import AliasingError, DomainError, GridError

# bins whose magnitude falls below this fraction of the peak count as outside the support
SUPPORT_FLOOR = 1e-12


@dataclass(frozen=True)
class PulseSpec:
    """Raised-cosine pulse with two-sided occupied bandwidth ``bandwidth`` (Hz), unit power."""

    bandwidth: float = 10e6
    rolloff: float = 0.22

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError("rolloff must lie in [0, 1]")

    @property
    def occupied_halfwidth(self) -> float:
        """Highest baseband frequency (Hz) with nonzero PSD."""
        return (1 + self.rolloff) * self.bandwidth / 2


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpectrumGrid:
    """Complex samples of a spectrum on a centred angular-frequency grid (rad/s)."""

    freq_step: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 1 or self.values.size % 2:
            raise GridError("spectrum grids need an even number of points")

    @property
    def num_points(self) -> int:
        return self.values.size

    @property
    def omega(self) -> np.ndarray:
        return (np.arange(self.num_points) - self.num_points // 2) * self.freq_step

    @property
    def freq_hz(self) -> np.ndarray:
        return self.omega / (2 * np.pi)

    @property
    def lag_step(self) -> float:
        return 2 * np.pi / (self.num_points * self.freq_step)

    @property
    def span_hz(self) -> float:
        return self.num_points * self.freq_step / (2 * np.pi)

    def total_power(self) -> float:
        """``1/(2 pi) * integral S(w) dw`` as a grid sum."""
        return float(np.real(self.values.sum()) * self.freq_step / (2 * np.pi))

    def with_values(self, values) -> "SpectrumGrid":
        return SpectrumGrid(self.freq_step, values)


@dataclass(frozen=True)
class CorrelationGrid:
    """Complex samples of a correlation function on a centred lag grid (s)."""

    lag_step: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 1 or self.values.size % 2:
            raise GridError("correlation grids need an even number of points")

    @property
    def num_points(self) -> int:
        return self.values.size

    @property
    def lags(self) -> np.ndarray:
        return (np.arange(self.num_points) - self.num_points // 2) * self.lag_step

    @property
    def freq_step(self) -> float:
        return 2 * np.pi / (self.num_points * self.lag_step)

    @property
    def window(self) -> float:
        """Period of the lag grid; shifts are taken modulo this length."""
        return self.num_points * self.lag_step

    def at_zero(self) -> complex:
        return complex(self.values[self.num_points // 2])


def lag_to_spectrum(values: np.ndarray, lag_step: float) -> np.ndarray:
    """Centred DFT implementing ``S(w) = sum R(tau) exp(-j w tau) dt`` along the last axis."""
    shifted = np.fft.ifftshift(values, axes=-1)
    return lag_step * np.fft.fftshift(np.fft.fft(shifted, axis=-1), axes=-1)


def spectrum_to_lag(values: np.ndarray, freq_step: float) -> np.ndarray:
    """Centred inverse DFT implementing ``R(tau) = 1/(2 pi) sum S(w) exp(j w tau) dw``."""
    n = values.shape[-1]
    shifted = np.fft.ifftshift(values, axes=-1)
    return n * freq_step / (2 * np.pi) * np.fft.fftshift(np.fft.ifft(shifted, axis=-1), axes=-1)


def raised_cosine_psd(spec: PulseSpec, freq_hz) -> np.ndarray:
    """Closed-form raised-cosine PSD at arbitrary baseband frequencies (Hz), unit power."""
    f = np.abs(np.asarray(freq_hz, dtype=float))
    b, a = spec.bandwidth, spec.rolloff
    f1 = (1 - a) * b / 2
    f2 = (1 + a) * b / 2
    out = np.zeros_like(f)
    out[f <= f1] = 1.0 / b
    if a > 0:
        taper = (f > f1) & (f <= f2)
        out[taper] = 0.5 / b * (1 + np.cos(np.pi / (a * b) * (f[taper] - f1)))
    return out


def raised_cosine_autocorr(spec: PulseSpec, lags) -> np.ndarray:
    """Closed-form raised-cosine autocorrelation ``sinc(B t) cos(pi a B t) / (1 - (2 a B t)^2)``."""
    t = np.asarray(lags, dtype=float) * spec.bandwidth
    a = spec.rolloff
    denom = 1 - (2 * a * t) ** 2
    singular = np.abs(denom) < 1e-10
    safe = np.where(singular, 1.0, denom)
    out = np.sinc(t) * np.cos(np.pi * a * t) / safe
    if a > 0:
        # removable singularity at |t| = 1/(2a)
        out = np.where(singular, np.pi / 4 * np.sinc(1 / (2 * a)), out)
    return out


def spectrum_grid(num_points: int, span_hz: float, values=None) -> SpectrumGrid:
    """Empty (or filled) spectrum grid of ``num_points`` bins covering ``span_hz``."""
    if num_points < 2 or num_points % 2:
        raise GridError("num_points must be an even integer >= 2")
    step = 2 * np.pi * span_hz / num_points
    if values is None:
        values = np.zeros(num_points)
    return SpectrumGrid(step, values)


def raised_cosine_spectrum(
    spec: PulseSpec, num_points: int = 4096, span_factor: float = 8.0, max_order: int = 3
) -> SpectrumGrid:
    """Sampled raised-cosine PSD, rescaled so the grid sum gives exactly unit power.

    Parameters
    ----------
    spec : PulseSpec
    num_points : int
        Number of bins; powers of two keep the FFTs fast.
    span_factor : float
        Grid span as a multiple of ``spec.bandwidth``.
    max_order : int
        Highest odd distortion order the grid must hold without wrap-around;
        the span must cover ``max_order * (1 + rolloff) * bandwidth``.
    """
    span = span_factor * spec.bandwidth
    needed = max_order * 2 * spec.occupied_halfwidth
    if span < needed:
        raise GridError(
            f"grid span {span:.4g} Hz cannot hold order-{max_order} regrowth ({needed:.4g} Hz needed)"
        )
    grid = spectrum_grid(num_points, span)
    values = raised_cosine_psd(spec, grid.freq_hz)
    power = values.sum() * grid.freq_step / (2 * np.pi)
    return grid.with_values(values / power)


def autocorrelation(spectrum: SpectrumGrid) -> CorrelationGrid:
    return CorrelationGrid(spectrum.lag_step, spectrum_to_lag(spectrum.values, spectrum.freq_step))


def spectrum_of(corr: CorrelationGrid) -> SpectrumGrid:
    return SpectrumGrid(corr.freq_step, lag_to_spectrum(corr.values, corr.lag_step))


def support_halfwidth(values: np.ndarray, freq_step: float) -> float:
    """Largest ``|w|`` (rad/s) whose bin exceeds ``SUPPORT_FLOOR`` of the peak magnitude."""
    mag = np.abs(values)
    peak = mag.max()
    if peak == 0:
        return 0.0
    n = values.size
    idx = np.nonzero(mag > SUPPORT_FLOOR * peak)[0]
    return float(np.max(np.abs(idx - n // 2)) * freq_step)


def _check_order_fits(spectrum: SpectrumGrid, order: int):
    half = support_halfwidth(spectrum.values, spectrum.freq_step)
    nyquist = spectrum.num_points // 2 * spectrum.freq_step
    if order * half >= nyquist:
        raise GridError(
            f"order-{order} product needs support up to {order * half / (2 * np.pi):.4g} Hz "
            f"but the grid ends at {nyquist / (2 * np.pi):.4g} Hz"
        )


def self_spectrum(corr: CorrelationGrid, order: int) -> SpectrumGrid:
    """Fourier transform of ``R |R|^(order-1)`` for odd ``order``."""
    if order < 1 or order % 2 == 0:
        raise DomainError(f"order must be a positive odd integer, got {order}")
    _check_order_fits(spectrum_of(corr), order)
    r = corr.values
    prod = r * np.abs(r) ** (order - 1)
    return SpectrumGrid(corr.freq_step, lag_to_spectrum(prod, corr.lag_step))


def shifted_correlations(corr: CorrelationGrid, shifts) -> np.ndarray:
    """Rows ``R(tau + shift)`` for each shift, via band-limited phase ramps.

    Returns an array of shape ``(*np.shape(shifts), N)``.
    """
    shifts = np.asarray(shifts, dtype=float)
    if np.any(np.abs(shifts) > corr.window / 2):
        raise AliasingError(
            f"lag shift {np.max(np.abs(shifts)):.4g} s exceeds half the lag window {corr.window / 2:.4g} s"
        )
    spec = lag_to_spectrum(corr.values, corr.lag_step)
    omega = (np.arange(corr.num_points) - corr.num_points // 2) * corr.freq_step
    ramp = np.exp(1j * shifts[..., None] * omega)
    return spectrum_to_lag(spec * ramp, corr.freq_step)


def shifted_correlation(corr: CorrelationGrid, shift: float) -> CorrelationGrid:
    return CorrelationGrid(corr.lag_step, shifted_correlations(corr, shift))


def shifted_triple_spectrum(
    corr: CorrelationGrid, shift_a: float, shift_b: float, shift_c: float
) -> SpectrumGrid:
    """Spectrum of ``R(tau + a) R(tau + b) conj(R(tau + c))``.

    Equals the scaled triple convolution of ``exp(j w a) S(w)``, ``exp(j w b) S(w)``
    and ``exp(j w c) S(-w)``.
    """
    _check_order_fits(spectrum_of(corr), 3)
    ra, rb, rc = shifted_correlations(corr, [shift_a, shift_b, shift_c])
    return SpectrumGrid(corr.freq_step, lag_to_spectrum(ra * rb * np.conj(rc), corr.lag_step))


def write_csv(grid: SpectrumGrid | CorrelationGrid, path) -> None:
    """Write a grid as ``axis, real, imag`` rows (axis in rad/s or s)."""
    if isinstance(grid, SpectrumGrid):
        header, axis = "omega_rad_s", grid.omega
    else:
        header, axis = "lag_s", grid.lags
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([header, "real", "imag"])
        for x, v in zip(axis, grid.values):
            writer.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])


def read_csv(path) -> SpectrumGrid | CorrelationGrid:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(c) for c in row] for row in reader])
    axis = rows[:, 0]
    values = rows[:, 1] + 1j * rows[:, 2]
    step = axis[1] - axis[0]
    if header[0] == "omega_rad_s":
        return SpectrumGrid(step, values)
    return CorrelationGrid(step, values)
