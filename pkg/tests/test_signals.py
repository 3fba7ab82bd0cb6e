import numpy as np
import pytest

from beamspot.errors import AliasingError, DomainError, GridError
from beamspot.signals import (
    CorrelationGrid,
    PulseSpec,
    SpectrumGrid,
    autocorrelation,
    raised_cosine_autocorr,
    raised_cosine_psd,
    raised_cosine_spectrum,
    read_csv,
    self_spectrum,
    shifted_correlation,
    shifted_correlations,
    shifted_triple_spectrum,
    spectrum_grid,
    spectrum_of,
    write_csv,
)

B = 10e6
SPEC = PulseSpec(B, 0.22)


def textbook_rc(t, bandwidth=B, rolloff=0.22):
    """Raised-cosine pulse sinc(Bt) cos(pi a B t) / (1 - (2 a B t)^2), written out independently."""
    x = bandwidth * np.asarray(t, dtype=float)
    return np.sinc(x) * np.cos(np.pi * rolloff * x) / (1 - (2 * rolloff * x) ** 2)


def direct_triple_convolution(spectrum: SpectrumGrid, a=0.0, b=0.0, c=0.0) -> np.ndarray:
    """(1/2pi)^2 * [e^{jwa}S] * [e^{jwb}S] * [e^{jwc}S(-w)] by explicit linear convolution."""
    s = spectrum.values.real
    n = s.size
    w = spectrum.omega
    s_rev = s[(n - np.arange(n)) % n]
    first = np.exp(1j * w * a) * s
    second = np.exp(1j * w * b) * s
    third = np.exp(1j * w * c) * s_rev
    full = np.convolve(np.convolve(first, second), third)
    dw = spectrum.freq_step
    # conv index s <-> omega (s - 3n/2) dw; target bin t sits at s = t + n
    return full[n : 2 * n] * dw**2 / (2 * np.pi) ** 2


# --- raised-cosine spectrum -----------------------------------------------------------------


def test_brick_wall_limit():
    grid = raised_cosine_spectrum(PulseSpec(B, 0.0))
    f = grid.freq_hz
    inside = np.abs(f) < B / 2
    outside = np.abs(f) > B / 2
    plateau = grid.values.real[inside]
    assert np.ptp(plateau) < 1e-12 * plateau.max()
    assert np.all(grid.values.real[outside] == 0)


def test_unit_power():
    for rolloff in (0.0, 0.22, 1.0):
        grid = raised_cosine_spectrum(PulseSpec(B, rolloff))
        assert grid.total_power() == pytest.approx(1.0, abs=1e-12)


def test_half_plateau_at_band_edge():
    grid = raised_cosine_spectrum(SPEC)
    centre = grid.values.real[grid.num_points // 2]
    edge = grid.values.real[np.argmin(np.abs(grid.freq_hz - B / 2))]
    assert grid.freq_hz[np.argmin(np.abs(grid.freq_hz - B / 2))] == pytest.approx(B / 2)
    assert edge / centre == pytest.approx(0.5, rel=1e-12)
    # the closed form agrees: -6 dB point of the taper is exactly half the plateau
    assert raised_cosine_psd(SPEC, B / 2) / raised_cosine_psd(SPEC, 0.0) == pytest.approx(0.5, rel=1e-12)


def test_zero_outside_occupied_band():
    grid = raised_cosine_spectrum(SPEC)
    outside = np.abs(grid.freq_hz) > SPEC.occupied_halfwidth
    assert np.all(grid.values.real[outside] == 0)


def test_grid_too_narrow_for_third_order():
    with pytest.raises(GridError):
        raised_cosine_spectrum(SPEC, 4096, span_factor=3.0)
    raised_cosine_spectrum(SPEC, 4096, span_factor=3.0, max_order=1)


@pytest.mark.parametrize("n", [0, 3, 1001])
def test_grid_needs_even_points(n):
    with pytest.raises(GridError):
        spectrum_grid(n, 1e6)


def test_pulse_validation():
    with pytest.raises(ValueError):
        PulseSpec(0.0)
    with pytest.raises(ValueError):
        PulseSpec(B, 1.5)


def test_grid_values_are_read_only():
    grid = raised_cosine_spectrum(SPEC)
    with pytest.raises(ValueError):
        grid.values[0] = 1.0


# --- autocorrelation ------------------------------------------------------------------------


def test_brick_wall_sinc_zero_crossings():
    corr = autocorrelation(raised_cosine_spectrum(PulseSpec(B, 0.0)))
    r = corr.values.real
    centre = corr.num_points // 2
    per_null = int(round(1 / (B * corr.lag_step)))
    for k in range(1, 6):
        i = centre + k * per_null
        # sign change within the grid step ending at k/B, and tiny value there
        assert np.sign(r[i - 1]) != np.sign(r[i]) or abs(r[i]) < 1e-12
        assert abs(r[i]) < 1 / 400


def test_r0_is_total_power(rng):
    values = np.abs(rng.normal(size=512))
    grid = SpectrumGrid(2 * np.pi * 1e4, values)
    corr = autocorrelation(grid)
    assert corr.at_zero().real == pytest.approx(grid.total_power(), rel=1e-9)


def test_raised_cosine_matches_closed_form_at_random_lags(rng):
    # a fine frequency grid keeps the periodic lag window long enough for 1e-8
    corr = autocorrelation(raised_cosine_spectrum(SPEC, 16384, 8.0))
    lags = rng.uniform(-20, 20, 20) / B
    values = shifted_correlations(corr, lags)[:, corr.num_points // 2]
    np.testing.assert_allclose(values.real, textbook_rc(lags), atol=1e-8, rtol=0)
    assert np.max(np.abs(values.imag)) < 1e-12


def test_default_grid_equals_periodised_closed_form(rng):
    corr = autocorrelation(raised_cosine_spectrum(SPEC))
    period = corr.window
    lags = rng.uniform(-20, 20, 20) / B
    images = np.arange(-2000, 2001)
    periodised = textbook_rc(lags[:, None] + images[None, :] * period).sum(axis=1)
    # unit-power rescaling of the sampled spectrum equals 1 / periodised R(0)
    periodised /= textbook_rc(images * period).sum()
    values = shifted_correlations(corr, lags)[:, corr.num_points // 2].real
    np.testing.assert_allclose(values, periodised, atol=2e-11, rtol=0)


def test_library_closed_form_matches_textbook(rng):
    t = rng.uniform(-30, 30, 200) / B
    np.testing.assert_allclose(raised_cosine_autocorr(SPEC, t), textbook_rc(t), atol=1e-15)
    # removable singularity at |t| = 1/(2a B)
    t0 = 1 / (2 * 0.22 * B)
    assert raised_cosine_autocorr(SPEC, t0) == pytest.approx(textbook_rc(t0 * (1 + 1e-7)), rel=1e-5)


# --- self spectra ---------------------------------------------------------------------------


def test_first_order_self_spectrum_is_the_spectrum():
    grid = raised_cosine_spectrum(SPEC)
    s1 = self_spectrum(autocorrelation(grid), 1)
    np.testing.assert_allclose(s1.values, grid.values, atol=1e-9 * grid.values.real.max())


def test_third_order_total_power_is_one():
    s3 = self_spectrum(autocorrelation(raised_cosine_spectrum(SPEC)), 3)
    assert s3.total_power() == pytest.approx(1.0, rel=1e-9)


def test_brick_wall_third_order_support_is_three_bandwidths():
    grid = raised_cosine_spectrum(PulseSpec(B, 0.0), 2048, 8.0)
    s3 = self_spectrum(autocorrelation(grid), 3)
    oracle = direct_triple_convolution(grid)
    peak = oracle.real.max()
    np.testing.assert_allclose(s3.values, oracle, atol=1e-9 * peak)
    support = np.abs(s3.freq_hz[np.abs(oracle) > 1e-9 * peak])
    df = grid.freq_step / (2 * np.pi)
    assert support.max() == pytest.approx(3 * B / 2, abs=df)


def test_even_order_rejected():
    corr = autocorrelation(raised_cosine_spectrum(SPEC))
    for order in (0, 2, 4, -1):
        with pytest.raises(DomainError):
            self_spectrum(corr, order)


def test_fifth_order_needs_a_wider_grid():
    corr = autocorrelation(raised_cosine_spectrum(SPEC, 4096, 4.0, max_order=3))
    with pytest.raises(GridError):
        self_spectrum(corr, 5)
    assert self_spectrum(autocorrelation(raised_cosine_spectrum(SPEC)), 5).total_power() == pytest.approx(1.0)


# --- shifted triple spectra -----------------------------------------------------------------


def test_zero_shifts_equal_self_spectrum():
    corr = autocorrelation(raised_cosine_spectrum(SPEC))
    a = shifted_triple_spectrum(corr, 0.0, 0.0, 0.0)
    b = self_spectrum(corr, 3)
    np.testing.assert_allclose(a.values, b.values, atol=1e-14 * np.abs(b.values).max())


def test_common_shift_is_a_phase_ramp():
    corr = autocorrelation(raised_cosine_spectrum(SPEC))
    delta = 3.7e-8
    a = shifted_triple_spectrum(corr, delta, delta, delta)
    b = self_spectrum(corr, 3)
    expected = np.exp(1j * b.omega * delta) * b.values
    np.testing.assert_allclose(a.values, expected, atol=1e-12 * np.abs(b.values).max())


def test_random_shifts_match_direct_convolution(rng):
    grid = raised_cosine_spectrum(SPEC, 2048, 8.0)
    corr = autocorrelation(grid)
    for _ in range(5):
        a, b, c = rng.uniform(-40, 40, 3) / B
        got = shifted_triple_spectrum(corr, a, b, c).values
        oracle = direct_triple_convolution(grid, a, b, c)
        assert np.max(np.abs(got - oracle)) <= 1e-6 * np.max(np.abs(oracle))


def test_shift_beyond_half_window_is_aliasing():
    corr = autocorrelation(raised_cosine_spectrum(SPEC))
    with pytest.raises(AliasingError):
        shifted_correlation(corr, 0.51 * corr.window)
    with pytest.raises(AliasingError):
        shifted_triple_spectrum(corr, 0.0, 0.0, -0.6 * corr.window)


def test_integer_lag_shift_is_a_roll():
    corr = autocorrelation(raised_cosine_spectrum(SPEC))
    shifted = shifted_correlation(corr, 5 * corr.lag_step)
    np.testing.assert_allclose(shifted.values, np.roll(corr.values, -5), atol=1e-14)


def test_spectrum_and_correlation_round_trip():
    grid = raised_cosine_spectrum(SPEC)
    back = spectrum_of(autocorrelation(grid))
    np.testing.assert_allclose(back.values, grid.values, atol=1e-14)
    assert back.freq_step == pytest.approx(grid.freq_step, rel=1e-15)


# --- CSV ------------------------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    grid = raised_cosine_spectrum(SPEC, 256, 8.0)
    for obj in (grid, autocorrelation(grid)):
        path = tmp_path / "g.csv"
        write_csv(obj, path)
        back = read_csv(path)
        assert type(back) is type(obj)
        np.testing.assert_array_equal(back.values, obj.values)
    header = (tmp_path / "g.csv").read_text().splitlines()[0]
    assert header == "lag_s,real,imag"


def test_odd_grids_rejected():
    with pytest.raises(GridError):
        CorrelationGrid(1.0, np.ones(5))
