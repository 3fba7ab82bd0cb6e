"""Analytic received-PSD expressions for an LoS distributed MIMO downlink.

Three routes to the PSD at an observer are provided:

* :func:`received_psd_general` -- brute force over every antenna pair: build each
  PA-input cross-correlation, push it through the PA correlation map, transform,
  and combine with the observer channel. Any PA order, any number of users.
* :func:`received_psd_single_user` -- closed form for ``K = 1``: a scalar spatial
  gain multiplies the whole (signal + distortion) spectrum.
* :func:`signal_psd_multi` / :func:`distortion3_psd_multi` -- closed forms for
  the linear and third-order terms with ``K`` users, built on Dirichlet kernels
  evaluated at the user and intermodulation steering phases.

The routes share the same grids, so they agree to round-off where they overlap.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import j0

from .errors import DomainError
from .geometry import (
    ArrayDescriptor,
    CarrierConfig,
    LinkParams,
    Location,
    compute_link,
    compute_links,
    phi_to_theta,
)
from .pa import OutputCorrCoeffs, PaPolynomial, map_correlation, output_corr_coeffs
from .precoder import MfWeights, UserSet, mf_weights, pa_input_power, user_links
from .signals import (
    CorrelationGrid,
    PulseSpec,
    SpectrumGrid,
    autocorrelation,
    lag_to_spectrum,
    raised_cosine_autocorr,
    raised_cosine_spectrum,
    self_spectrum,
    shifted_correlations,
)

# directions closer than this after wrapping are the same beam
DIRECTION_TOL = 1e-9


@dataclass(frozen=True)
class Scenario:
    """Everything needed to evaluate a received PSD."""

    arrays: tuple[ArrayDescriptor, ...]
    users: UserSet
    pa: PaPolynomial = PaPolynomial((1.0, -0.1))
    pulse: PulseSpec = field(default_factory=PulseSpec)
    carrier: CarrierConfig = field(default_factory=CarrierConfig)
    grid_points: int = 4096
    span_factor: float = 8.0

    def __post_init__(self):
        object.__setattr__(self, "arrays", tuple(self.arrays))
        if not self.arrays:
            raise ValueError("need at least one array")

    @property
    def num_arrays(self) -> int:
        return len(self.arrays)

    @property
    def num_users(self) -> int:
        return len(self.users)

    @cached_property
    def spectrum(self) -> SpectrumGrid:
        return raised_cosine_spectrum(
            self.pulse, self.grid_points, self.span_factor, max_order=max(3, self.pa.max_order)
        )

    @cached_property
    def correlation(self) -> CorrelationGrid:
        return autocorrelation(self.spectrum)

    @cached_property
    def links(self) -> list[list[LinkParams]]:
        """``links[m][k]``: array ``m`` to user ``k``."""
        return user_links(list(self.arrays), self.users, self.carrier)

    @cached_property
    def weights(self) -> MfWeights:
        return mf_weights(self.links)

    @property
    def input_power(self) -> float:
        return pa_input_power(self.users, self.correlation)

    @cached_property
    def output_coeffs(self) -> OutputCorrCoeffs:
        return output_corr_coeffs(self.pa, self.input_power)

    def observer_links(self, position) -> list[LinkParams]:
        loc = position if isinstance(position, Location) else Location(tuple(position))
        return [compute_link(a, loc, self.carrier) for a in self.arrays]

    def observer_link_arrays(self, positions) -> LinkParams:
        """Links to a batch of positions ``(..., 2)``; fields have shape ``(M, ...)``."""
        batches = [compute_links(a, positions, self.carrier) for a in self.arrays]
        return LinkParams(
            beta_mag=np.stack([b.beta_mag for b in batches]),
            psi=np.stack([b.psi for b in batches]),
            tau=np.stack([b.tau for b in batches]),
            phi=np.stack([b.phi for b in batches]),
        )


@dataclass(frozen=True)
class ObserverPsd:
    """Signal and distortion PSDs at one observer (distortion is third order for ``K > 1``)."""

    signal_psd: SpectrumGrid
    distortion_psd: SpectrumGrid
    total_psd: SpectrumGrid | None = None


@dataclass(frozen=True)
class ImDirection:
    phi: float
    triples: frozenset
    weight: float
    theta: float | None

    @property
    def visible(self) -> bool:
        return self.theta is not None


def dirichlet(num_antennas, phi):
    """``D_N(phi) = sum_{n<N} exp(j phi n)`` in closed form, exact at ``phi = 2 pi k``."""
    n = np.asarray(num_antennas, dtype=float)
    phi = np.asarray(phi, dtype=float)
    half = np.sin(phi / 2)
    singular = np.abs(half) < 1e-12
    ratio = np.sin(n * phi / 2) / np.where(singular, 1.0, half)
    limit = n * np.cos(n * phi / 2) / np.cos(phi / 2)
    return np.exp(0.5j * phi * (n - 1)) * np.where(singular, limit, ratio)


def _link_fields(obs) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Stack a list of per-array links into ``(M,)`` arrays (or pass batched arrays through)."""
    if isinstance(obs, LinkParams):
        return (np.asarray(obs.beta_mag), np.asarray(obs.psi), np.asarray(obs.tau), np.asarray(obs.phi))
    return (
        np.array([l.beta_mag for l in obs]),
        np.array([l.psi for l in obs]),
        np.array([l.tau for l in obs]),
        np.array([l.phi for l in obs]),
    )


def _as_real(values: np.ndarray, what: str) -> np.ndarray:
    peak = np.max(np.abs(values)) if values.size else 0.0
    residue = np.max(np.abs(values.imag)) if values.size else 0.0
    if residue > 1e-9 * max(peak, np.finfo(float).tiny):
        raise ArithmeticError(f"{what} has imaginary residue {residue:.3g} (peak {peak:.3g})")
    return values.real


def spatial_gain_single_user(scenario: Scenario, observer_links, omega) -> np.ndarray:
    """``|sum_m |beta_m| e^{j(psi_m^1 - psi_m) - j w (tau_m - tau_m^1)} D_{N_m}(phi_m^1 - phi_m)|^2``."""
    if scenario.num_users != 1:
        raise DomainError("the single-user spatial gain needs exactly one user")
    beta, psi, tau, phi = _link_fields(observer_links)
    w = scenario.weights
    omega = np.asarray(omega, dtype=float)
    total = 0j
    for m, arr in enumerate(scenario.arrays):
        coeff = beta[m] * np.exp(1j * (w.psi[m, 0] - psi[m])) * dirichlet(arr.num_antennas, w.phi[m, 0] - phi[m])
        total = total + coeff * np.exp(-1j * omega * (tau[m] - w.tau[m, 0]))
    return np.abs(total) ** 2


def received_psd_single_user(
    scenario: Scenario, observer_links, coeffs: OutputCorrCoeffs | None = None
) -> ObserverPsd:
    """Closed-form single-user PSD; all odd orders of ``coeffs`` are included.

    Raises
    ------
    DomainError
        If the scenario has more than one user.
    """
    if scenario.num_users != 1:
        raise DomainError("received_psd_single_user needs exactly one user")
    c = coeffs or scenario.output_coeffs
    spec = scenario.spectrum
    p = scenario.users.powers[0]
    gain = spatial_gain_single_user(scenario, observer_links, spec.omega)
    sig = c.coeff(1).real * p * spec.values.real
    dis = np.zeros(spec.num_points)
    for order in c.orders[1:]:
        cl = c.coeff(order)
        if cl != 0:
            s_l = self_spectrum(scenario.correlation, order).values
            dis = dis + (cl * p**order * s_l).real
    return ObserverPsd(spec.with_values(sig * gain), spec.with_values(dis * gain))


def _user_link_matrices(scenario: Scenario):
    w = scenario.weights
    return w.tau, w.psi, w.phi


def signal_psd_multi(
    scenario: Scenario, observer_links, coeffs: OutputCorrCoeffs | None = None
) -> SpectrumGrid:
    """Linear-term PSD at the observer for any number of users."""
    c = coeffs or scenario.output_coeffs
    beta, psi, tau, phi = _link_fields(observer_links)
    utau, upsi, uphi = _user_link_matrices(scenario)
    spec = scenario.spectrum
    omega = spec.omega
    powers = scenario.users.powers
    total = np.zeros(spec.num_points)
    for k in range(scenario.num_users):
        acc = np.zeros(spec.num_points, dtype=complex)
        for m, arr in enumerate(scenario.arrays):
            d = dirichlet(arr.num_antennas, uphi[m, k] - phi[m])
            acc += beta[m] * d * np.exp(1j * (upsi[m, k] - psi[m]) + 1j * omega * (utau[m, k] - tau[m]))
        total += powers[k] * np.abs(acc) ** 2
    return spec.with_values(c.coeff(1).real * spec.values.real * total)


def im_triples(num_users: int):
    """Ordered triples ``(k, k', k'')`` grouped by ``k <-> k'`` symmetry.

    Yields ``(k, k', k'', multiplicity)`` with ``k <= k'``.
    """
    for k, k2 in itertools.combinations_with_replacement(range(num_users), 2):
        for k3 in range(num_users):
            yield k, k2, k3, (1 if k == k2 else 2)


def _triple_product_rows(scenario: Scenario) -> np.ndarray:
    """``R(tau + tau_m^k - tau_m'^k)`` for every ``(m, m', k)``: shape ``(M, M, K, L)``."""
    utau = scenario.weights.tau
    shifts = utau[:, None, :] - utau[None, :, :]
    return shifted_correlations(scenario.correlation, shifts)


def distortion3_psd_multi(
    scenario: Scenario, observer_links, coeffs: OutputCorrCoeffs | None = None
) -> SpectrumGrid:
    """Third-order distortion PSD at the observer for any number of users."""
    c = coeffs or scenario.output_coeffs
    c3 = c.coeff(3).real
    spec = scenario.spectrum
    if c3 == 0:
        return spec.with_values(np.zeros(spec.num_points))
    beta, psi, tau, phi = _link_fields(observer_links)
    utau, upsi, uphi = _user_link_matrices(scenario)
    powers = scenario.users.powers
    omega = spec.omega
    rows = _triple_product_rows(scenario)
    sizes = np.array([a.num_antennas for a in scenario.arrays])
    delay_ramp = np.exp(-1j * np.outer(tau, omega))  # (M, L)

    total = np.zeros(spec.num_points, dtype=complex)
    for k, k2, k3, mult in im_triples(scenario.num_users):
        weight = mult * powers[k] * powers[k2] * powers[k3]
        im_phi = uphi[:, k] + uphi[:, k2] - uphi[:, k3]
        im_psi = upsi[:, k] + upsi[:, k2] - upsi[:, k3]
        u = beta * np.exp(1j * (im_psi - psi)) * dirichlet(sizes, im_phi - phi)  # (M,)
        prod = rows[:, :, k] * rows[:, :, k2] * np.conj(rows[:, :, k3])  # (M, M, L)
        s3 = lag_to_spectrum(prod, spec.lag_step)
        a = u[:, None] * delay_ramp
        total += weight * np.einsum("ml,mnl,nl->l", a, s3, np.conj(a))
    return spec.with_values(c3 * _as_real(total, "third-order distortion PSD"))


def received_psd_general(
    scenario: Scenario, observer_links, coeffs: OutputCorrCoeffs | None = None
) -> SpectrumGrid:
    """Received PSD by brute force over every pair of transmit antennas.

    Cost is ``O((sum_m N_m)^2 * L)`` with ``L`` grid points; each array pair is
    processed as one vectorised block.
    """
    c = coeffs or scenario.output_coeffs
    beta, psi, tau, phi = _link_fields(observer_links)
    w = scenario.weights
    powers = scenario.users.powers
    spec = scenario.spectrum
    omega = spec.omega
    shifts = w.tau[:, None, :] - w.tau[None, :, :]
    rows = shifted_correlations(scenario.correlation, shifts)  # (M, M, K, L)
    obs_beta = beta * np.exp(-1j * psi)

    total = np.zeros(spec.num_points, dtype=complex)
    for m, arr in enumerate(scenario.arrays):
        n_a = np.arange(arr.num_antennas)
        for m2, arr2 in enumerate(scenario.arrays):
            n_b = np.arange(arr2.num_antennas)
            phase = (
                w.phi[m][None, None, :] * n_a[:, None, None]
                - w.phi[m2][None, None, :] * n_b[None, :, None]
                + (w.psi[m] - w.psi[m2])[None, None, :]
            )
            r_x = np.einsum("abk,kl->abl", powers * np.exp(1j * phase), rows[m, m2])
            r_y = map_correlation(r_x, c)
            steer = np.exp(-1j * (phi[m] * n_a[:, None] - phi[m2] * n_b[None, :]))
            s_y = lag_to_spectrum(np.einsum("ab,abl->l", steer, r_y), spec.lag_step)
            total += obs_beta[m] * np.conj(obs_beta[m2]) * np.exp(-1j * omega * (tau[m] - tau[m2])) * s_y
    return spec.with_values(_as_real(total, "received PSD"))


def psd_at_frequency(
    scenario: Scenario, obs: LinkParams, omega0: float = 0.0, coeffs: OutputCorrCoeffs | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Signal and third-order distortion PSD at one frequency for a batch of observers.

    ``obs`` holds ``(M, P)`` arrays from :meth:`Scenario.observer_link_arrays`.
    Returns two ``(P,)`` arrays. Frequency-only factors are computed once, so the
    per-observer cost is ``O(K^3 M^2)``.
    """
    c = coeffs or scenario.output_coeffs
    beta = np.asarray(obs.beta_mag)
    psi = np.asarray(obs.psi)
    tau = np.asarray(obs.tau)
    phi = np.asarray(obs.phi)
    utau, upsi, uphi = _user_link_matrices(scenario)
    powers = scenario.users.powers
    sizes = np.array([a.num_antennas for a in scenario.arrays], dtype=float)[:, None]
    corr = scenario.correlation
    kernel = np.exp(-1j * omega0 * corr.lags) * corr.lag_step
    s0 = float(np.real(np.dot(corr.values, kernel)))
    steer = _ObserverPhasors(sizes, phi)
    # observer-only factor shared by every beam
    base = beta * np.exp(-1j * (psi + omega0 * tau))

    sig = np.zeros(beta.shape[1:])
    for k in range(scenario.num_users):
        lead = np.exp(1j * (upsi[:, k] + omega0 * utau[:, k]))[:, None]
        terms = base * lead * steer.dirichlet(uphi[:, k])
        sig += powers[k] * np.abs(terms.sum(axis=0)) ** 2
    sig *= c.coeff(1).real * s0

    c3 = c.coeff(3).real
    dis = np.zeros(beta.shape[1:])
    if c3 != 0:
        rows = _triple_product_rows(scenario)
        for k, k2, k3, mult in im_triples(scenario.num_users):
            weight = mult * powers[k] * powers[k2] * powers[k3]
            prod = rows[:, :, k] * rows[:, :, k2] * np.conj(rows[:, :, k3])
            s3 = prod @ kernel  # (M, M)
            im_phi = uphi[:, k] + uphi[:, k2] - uphi[:, k3]
            im_psi = upsi[:, k] + upsi[:, k2] - upsi[:, k3]
            u = base * np.exp(1j * im_psi)[:, None] * steer.dirichlet(im_phi)
            dis += weight * np.einsum("mp,mn,np->p", u, s3, np.conj(u)).real
        dis *= c3
    return sig, dis


class _ObserverPhasors:
    """Dirichlet kernels ``D_N(a - phi)`` for many beam phases ``a`` at fixed observers.

    Uses ``D_N(x) = (1 - e^{jNx}) / (1 - e^{jx})`` with the observer phasors
    precomputed, so each beam costs a few complex multiplies instead of
    trigonometric calls. Near-coherent points fall back to :func:`dirichlet`.
    """

    # below this |1 - e^{jx}| the ratio loses digits; recompute those points directly
    NEAR_PEAK = 1e-4

    def __init__(self, sizes: np.ndarray, phi: np.ndarray):
        self.sizes = sizes
        self.phi = phi
        self.z1 = np.exp(-1j * phi)
        self.zn = np.exp(-1j * sizes * phi)

    def dirichlet(self, beam_phi: np.ndarray) -> np.ndarray:
        a = np.asarray(beam_phi, dtype=float)[:, None]
        den = 1 - np.exp(1j * a) * self.z1
        num = 1 - np.exp(1j * self.sizes * a) * self.zn
        near = np.abs(den) < self.NEAR_PEAK
        out = num / np.where(near, 1.0, den)
        if np.any(near):
            idx = np.nonzero(near)
            out[idx] = dirichlet(self.sizes[idx[0], 0], a[idx[0], 0] - self.phi[idx])
        return out


def psd_band_power(
    scenario: Scenario, obs: LinkParams, coeffs: OutputCorrCoeffs | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Band-integrated signal and third-order distortion power for a batch of observers.

    Integrating the PSD over frequency turns every ``exp(j w x)`` factor into an
    autocorrelation lag, so the closed-form raised-cosine ``R`` is evaluated at
    observer-dependent lags instead of summing frequency bins.
    """
    c = coeffs or scenario.output_coeffs

    def r(lags):
        return raised_cosine_autocorr(scenario.pulse, lags)

    beta = np.asarray(obs.beta_mag)
    psi = np.asarray(obs.psi)
    tau = np.asarray(obs.tau)
    phi = np.asarray(obs.phi)
    utau, upsi, uphi = _user_link_matrices(scenario)
    powers = scenario.users.powers
    sizes = np.array([a.num_antennas for a in scenario.arrays], dtype=float)[:, None]

    sig = np.zeros(beta.shape[1:])
    for k in range(scenario.num_users):
        a = beta * dirichlet(sizes, uphi[:, k : k + 1] - phi) * np.exp(1j * (upsi[:, k : k + 1] - psi))
        d = utau[:, k : k + 1] - tau
        kernel = r(d[:, None] - d[None, :])
        sig += powers[k] * np.einsum("mp,mnp,np->p", a, kernel, np.conj(a)).real
    sig *= c.coeff(1).real

    c3 = c.coeff(3).real
    dis = np.zeros(beta.shape[1:])
    if c3 != 0:
        lag = -(tau[:, None] - tau[None, :])  # (M, M, P)
        shift = utau[:, None, :] - utau[None, :, :]  # (M, M, K)
        for k, k2, k3, mult in im_triples(scenario.num_users):
            weight = mult * powers[k] * powers[k2] * powers[k3]
            prod = (
                r(lag + shift[:, :, k, None])
                * r(lag + shift[:, :, k2, None])
                * r(lag + shift[:, :, k3, None])
            )
            im_phi = (uphi[:, k] + uphi[:, k2] - uphi[:, k3])[:, None]
            im_psi = (upsi[:, k] + upsi[:, k2] - upsi[:, k3])[:, None]
            u = beta * np.exp(1j * (im_psi - psi)) * dirichlet(sizes, im_phi - phi)
            dis += weight * np.einsum("mp,mnp,np->p", u, prod, np.conj(u)).real
        dis *= c3
    return sig, dis


# --- single-array directivity -------------------------------------------------------------


def _pattern(num_antennas: int, phis, weights, theta, d_over_lambda: float) -> np.ndarray:
    obs_phi = 2 * np.pi * d_over_lambda * np.cos(np.asarray(theta, dtype=float))
    out = np.zeros(obs_phi.shape)
    for ph, wt in zip(phis, weights):
        out += wt * np.abs(dirichlet(num_antennas, ph - obs_phi)) ** 2
    return out


def isotropic_average(num_antennas: int, phis, weights, d_over_lambda: float) -> float:
    """Angle-averaged value of ``sum_i w_i |D_N(phi_i - phi(theta))|^2``.

    Uses ``<exp(-j q a cos(theta))>_theta = J0(q a)`` with ``a = 2 pi d / lambda``.
    """
    a = 2 * np.pi * d_over_lambda
    q = np.arange(1, num_antennas)
    total = 0.0
    for ph, wt in zip(phis, weights):
        total += wt * (num_antennas + 2 * np.sum((num_antennas - q) * np.cos(q * ph) * j0(q * a)))
    return float(total)


def signal_directivity_pattern(num_antennas, user_phis, powers, theta, d_over_lambda=0.5):
    """Useful-signal directivity of one ULA (1 = isotropic)."""
    powers = np.ones(len(user_phis)) if powers is None else np.asarray(powers, dtype=float)
    pattern = _pattern(num_antennas, user_phis, powers, theta, d_over_lambda)
    return pattern / isotropic_average(num_antennas, user_phis, powers, d_over_lambda)


def distortion3_directivity_pattern(num_antennas, user_phis, powers, theta, d_over_lambda=0.5):
    """Third-order distortion directivity of one ULA (1 = isotropic)."""
    powers = np.ones(len(user_phis)) if powers is None else np.asarray(powers, dtype=float)
    phis, weights = [], []
    for k, k2, k3, mult in im_triples(len(user_phis)):
        phis.append(user_phis[k] + user_phis[k2] - user_phis[k3])
        weights.append(mult * powers[k] * powers[k2] * powers[k3])
    pattern = _pattern(num_antennas, phis, weights, theta, d_over_lambda)
    return pattern / isotropic_average(num_antennas, phis, weights, d_over_lambda)


def _single_array(scenario: Scenario):
    if scenario.num_arrays != 1:
        raise DomainError("directivity is defined per array; the scenario must have M = 1")
    arr = scenario.arrays[0]
    return arr, scenario.weights.phi[0], arr.spacing / scenario.carrier.wavelength


def directivity_signal(scenario: Scenario, theta) -> np.ndarray:
    arr, phis, dl = _single_array(scenario)
    return signal_directivity_pattern(arr.num_antennas, phis, scenario.users.powers, theta, dl)


def directivity_distortion3(scenario: Scenario, theta) -> np.ndarray:
    arr, phis, dl = _single_array(scenario)
    return distortion3_directivity_pattern(arr.num_antennas, phis, scenario.users.powers, theta, dl)


# --- intermodulation directions -----------------------------------------------------------


def wrap_phase(phi):
    """Reduce to ``(-pi, pi]``."""
    out = -((-np.asarray(phi, dtype=float) + np.pi) % (2 * np.pi) - np.pi)
    return out if np.ndim(out) else float(out)


def expected_im_count(num_users: int) -> int:
    """Distinct intermodulation directions for generic user phases: ``K^3/2 - K^2/2 + K``."""
    k = num_users
    return (k**3 - k**2) // 2 + k


def enumerate_im_directions(user_phis, powers=None, d_over_lambda: float = 0.5) -> list[ImDirection]:
    """All third-order beam directions ``phi_k + phi_k' - phi_k''`` merged by value.

    Each direction carries the ordered-triple power sum ``sum p_k p_k' p_k''`` and
    the canonical triples ``(min(k, k'), max(k, k'), k'')`` that produce it.
    Directions are sorted by wrapped phase.
    """
    user_phis = np.asarray(user_phis, dtype=float)
    k_users = user_phis.size
    powers = np.ones(k_users) if powers is None else np.asarray(powers, dtype=float)
    groups: list[dict] = []
    for k, k2, k3 in itertools.product(range(k_users), repeat=3):
        ph = wrap_phase(user_phis[k] + user_phis[k2] - user_phis[k3])
        wt = powers[k] * powers[k2] * powers[k3]
        triple = (min(k, k2), max(k, k2), k3)
        for g in groups:
            diff = abs(ph - g["phi"])
            if min(diff, 2 * np.pi - diff) < DIRECTION_TOL:
                g["triples"].add(triple)
                g["weight"] += wt
                break
        else:
            groups.append({"phi": ph, "triples": {triple}, "weight": wt})
    out = []
    for g in sorted(groups, key=lambda g: g["phi"]):
        theta = phi_to_theta(g["phi"], d_over_lambda, 1.0)
        out.append(ImDirection(g["phi"], frozenset(g["triples"]), g["weight"], theta))
    return out
