"""Matched-filter precoding, PA inputs and their cross-antenna correlations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ArrayDescriptor, CarrierConfig, LinkParams, Location, compute_link
from .signals import CorrelationGrid, PulseSpec, shifted_correlations


@dataclass(frozen=True)
class User:
    location: Location
    power: float = 1.0

    def __post_init__(self):
        if self.power <= 0:
            raise ValueError("user power must be positive")


@dataclass(frozen=True)
class UserSet:
    users: tuple[User, ...]

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if not self.users:
            raise ValueError("need at least one user")

    @classmethod
    def at(cls, positions, powers=None) -> "UserSet":
        powers = [1.0] * len(positions) if powers is None else powers
        return cls(tuple(User(Location(tuple(p)), float(w)) for p, w in zip(positions, powers)))

    def __len__(self):
        return len(self.users)

    def __iter__(self):
        return iter(self.users)

    @property
    def powers(self) -> np.ndarray:
        return np.array([u.power for u in self.users])


@dataclass(frozen=True)
class MfWeights:
    """Matched-filter parameters, arrays of shape ``(M, K)``.

    Antenna ``n`` of array ``m`` advances user ``k``'s signal by ``tau[m, k]`` and
    rotates it by ``exp(j (phi[m, k] n + psi[m, k]))``; amplitudes are one.
    """

    tau: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)

    @property
    def num_arrays(self) -> int:
        return self.tau.shape[0]

    @property
    def num_users(self) -> int:
        return self.tau.shape[1]

    def antenna_weights(self, m: int, k: int, num_antennas: int) -> np.ndarray:
        n = np.arange(num_antennas)
        return np.exp(1j * (self.phi[m, k] * n + self.psi[m, k]))


def user_links(
    arrays: list[ArrayDescriptor], users: UserSet, carrier: CarrierConfig
) -> list[list[LinkParams]]:
    """``links[m][k]`` from every array to every user."""
    return [[compute_link(a, u.location, carrier) for u in users] for a in arrays]


def mf_weights(links) -> MfWeights:
    """Matched-filter weights from the ``links[m][k]`` table of user links."""
    tau = np.array([[l.tau for l in row] for row in links], dtype=float)
    psi = np.array([[l.psi for l in row] for row in links], dtype=float)
    phi = np.array([[l.phi for l in row] for row in links], dtype=float)
    return MfWeights(tau=tau, psi=psi, phi=phi)


def pa_input_power(users: UserSet, pulse: PulseSpec | CorrelationGrid | None = None) -> float:
    """Common PA input power ``sum_k p_k R(0)``; the pulse has ``R(0) = 1`` unless a grid is given."""
    r0 = pulse.at_zero().real if isinstance(pulse, CorrelationGrid) else 1.0
    return float(users.powers.sum() * r0)


def input_cross_correlation(
    m: int, n: int, m2: int, n2: int, users: UserSet, weights: MfWeights, corr: CorrelationGrid
) -> CorrelationGrid:
    """``E[x_{m,n}(t + tau) conj(x_{m2,n2}(t))]`` on the lag grid of ``corr``."""
    powers = users.powers
    phase = weights.phi[m] * n - weights.phi[m2] * n2 + weights.psi[m] - weights.psi[m2]
    shifts = weights.tau[m] - weights.tau[m2]
    rows = shifted_correlations(corr, shifts)
    values = np.einsum("k,kl->l", powers * np.exp(1j * phase), rows)
    return CorrelationGrid(corr.lag_step, values)
