"""Planar placement of ULAs and observers, and the resulting line-of-sight link parameters.

A link from array ``m`` to a location is summarised by four numbers:

* ``beta_mag`` -- amplitude path gain, ``(dist / ref_distance) ** (-exponent / 2)``
* ``tau`` -- propagation delay ``dist / c``
* ``psi`` -- carrier phase ``2 pi f_c tau`` reduced to ``[0, 2 pi)``
* ``phi`` -- per-antenna steering phase ``(2 pi / lambda_c) d cos(theta)``

``theta`` is measured from the array axis, so a location on broadside has ``phi = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class CarrierConfig:
    """Carrier and propagation constants.

    The path-loss exponent applies to *power*; amplitudes decay with half of it.
    """

    carrier_freq: float = 1e9
    speed_of_light: float = SPEED_OF_LIGHT
    path_loss_exponent: float = 2.5
    ref_distance: float = 1.0

    def __post_init__(self):
        if self.carrier_freq <= 0:
            raise ValueError("carrier_freq must be positive")
        if self.ref_distance <= 0:
            raise ValueError("ref_distance must be positive")
        if self.speed_of_light <= 0:
            raise ValueError("speed_of_light must be positive")

    @property
    def wavelength(self) -> float:
        return self.speed_of_light / self.carrier_freq


@dataclass(frozen=True)
class ArrayDescriptor:
    """Uniform linear array; ``position`` is antenna ``n = 0``, antennas step along ``axis_angle``."""

    position: tuple[float, float]
    axis_angle: float
    num_antennas: int
    spacing: float

    def __post_init__(self):
        if int(self.num_antennas) != self.num_antennas or self.num_antennas < 1:
            raise ValueError(f"num_antennas must be a positive integer, got {self.num_antennas}")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "num_antennas", int(self.num_antennas))

    @property
    def axis(self) -> np.ndarray:
        return np.array([np.cos(self.axis_angle), np.sin(self.axis_angle)])


@dataclass(frozen=True)
class Location:
    position: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))


@dataclass(frozen=True)
class LinkParams:
    """LoS parameters of one (array, location) link.

    Fields are floats for a single link; :func:`compute_links` fills them with
    equally-shaped arrays for a batch of locations.
    """

    beta_mag: float | np.ndarray
    psi: float | np.ndarray
    tau: float | np.ndarray
    phi: float | np.ndarray

    @property
    def beta(self):
        """Complex path coefficient ``|beta| exp(-j psi)``."""
        return self.beta_mag * np.exp(-1j * np.asarray(self.psi))


def compute_links(array: ArrayDescriptor, positions, cfg: CarrierConfig) -> LinkParams:
    """Vectorised :func:`compute_link` over an ``(..., 2)`` array of positions.

    Raises
    ------
    DegenerateGeometryError
        If any position lies within ``cfg.ref_distance`` of the array reference point.
    """
    positions = np.asarray(positions, dtype=float)
    delta = positions - np.asarray(array.position)
    dist = np.hypot(delta[..., 0], delta[..., 1])
    if np.any(dist <= cfg.ref_distance):
        raise DegenerateGeometryError(
            f"location within ref_distance={cfg.ref_distance} m of array at {array.position}"
        )
    ux, uy = array.axis
    cos_theta = np.clip((delta[..., 0] * ux + delta[..., 1] * uy) / dist, -1.0, 1.0)

    tau = dist / cfg.speed_of_light
    # reduce the cycle count before scaling to keep precision for large distances
    cycles = cfg.carrier_freq * tau
    psi = 2 * np.pi * (cycles - np.floor(cycles))
    phi = 2 * np.pi / cfg.wavelength * array.spacing * cos_theta
    beta_mag = (dist / cfg.ref_distance) ** (-cfg.path_loss_exponent / 2)
    return LinkParams(beta_mag=beta_mag, psi=psi, tau=tau, phi=phi)


def compute_link(array: ArrayDescriptor, loc: Location, cfg: CarrierConfig) -> LinkParams:
    """LoS link parameters between one array and one location."""
    batch = compute_links(array, np.asarray(loc.position)[None, :], cfg)
    return LinkParams(
        beta_mag=float(batch.beta_mag[0]),
        psi=float(batch.psi[0]),
        tau=float(batch.tau[0]),
        phi=float(batch.phi[0]),
    )


def phi_to_theta(phi: float, d: float, lambda_c: float) -> float | None:
    """Physical angle (radians, from the array axis) of steering phase ``phi``.

    Returns ``None`` when ``phi`` has no physical direction (invisible region).
    """
    c = phi * lambda_c / (2 * np.pi * d)
    if abs(c) > 1.0:
        return None
    return float(np.arccos(c))


def theta_to_phi(theta, d: float, lambda_c: float):
    return 2 * np.pi / lambda_c * d * np.cos(theta)
