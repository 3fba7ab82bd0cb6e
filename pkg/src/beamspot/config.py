"""TOML scenario configuration with a strict schema.

Every physical quantity carries its unit in the key name. Unknown keys are
rejected, and validation errors name the offending dotted key path.

Example::

    [carrier]
    freq_hz = 1e9
    path_loss_exponent = 2.5

    [[arrays]]
    position_m = [50.0, 0.0]
    axis_deg = 0.0
    num_antennas = 8
    spacing_wavelengths = 0.5

    [[users]]
    position_m = [30.0, 60.0]
    power_lin = 1.0
"""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .engine import Scenario
from .errors import BeamspotError
from .geometry import ArrayDescriptor, CarrierConfig
from .gridsweep import CellSpec
from .montecarlo import WelchConfig
from .pa import PaPolynomial
from .precoder import UserSet
from .scenarios import snap_to_cell
from .signals import PulseSpec


class ConfigError(BeamspotError):
    """Raised for unreadable, malformed or schema-violating configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CarrierSection(_Strict):
    freq_hz: float = Field(1e9, gt=0)
    path_loss_exponent: float = Field(2.5, ge=0)
    ref_distance_m: float = Field(1.0, gt=0)
    speed_of_light_m_s: float = Field(299_792_458.0, gt=0)


class PulseSection(_Strict):
    bandwidth_hz: float = Field(10e6, gt=0)
    rolloff: float = Field(0.22, ge=0, le=1)


class GridSection(_Strict):
    num_points: int = Field(4096, ge=2)
    span_factor: float = Field(8.0, gt=0)


class PaSection(_Strict):
    # rows of [order, real part, imaginary part]
    coeffs: list[tuple[int, float, float]] = [(1, 1.0, 0.0), (3, -0.1, 0.0)]


class ArraySection(_Strict):
    position_m: tuple[float, float]
    axis_deg: float = 0.0
    num_antennas: int = Field(ge=1)
    spacing_m: Optional[float] = Field(None, gt=0)
    spacing_wavelengths: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_spacing(self):
        if (self.spacing_m is None) == (self.spacing_wavelengths is None):
            raise ValueError("give exactly one of spacing_m or spacing_wavelengths")
        return self


class UserSection(_Strict):
    """Either an absolute position or an angle and range seen from the first array."""

    position_m: Optional[tuple[float, float]] = None
    angle_deg: Optional[float] = None
    range_m: float = Field(100.0, gt=0)
    power_lin: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _one_placement(self):
        if (self.position_m is None) == (self.angle_deg is None):
            raise ValueError("give exactly one of position_m or angle_deg")
        return self


class CellSection(_Strict):
    width_m: float = Field(100.0, gt=0)
    height_m: float = Field(100.0, gt=0)
    step_m: Optional[float] = Field(None, gt=0)
    origin_m: tuple[float, float] = (0.0, 0.0)
    omega_rad_s: float = 0.0
    band_average: bool = False
    snap_users: bool = True
    mask_radius_m: Optional[float] = Field(None, gt=0)


class MonteCarloSection(_Strict):
    num_samples: int = Field(1 << 22, gt=0)
    segment_length: int = Field(512, ge=2)
    overlap: float = Field(0.0, ge=0, le=0.9)
    window: str = "hann"
    seed: int = Field(0, ge=0)
    observer_m: tuple[float, float]
    in_band_tol: float = Field(0.05, gt=0)
    shoulder_tol: float = Field(0.15, gt=0)


class ScenarioConfig(_Strict):
    carrier: CarrierSection = CarrierSection()
    pulse: PulseSection = PulseSection()
    grid: GridSection = GridSection()
    pa: PaSection = PaSection()
    arrays: list[ArraySection] = Field(min_length=1)
    users: list[UserSection] = Field(min_length=1)
    cell: Optional[CellSection] = None
    montecarlo: Optional[MonteCarloSection] = None

    # --- builders ---------------------------------------------------------------------

    def carrier_config(self) -> CarrierConfig:
        c = self.carrier
        return CarrierConfig(c.freq_hz, c.speed_of_light_m_s, c.path_loss_exponent, c.ref_distance_m)

    def cell_spec(self) -> CellSpec:
        c = self.cell or CellSection()
        return CellSpec(c.width_m, c.height_m, c.step_m, tuple(c.origin_m), c.omega_rad_s, c.band_average)

    def welch_config(self) -> WelchConfig:
        if self.montecarlo is None:
            raise ConfigError("montecarlo: section is required for this command")
        mc = self.montecarlo
        return WelchConfig(mc.segment_length, mc.overlap, mc.window)

    def array_descriptors(self) -> tuple[ArrayDescriptor, ...]:
        wavelength = self.carrier_config().wavelength
        out = []
        for a in self.arrays:
            d = a.spacing_m if a.spacing_m is not None else a.spacing_wavelengths * wavelength
            out.append(ArrayDescriptor(tuple(a.position_m), np.deg2rad(a.axis_deg), a.num_antennas, d))
        return tuple(out)

    def user_positions(self) -> list[tuple[float, float]]:
        arrays = self.array_descriptors()
        ref = arrays[0]
        out = []
        for u in self.users:
            if u.position_m is not None:
                pos = tuple(u.position_m)
            else:
                # angle measured from the first array's axis, counter-clockwise
                ang = ref.axis_angle + np.deg2rad(u.angle_deg)
                pos = (ref.position[0] + u.range_m * np.cos(ang), ref.position[1] + u.range_m * np.sin(ang))
            out.append(pos)
        if self.cell is not None and self.cell.snap_users:
            cell = self.cell_spec()
            out = [snap_to_cell(p, cell, self.carrier_config().wavelength) for p in out]
        return out

    def scenario(self) -> Scenario:
        try:
            pa = PaPolynomial.from_orders([(int(o), re, im) for o, re, im in self.pa.coeffs])
            users = UserSet.at(self.user_positions(), [u.power_lin for u in self.users])
            return Scenario(
                self.array_descriptors(),
                users,
                pa,
                PulseSpec(self.pulse.bandwidth_hz, self.pulse.rolloff),
                self.carrier_config(),
                self.grid.num_points,
                self.grid.span_factor,
            )
        except (ValueError, BeamspotError) as exc:
            raise ConfigError(f"scenario: {exc}") from exc


def _format_error(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        key = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{key}: {e['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def load_config(path) -> ScenarioConfig:
    """Read and validate a TOML file.

    Raises
    ------
    OSError
        If the file cannot be read.
    ConfigError
        If the content is not valid TOML or violates the schema.
    """
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)
