"""Ready-made scenarios: the single-array directivity study and the 100 m cell layouts.

Array placements and UE positions for the cell study are not published, so the
layouts here are one reasonable choice: four arrays at the edge midpoints with
their axes along the edges, or one central-type array at the bottom-edge midpoint.
UE positions are snapped to the centres of the lambda/2 sampling grid so the
coherent beamspot peak is sampled exactly.
"""
from __future__ import annotations

import numpy as np

from .engine import Scenario
from .geometry import ArrayDescriptor, CarrierConfig
from .gridsweep import CellSpec
from .pa import PaPolynomial
from .precoder import UserSet
from .signals import PulseSpec

CELL_UES = ((30.0, 60.0), (70.0, 35.0), (60.0, 80.0))
DEFAULT_PA = PaPolynomial((1.0, -0.1))


def snap_to_cell(position, cell: CellSpec, wavelength: float) -> tuple[float, float]:
    """Nearest sampling-grid centre to ``position``."""
    step = cell.resolved_step(wavelength)
    out = []
    for value, origin in zip(position, cell.origin):
        out.append(origin + (np.floor((value - origin) / step) + 0.5) * step)
    return (float(out[0]), float(out[1]))


def distributed_arrays(carrier: CarrierConfig, num_antennas: int = 8, size: float = 100.0):
    """Four ULAs at the edge midpoints of a ``size`` square, axes along the edges."""
    d = carrier.wavelength / 2
    h = size / 2
    return (
        ArrayDescriptor((h, 0.0), 0.0, num_antennas, d),
        ArrayDescriptor((size, h), np.pi / 2, num_antennas, d),
        ArrayDescriptor((h, size), np.pi, num_antennas, d),
        ArrayDescriptor((0.0, h), -np.pi / 2, num_antennas, d),
    )


def central_array(carrier: CarrierConfig, num_antennas: int = 32, size: float = 100.0):
    return (ArrayDescriptor((size / 2, 0.0), 0.0, num_antennas, carrier.wavelength / 2),)


def cell_scenario(
    num_users: int,
    layout: str = "distributed",
    carrier: CarrierConfig | None = None,
    pa: PaPolynomial = DEFAULT_PA,
    cell: CellSpec | None = None,
    pulse: PulseSpec | None = None,
) -> Scenario:
    """Cell-study scenario with ``num_users`` equal-power UEs (``layout``: distributed or central)."""
    carrier = carrier or CarrierConfig(carrier_freq=1e9, path_loss_exponent=2.5)
    cell = cell or CellSpec()
    if layout == "distributed":
        arrays = distributed_arrays(carrier, 8, cell.width)
    elif layout == "central":
        arrays = central_array(carrier, 32, cell.width)
    else:
        raise ValueError(f"unknown layout {layout!r}")
    if not 1 <= num_users <= len(CELL_UES):
        raise ValueError(f"between 1 and {len(CELL_UES)} users are bundled")
    ues = [snap_to_cell(p, cell, carrier.wavelength) for p in CELL_UES[:num_users]]
    return Scenario(arrays, UserSet.at(ues), pa, pulse or PulseSpec(), carrier)


def directivity_user_angles(num_users: int) -> tuple[float, ...]:
    """User angles (degrees) for the single-array directivity study."""
    return (135.0, 60.0, 150.0)[:num_users]
