"""Memoryless odd-order polynomial PA and its Gaussian-input correlation mapping.

For a zero-mean circularly-symmetric Gaussian input of power ``sigma2`` the
cross-correlation of two PA outputs is a polynomial in the input cross-correlation::

    R_yy = sum_l c_l R_xx |R_xx|^(l-1)

For a third-order PA ``y = b1 x + b3 x |x|^2`` the Isserlis theorem gives
``c1 = |b1 + 2 sigma2 b3|^2`` and ``c3 = 2 |b3|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelConsistencyError, UnsupportedOrderError
from .signals import CorrelationGrid

CORRELATION_SLACK = 1e-9


@dataclass(frozen=True)
class PaPolynomial:
    """Coefficients ``b_1, b_3, b_5, ...`` of ``y = sum_l b_l x |x|^(l-1)``."""

    coeffs: tuple[complex, ...]

    def __post_init__(self):
        coeffs = tuple(complex(b) for b in self.coeffs)
        if not coeffs:
            raise ValueError("PA polynomial needs at least b_1")
        if coeffs[0] == 0:
            raise ValueError("b_1 must be nonzero")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_orders(cls, terms) -> "PaPolynomial":
        """Build from ``{order: b_l}`` or ``[(order, re, im), ...]``; missing orders are zero."""
        if isinstance(terms, dict):
            items = [(int(l), complex(b)) for l, b in terms.items()]
        else:
            items = [(int(t[0]), complex(t[1], t[2] if len(t) > 2 else 0.0)) for t in terms]
        for l, _ in items:
            if l < 1 or l % 2 == 0:
                raise ValueError(f"PA orders must be positive odd integers, got {l}")
        max_order = max(l for l, _ in items)
        coeffs = [0j] * ((max_order + 1) // 2)
        for l, b in items:
            coeffs[(l - 1) // 2] += b
        return cls(tuple(coeffs))

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(range(1, 2 * len(self.coeffs), 2))

    @property
    def max_order(self) -> int:
        return 2 * len(self.coeffs) - 1

    def coeff(self, order: int) -> complex:
        idx = (order - 1) // 2
        return self.coeffs[idx] if order % 2 and idx < len(self.coeffs) else 0j


@dataclass(frozen=True)
class OutputCorrCoeffs:
    """Output-correlation coefficients ``c_1, c_3, ...`` valid at one input power."""

    coeffs: tuple[complex, ...]
    input_power: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        if not self.coeffs:
            raise ValueError("need at least c_1")
        if self.input_power <= 0:
            raise ValueError("input_power must be positive")

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(range(1, 2 * len(self.coeffs), 2))

    @property
    def max_order(self) -> int:
        return 2 * len(self.coeffs) - 1

    def coeff(self, order: int) -> complex:
        idx = (order - 1) // 2
        return self.coeffs[idx] if order % 2 and idx < len(self.coeffs) else 0j

    @property
    def c1(self) -> float:
        return self.coeff(1).real

    @property
    def c3(self) -> float:
        return self.coeff(3).real


def amplify(x, pa: PaPolynomial):
    """Apply the PA polynomial sample-wise (works on scalars and arrays)."""
    x = np.asarray(x)
    out = pa.coeffs[0] * x
    if len(pa.coeffs) > 1:
        mag2 = (x * np.conj(x)).real
        power = np.ones_like(mag2)
        for b in pa.coeffs[1:]:
            power = power * mag2
            if b != 0:
                out = out + b * x * power
    return out


def output_corr_coeffs(pa: PaPolynomial, input_power: float) -> OutputCorrCoeffs:
    """Closed-form ``c_1, c_3`` for a PA of order at most three.

    Raises
    ------
    UnsupportedOrderError
        For fifth- or higher-order polynomials.
    """
    if pa.max_order > 3:
        raise UnsupportedOrderError("closed-form output coefficients are implemented up to third order")
    b1, b3 = pa.coeff(1), pa.coeff(3)
    c1 = abs(b1 + 2 * input_power * b3) ** 2
    c3 = 2 * abs(b3) ** 2
    if pa.max_order == 1:
        return OutputCorrCoeffs((c1,), input_power)
    return OutputCorrCoeffs((c1, c3), input_power)


def map_correlation(r_xx, c: OutputCorrCoeffs):
    """Map input cross-correlation(s) to PA-output cross-correlation(s), pointwise."""
    is_grid = isinstance(r_xx, CorrelationGrid)
    r = r_xx.values if is_grid else np.asarray(r_xx)
    mag = np.abs(r)
    if np.any(mag > c.input_power * (1 + CORRELATION_SLACK) + CORRELATION_SLACK):
        raise ModelConsistencyError(
            f"|R_xx| = {mag.max():.6g} exceeds the input power {c.input_power:.6g}"
        )
    out = c.coeffs[0] * r
    mag2 = mag**2
    power = np.ones_like(mag2)
    for cl in c.coeffs[1:]:
        power = power * mag2
        if cl != 0:
            out = out + cl * r * power
    if is_grid:
        return CorrelationGrid(r_xx.lag_step, out)
    return out if np.ndim(out) else complex(out)
