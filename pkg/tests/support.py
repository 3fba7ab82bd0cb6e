"""Shared scenario builders, brute-force oracles and acceptance bookkeeping for the test suite."""
import time
from contextlib import contextmanager

import numpy as np

from beamspot.engine import Scenario
from beamspot.geometry import ArrayDescriptor, CarrierConfig
from beamspot.pa import PaPolynomial
from beamspot.precoder import UserSet

CARRIER = CarrierConfig()
LAM = CARRIER.wavelength
EDGE_SITES = (((50.0, 0.0), 0.0), ((100.0, 50.0), np.pi / 2), ((50.0, 100.0), np.pi), ((0.0, 50.0), -np.pi / 2))
UES = ((30.0, 60.0), (70.0, 35.0), (60.0, 80.0))


def edge_arrays(num_arrays, num_antennas, spacing=LAM / 2):
    return tuple(ArrayDescriptor(p, a, num_antennas, spacing) for p, a in EDGE_SITES[:num_arrays])


def small_scenario(num_users, num_arrays, num_antennas, pa=(1.0, -0.1), grid_points=1024, powers=None, ues=UES):
    powers = [1.0 / num_users] * num_users if powers is None else powers
    return Scenario(
        edge_arrays(num_arrays, num_antennas),
        UserSet.at(ues[:num_users], powers),
        PaPolynomial(pa),
        grid_points=grid_points,
    )


def brute_dirichlet(n, phi):
    return np.sum(np.exp(1j * phi * np.arange(n)))


def rel_err(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


# --- acceptance bookkeeping -------------------------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


class CriterionRecord:
    """Collects named sub-checks for one acceptance criterion."""

    def __init__(self, number: int):
        self.number = number
        self.checks: list[tuple[str, bool]] = []
        self.notes: list[str] = []

    def check(self, name: str, ok) -> bool:
        self.checks.append((name, bool(ok)))
        return bool(ok)

    def note(self, text: str) -> None:
        self.notes.append(text)

    @property
    def failed(self) -> list[str]:
        return [name for name, ok in self.checks if not ok]


@contextmanager
def criterion(number: int, budget_s: float):
    """Run one acceptance criterion, print its PASS/FAIL line and fail the test on any failed check.

    Exceeding ``budget_s`` seconds of wall time counts as a failed check.
    """
    rec = CriterionRecord(number)
    start = time.perf_counter()
    try:
        yield rec
    except Exception as exc:
        rec.check(f"raised {type(exc).__name__}: {exc}", False)
        raise
    finally:
        elapsed = time.perf_counter() - start
        rec.check(f"runtime {elapsed:.1f} s > {budget_s:g} s", elapsed <= budget_s)
        ok = bool(rec.checks) and not rec.failed
        detail = "; ".join(rec.notes + [f"{elapsed:.1f} s of {budget_s:g} s"])
        if rec.failed:
            detail += " | failed: " + ", ".join(rec.failed)
        ACCEPTANCE_RESULTS[number] = (ok, detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)
    assert not rec.failed, f"criterion {number} failed: {', '.join(rec.failed)}"
