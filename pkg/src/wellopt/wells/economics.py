"""Net present value and drilling cost for multilateral wells.

Revenue is the discounted sum over periods of per-phase volumes times
per-phase prices (water carries a negative price, i.e. a handling cost).
Drilling cost follows the empirical length-diameter form
A * d_w * ln(l) * l per bore, evaluated in feet, plus a fixed milling
cost per lateral junction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import WellGeometry

FEET_PER_METER = 3.28084


@dataclass
class EconomicParams:
    oil_price: float = 60.0          # $ per barrel
    water_cost: float = -4.0         # $ per barrel (negative = cost)
    gas_price: float = 0.0
    annual_discount_rate: float = 0.0
    periods: int = 11                # number of discount periods Y
    cost_constant_a: float = 1000.0  # field-specific drilling constant A
    wellbore_diameter_m: float = 0.1
    junction_cost: float = 1.0e5
    max_well_length_m: float = 900.0

    def __post_init__(self):
        if self.periods < 1:
            raise ValueError("periods must be >= 1")
        if self.wellbore_diameter_m <= 0:
            raise ValueError("wellbore diameter must be positive")


@dataclass
class ProductionProfile:
    """Per-period phase volumes in barrels, periods 0..Y inclusive."""

    oil: np.ndarray
    gas: np.ndarray
    water: np.ndarray

    def __post_init__(self):
        self.oil = np.asarray(self.oil, dtype=float)
        self.gas = np.asarray(self.gas, dtype=float)
        self.water = np.asarray(self.water, dtype=float)
        if not (self.oil.shape == self.gas.shape == self.water.shape):
            raise ValueError("phase arrays must share one shape")
        for name, arr in (("oil", self.oil), ("gas", self.gas),
                          ("water", self.water)):
            if np.any(arr < 0):
                raise ValueError(f"{name} volumes must be non-negative")

    @property
    def n_periods(self) -> int:
        return self.oil.shape[0]

    @property
    def cumulative_oil(self) -> float:
        return float(np.sum(self.oil))


def _bore_cost(length_m: float, econ: EconomicParams) -> float:
    """A * d_w * ln(l) * l with lengths in feet; ln floored at zero."""
    length_ft = length_m * FEET_PER_METER
    if length_ft <= 0:
        return 0.0
    diameter_ft = econ.wellbore_diameter_m * FEET_PER_METER
    return (econ.cost_constant_a * diameter_ft
            * max(0.0, np.log(length_ft)) * length_ft)


def drilling_cost(wells: list[WellGeometry], econ: EconomicParams) -> float:
    """Drilling and completion cost for all wells and their junctions."""
    total = 0.0
    for well in wells:
        total += _bore_cost(well.mainbore_length, econ)
        for branch in well.branches:
            total += _bore_cost(branch.length, econ)
            total += econ.junction_cost
    return total


def npv(profile: ProductionProfile, econ: EconomicParams,
        cost: float) -> float:
    """Discounted phase revenues minus the drilling cost."""
    if profile.n_periods != econ.periods + 1:
        raise ValueError(f"profile must cover periods 0..{econ.periods}")
    periods = np.arange(profile.n_periods)
    discount = (1.0 + econ.annual_discount_rate) ** (-periods)
    revenue = (profile.oil * econ.oil_price
               + profile.gas * econ.gas_price
               + profile.water * econ.water_cost)
    return float(np.sum(discount * revenue) - cost)
