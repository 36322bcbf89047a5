"""Deterministic flow proxy standing in for a reservoir simulator.

The proxy reduces two-phase recovery to a handful of documented closed
forms so an objective evaluation costs well under a millisecond:

* Productivity index (PI): for each well, the sum over traversed grid
  cells of permeability times intersected segment length.
* Drainable oil N_d: total phi * S_o * cell volume, weighted by
  exp(-distance to the producer polyline / drainage radius) and
  converted to barrels. Oil rates are linear in N_d before depletion.
* Depletion: each period produces a fraction of the remaining drainable
  oil. The fraction is eta0 times a producer-deliverability saturation
  term PI_p / (PI_p + pi_half), times an injector-support term that
  blends a primary-recovery floor with saturating injector PI and
  injector-producer connectivity exp(-D_ip / connectivity_length).
* Water cut: rises logistically with the recovery fraction; breakthrough
  comes earlier (the logistic midpoint shifts down) the closer the
  injector sits to the producer. Produced water is
  oil * wc / (1 - wc), gas is a fixed ratio times oil (zero by default).

Period 0 is a drilling period with no production.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .economics import EconomicParams, ProductionProfile
from .geometry import WellGeometry
from .grid import ReservoirGrid

BARRELS_PER_M3 = 6.2898

INJECTOR = "injector"
PRODUCER = "producer"


@dataclass
class ProxyParams:
    drainage_radius_m: float = 420.0
    base_depletion_rate: float = 0.35  # eta0, per period
    pi_half: float = 2.0e5             # PI saturation scale
    primary_recovery_floor: float = 0.30
    connectivity_length_m: float = 2500.0
    water_cut_max: float = 0.95
    water_cut_steepness: float = 9.0
    breakthrough_half_min: float = 0.20
    breakthrough_half_span: float = 0.45
    breakthrough_length_m: float = 1400.0
    gas_oil_ratio: float = 0.0


def segment_cell_intersections(start: np.ndarray, end: np.ndarray,
                               grid: ReservoirGrid
                               ) -> list[tuple[tuple[int, int, int], float]]:
    """Cells crossed by one segment, with the length inside each cell.

    The segment is first clipped to the grid box; the clipped piece is
    then cut at every grid-plane crossing and each sub-piece assigned to
    the cell containing its midpoint.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    direction = end - start
    length = float(np.linalg.norm(direction))
    if length == 0.0:
        return []
    extent = grid.extent
    t_lo, t_hi = 0.0, 1.0
    for axis in range(3):
        d = direction[axis]
        if d == 0.0:
            if not 0.0 <= start[axis] <= extent[axis]:
                return []
            continue
        t0 = (0.0 - start[axis]) / d
        t1 = (extent[axis] - start[axis]) / d
        t_lo = max(t_lo, min(t0, t1))
        t_hi = min(t_hi, max(t0, t1))
    if t_lo >= t_hi:
        return []

    cuts = [t_lo, t_hi]
    cell = np.array(grid.cell_size)
    for axis in range(3):
        d = direction[axis]
        if d == 0.0:
            continue
        planes = np.arange(1, grid.dims[axis]) * cell[axis]
        ts = (planes - start[axis]) / d
        cuts.extend(t for t in ts if t_lo < t < t_hi)
    cuts = sorted(set(cuts))

    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = start + 0.5 * (a + b) * direction
        idx = np.minimum(np.floor(mid / cell).astype(int),
                         np.array(grid.dims) - 1)
        idx = np.maximum(idx, 0)
        out.append(((int(idx[0]), int(idx[1]), int(idx[2])),
                    (b - a) * length))
    return out


def productivity_index(well: WellGeometry, grid: ReservoirGrid) -> float:
    """Sum over traversed cells of permeability times in-cell length."""
    total = 0.0
    for start, end in well.segments():
        for (i, j, k), seg_len in segment_cell_intersections(start, end, grid):
            total += grid.permeability[i, j, k] * seg_len
    return total


def _distance_to_polyline(points: np.ndarray, well: WellGeometry) -> np.ndarray:
    """Distance of each point to the nearest drilled segment."""
    best = np.full(points.shape[0], np.inf)
    for start, end in well.segments():
        d = end - start
        denom = float(d @ d)
        if denom == 0.0:
            dist = np.linalg.norm(points - start, axis=1)
        else:
            t = np.clip((points - start) @ d / denom, 0.0, 1.0)
            closest = start + t[:, None] * d
            dist = np.linalg.norm(points - closest, axis=1)
        best = np.minimum(best, dist)
    return best


def drainable_oil_barrels(producer: WellGeometry, grid: ReservoirGrid,
                          params: ProxyParams) -> float:
    """phi * S_o volume in the producer's decaying drainage neighborhood."""
    centers = grid.cell_centers()
    weights = np.exp(-_distance_to_polyline(centers, producer)
                     / params.drainage_radius_m)
    return float(np.sum(grid.oil_in_place_per_cell() * weights)) * BARRELS_PER_M3


def _midpoint(well: WellGeometry) -> np.ndarray:
    return 0.5 * (well.heel + well.toe)


def simulate(wells: list[tuple[WellGeometry, str]], grid: ReservoirGrid,
             econ: EconomicParams,
             params: ProxyParams | None = None) -> ProductionProfile:
    """Run the proxy for one producer/injector pattern.

    `wells` pairs each geometry with its role ("injector" or
    "producer"). Multiple wells per role aggregate by summed PI, summed
    drainable oil, and the minimum injector-producer midpoint distance.
    """
    params = params or ProxyParams()
    producers = [w for w, role in wells if role == PRODUCER]
    injectors = [w for w, role in wells if role == INJECTOR]
    if not producers or not injectors:
        raise ValueError("need at least one producer and one injector")

    pi_prod = sum(productivity_index(w, grid) for w in producers)
    pi_inj = sum(productivity_index(w, grid) for w in injectors)
    drainable = sum(drainable_oil_barrels(w, grid, params) for w in producers)

    n = econ.periods + 1
    oil = np.zeros(n)
    gas = np.zeros(n)
    water = np.zeros(n)
    if pi_prod <= 0.0 or drainable <= 0.0:
        return ProductionProfile(oil=oil, gas=gas, water=water)

    spacing = min(float(np.linalg.norm(_midpoint(p) - _midpoint(i)))
                  for p in producers for i in injectors)
    deliverability = pi_prod / (pi_prod + params.pi_half)
    injector_strength = (pi_inj / (pi_inj + params.pi_half)
                         * np.exp(-spacing / params.connectivity_length_m))
    support = (params.primary_recovery_floor
               + (1.0 - params.primary_recovery_floor) * injector_strength)
    eta = params.base_depletion_rate * deliverability * support

    breakthrough_half = (params.breakthrough_half_min
                         + params.breakthrough_half_span
                         * (1.0 - np.exp(-spacing / params.breakthrough_length_m)))

    cumulative = 0.0
    for period in range(1, n):
        remaining = drainable - cumulative
        q_oil = eta * remaining
        recovery = cumulative / drainable
        wc = params.water_cut_max / (1.0 + np.exp(
            -params.water_cut_steepness * (recovery - breakthrough_half)))
        oil[period] = q_oil
        water[period] = q_oil * wc / (1.0 - wc)
        gas[period] = params.gas_oil_ratio * q_oil
        cumulative += q_oil
    return ProductionProfile(oil=oil, gas=gas, water=water)
