"""Rates, minimum transmit power, slot discretization and cycle energy totals."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import propagation
from .route_planner import Tour
from .scenario import Scenario

FLYING = "flying"
HOVERING = "hovering"


class InfeasibleSlotError(RuntimeError):
    """A slot has zero combined gain, so no finite power meets the rate floor."""


def achievable_rate(power_w: float, gain: float, noise_power_w: float) -> float:
    """Spectral efficiency log2(1 + P * gain / sigma^2) in bps/Hz."""
    if power_w < 0:
        raise ValueError("power_w must be nonnegative")
    if noise_power_w <= 0:
        raise ValueError("noise power must be positive")
    return math.log2(1.0 + power_w * gain / noise_power_w)


def required_power(gain: float, rate_threshold: float, noise_power_w: float) -> float:
    """Minimum transmit power meeting the rate floor: (2^R - 1) sigma^2 / gain.

    Returns +inf when the gain is zero; callers decide whether that slot is a
    hard failure.
    """
    if rate_threshold <= 0:
        raise ValueError("rate_threshold must be positive")
    if gain <= 0.0:
        return math.inf
    return (2.0**rate_threshold - 1.0) * noise_power_w / gain


@dataclass(frozen=True)
class Slot:
    position_m: tuple[float, float, float]
    mode: str
    node_index: Optional[int] = None


@dataclass(frozen=True)
class SlotPlan:
    slots: tuple[Slot, ...]
    slot_seconds: float

    @property
    def total_slots(self) -> int:
        return len(self.slots)

    def flying_indices(self) -> list[int]:
        return [i for i, s in enumerate(self.slots) if s.mode == FLYING]


def _segment_slots(start: np.ndarray, end: np.ndarray, step_m: float) -> list[np.ndarray]:
    """Flying-slot positions along one straight segment.

    ceil(D / step) slots; slot j sits at the slot-start point j*step from the
    segment start, except that a partial final slot is clamped onto the segment
    endpoint so arrival geometry is exact.
    """
    length = float(np.linalg.norm(end - start))
    if length == 0.0:
        return []
    count = math.ceil(length / step_m)
    direction = (end - start) / length
    positions = []
    for j in range(count):
        if j == count - 1 and length - j * step_m < step_m:
            positions.append(end.copy())
        else:
            positions.append(start + direction * (j * step_m))
    return positions


def discretize(scenario: Scenario, tour: Tour) -> SlotPlan:
    """Slot-by-slot flight cycle for a closed tour.

    Flying slots advance v_f * tau along each straight segment (slot-start
    positions, partial last slot clamped to the target); on arrival at node m
    the UAV hovers for ceil(D_task_m / (v_d * tau)) slots.
    """
    tau = scenario.slot_seconds
    fly_step = scenario.flight_speed_mps * tau
    tasks_per_slot = scenario.delivery_speed_tps * tau
    station = np.asarray(scenario.station_m, dtype=float)
    node_pos = scenario.node_positions()

    slots: list[Slot] = []
    current = station
    for node_idx in tour.order:
        target = node_pos[node_idx]
        for p in _segment_slots(current, target, fly_step):
            slots.append(Slot(position_m=tuple(p), mode=FLYING))
        hover_count = math.ceil(scenario.nodes[node_idx].task_count / tasks_per_slot)
        for _ in range(hover_count):
            slots.append(Slot(position_m=tuple(target), mode=HOVERING, node_index=node_idx))
        current = target
    for p in _segment_slots(current, station, fly_step):
        slots.append(Slot(position_m=tuple(p), mode=FLYING))
    return SlotPlan(slots=tuple(slots), slot_seconds=tau)


@dataclass(frozen=True)
class EnergyReport:
    strategy_name: str
    per_slot_power_w: tuple[float, ...]
    total_energy_j: float
    per_slot_activation: tuple

    @property
    def slot_count(self) -> int:
        return len(self.per_slot_power_w)


def slot_gain(scenario: Scenario, position, activation) -> float:
    """Combined gain at one UAV position under one activation vector."""
    h = propagation.channel(scenario, position)
    g = propagation.waveguide_response(scenario)
    beta = propagation.radiation_ratios(activation, scenario.physics.radiation_constant)
    return propagation.effective_gain(h, g, beta, activation)


def cycle_energy(
    scenario: Scenario,
    plan: SlotPlan,
    activation_per_slot: Sequence,
    strategy_name: str = "custom",
) -> EnergyReport:
    """Per-slot minimum power and the cycle total sum(P_l * tau).

    Raises InfeasibleSlotError when any slot's activation yields zero gain;
    a zero-gain slot is a configuration error, not an infinite-energy result.
    """
    if len(activation_per_slot) != plan.total_slots:
        raise ValueError(
            "need one activation per slot (%d != %d)"
            % (len(activation_per_slot), plan.total_slots)
        )
    phys = scenario.physics
    powers = []
    for idx, (slot, act) in enumerate(zip(plan.slots, activation_per_slot)):
        gain = slot_gain(scenario, slot.position_m, act)
        p = required_power(gain, phys.rate_threshold_bps_hz, phys.noise_power_w)
        if not math.isfinite(p):
            raise InfeasibleSlotError(f"slot {idx} has zero gain under its activation")
        powers.append(p)
    total = math.fsum(p * plan.slot_seconds for p in powers)
    activations = tuple(propagation.as_activation(a) for a in activation_per_slot)
    return EnergyReport(
        strategy_name=strategy_name,
        per_slot_power_w=tuple(powers),
        total_energy_j=total,
        per_slot_activation=activations,
    )


def _fmt(x) -> str:
    return repr(float(x))


def write_energy_csv(path, plan: SlotPlan, reports: Sequence[EnergyReport],
                     mimo_elements: int = 0) -> None:
    """One row per slot per strategy; K_a falls back to the array element
    count for reports without activation vectors."""
    lines = ["slot_index,mode,x,y,z,strategy,K_a,power_w"]
    for report in reports:
        for i, slot in enumerate(plan.slots):
            if report.per_slot_activation:
                ka = int(np.sum(report.per_slot_activation[i]))
            else:
                ka = mimo_elements
            x, y, z = slot.position_m
            lines.append(
                f"{i},{slot.mode},{_fmt(x)},{_fmt(y)},{_fmt(z)},"
                f"{report.strategy_name},{ka},{_fmt(report.per_slot_power_w[i])}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def write_energy_json(path, reports: Sequence[EnergyReport]) -> None:
    """Full bitmaps per slot, for downstream tooling that needs them."""
    payload = []
    for report in reports:
        payload.append(
            {
                "strategy": report.strategy_name,
                "total_energy_j": report.total_energy_j,
                "per_slot_power_w": list(report.per_slot_power_w),
                "per_slot_activation": [
                    [int(b) for b in bits] for bits in report.per_slot_activation
                ],
            }
        )
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
