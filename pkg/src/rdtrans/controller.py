"""Phasing and operating-procedure automation.

Phasing measures the shaft misalignment from the encoders, converts it to a
water volume, and opens the intake or outlet valve for the time that volume
needs at the measured pressure drop.  It repeats until the misalignment is
inside tolerance.  Small corrections are made with the line pressure just
below the injection pressure, so intake flow is slow and fine-grained.

The operating procedure is a small state machine.  Transitory modes
(pressurizing, phasing, depressurizing, bleeding) advance on their own when
their procedure finishes; the others wait for a command.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
import math
from dataclasses import dataclass, field, replace

from .errors import DidNotConverge, IllegalTransition, ZeroPressureDrop
from .plant import (DEFAULT_PHASE_CONSTANT, REGULATOR_MAX_KPA, PlantState, Valve,
                    ValveSpec, apply_valve, read_sensors, set_regulator, settle)

log = logging.getLogger(__name__)

HIBERNATE_PRELOAD_KPA = 100.0
DEFAULT_OPERATING_PRELOAD = 600.0


@dataclass(frozen=True)
class PhasingConfig:
    tolerance: float = 0.4            # deg
    fine_delta_p: float = 15.0        # kPa
    max_iterations: int = 20
    injection_pressure: float = 700.0  # kPa
    settle_time: float = 0.1          # s between a correction and the next reading
    coarse_band: float = 4.0          # deg; below this, corrections run at fine pressure
    # controller's belief about the valves; None means "same as the plant"
    intake_belief: ValveSpec | None = None
    outlet_belief: ValveSpec | None = None
    dt: float = 1e-3

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if not self.fine_delta_p > 0:
            raise ValueError("fine_delta_p must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


class Mode(enum.Enum):
    DEPRESSURIZED = "Depressurized"
    BLEEDING = "Bleeding"
    HIBERNATING = "Hibernating"
    PRESSURIZING = "Pressurizing"
    PHASING = "Phasing"
    OPERATING = "Operating"
    DEPRESSURIZING = "Depressurizing"


TRANSITORY = frozenset({Mode.BLEEDING, Mode.PRESSURIZING, Mode.PHASING, Mode.DEPRESSURIZING})


class Command(enum.Enum):
    BLEED = "bleed"
    HIBERNATE = "hibernate"
    PRESSURIZE = "pressurize"
    PHASE = "phase"
    OPERATE = "operate"
    DEPRESSURIZE = "depressurize"
    SHUTDOWN = "shutdown"


EDGES = {
    (Mode.DEPRESSURIZED, Command.BLEED): Mode.BLEEDING,
    (Mode.DEPRESSURIZED, Command.PRESSURIZE): Mode.PRESSURIZING,
    (Mode.DEPRESSURIZED, Command.SHUTDOWN): Mode.DEPRESSURIZED,
    (Mode.HIBERNATING, Command.BLEED): Mode.BLEEDING,
    (Mode.HIBERNATING, Command.PRESSURIZE): Mode.PRESSURIZING,
    (Mode.HIBERNATING, Command.DEPRESSURIZE): Mode.DEPRESSURIZING,
    (Mode.HIBERNATING, Command.SHUTDOWN): Mode.HIBERNATING,
    (Mode.OPERATING, Command.OPERATE): Mode.OPERATING,
    (Mode.OPERATING, Command.PHASE): Mode.PHASING,
    (Mode.OPERATING, Command.PRESSURIZE): Mode.PRESSURIZING,
    (Mode.OPERATING, Command.HIBERNATE): Mode.HIBERNATING,
    (Mode.OPERATING, Command.SHUTDOWN): Mode.HIBERNATING,
    (Mode.OPERATING, Command.DEPRESSURIZE): Mode.DEPRESSURIZING,
    # a phasing run that failed to converge parks in Phasing until retried or aborted
    (Mode.PHASING, Command.PHASE): Mode.PHASING,
    (Mode.PHASING, Command.HIBERNATE): Mode.HIBERNATING,
    (Mode.PHASING, Command.DEPRESSURIZE): Mode.DEPRESSURIZING,
}

# completion of a transitory step
AUTO_ADVANCE = {
    Mode.BLEEDING: Mode.HIBERNATING,
    Mode.PRESSURIZING: Mode.PHASING,
    Mode.PHASING: Mode.OPERATING,
    Mode.DEPRESSURIZING: Mode.DEPRESSURIZED,
}


@dataclass(frozen=True)
class OperationMode:
    mode: Mode = Mode.DEPRESSURIZED
    target_preload: float = 0.0

    def __post_init__(self):
        if self.mode is Mode.HIBERNATING and self.target_preload != HIBERNATE_PRELOAD_KPA:
            raise ValueError("hibernation holds the line at 100 kPa")


def _preload_for(mode: Mode, operating_preload: float) -> float:
    if mode in (Mode.DEPRESSURIZED, Mode.DEPRESSURIZING):
        return 0.0
    if mode in (Mode.HIBERNATING, Mode.BLEEDING):
        return HIBERNATE_PRELOAD_KPA
    return operating_preload


def transition(mode: OperationMode, command: Command | str, *,
               operating_preload: float = DEFAULT_OPERATING_PRELOAD) -> OperationMode:
    """Next mode for ``command``; raises IllegalTransition for missing edges."""
    command = Command(command)
    try:
        nxt = EDGES[(mode.mode, command)]
    except KeyError:
        raise IllegalTransition(mode.mode, command) from None
    return OperationMode(nxt, _preload_for(nxt, operating_preload))


def advance(mode: OperationMode, *,
            operating_preload: float = DEFAULT_OPERATING_PRELOAD) -> OperationMode:
    """Mode reached when a transitory step completes; stable modes are unchanged."""
    nxt = AUTO_ADVANCE.get(mode.mode)
    if nxt is None:
        return mode
    return OperationMode(nxt, _preload_for(nxt, operating_preload))


def reachable(start: Mode, *, avoid: Mode | None = None) -> set[Mode]:
    """Modes reachable from ``start`` by commands and auto-advance, never entering ``avoid``."""
    seen = {start}
    frontier = [start]
    while frontier:
        m = frontier.pop()
        succ = [nxt for (src, _), nxt in EDGES.items() if src is m]
        if m in AUTO_ADVANCE:
            succ.append(AUTO_ADVANCE[m])
        for nxt in succ:
            if nxt is avoid or nxt in seen:
                continue
            seen.add(nxt)
            frontier.append(nxt)
    return seen


@dataclass(frozen=True)
class PhasePlan:
    valve: Valve
    open_time: float
    predicted_volume: float
    predicted_residual: float = 0.0


def plan_correction(delta_phi: float, valve: ValveSpec, delta_p: float,
                    phase_constant: float = DEFAULT_PHASE_CONSTANT) -> PhasePlan:
    """Valve and opening time for a signed phase correction ``delta_phi`` [deg].

    Positive ``delta_phi`` means the line needs water (intake); negative means
    water must be let out.  The opening time includes the valve latency.
    """
    if not delta_p > 0:
        raise ZeroPressureDrop(f"pressure drop must be > 0, got {delta_p}")
    which = Valve.INTAKE if delta_phi > 0 else Valve.OUTLET
    volume = abs(delta_phi) / phase_constant
    if volume == 0.0:
        return PhasePlan(which, 0.0, 0.0, 0.0)
    t = abs(delta_phi) / (phase_constant * valve.flow_factor_Kv * math.sqrt(delta_p))
    return PhasePlan(which, t + valve.latency, volume, 0.0)


def measure_phase(plant: PlantState, seed: int) -> tuple[float, float]:
    frame = read_sensors(plant, seed)
    return frame.phase_offset, frame.pressure_readout


def _set_line_pressure(plant: PlantState, target: float, seed: int) -> PlantState:
    """Set the regulator so the measured water pressure lands on ``target``."""
    plant = set_regulator(plant, min(max(target, 0.0), REGULATOR_MAX_KPA))
    _, reading = measure_phase(plant, seed)
    trimmed = plant.line.regulator_setpoint + (target - reading)
    return set_regulator(plant, min(max(trimmed, 0.0), REGULATOR_MAX_KPA))


def run_phasing(plant: PlantState, cfg: PhasingConfig = PhasingConfig(), *,
                seed: int = 0) -> tuple[PlantState, list[PhasePlan], list[float]]:
    """Phase the transmission; returns the plant, the corrections, and each reading.

    Readings are encoder-based; each reading is taken after ``settle_time``
    of ringdown with the output clamped.
    """
    intake_belief = cfg.intake_belief or plant.intake
    outlet_belief = cfg.outlet_belief or plant.outlet
    plans: list[PhasePlan] = []
    readings: list[float] = []
    fine = False
    for it in range(cfg.max_iterations + 1):
        plant = settle(plant, cfg.settle_time, dt=cfg.dt)
        offset, pressure = measure_phase(plant, seed + it)
        readings.append(offset)
        if abs(offset) <= cfg.tolerance:
            return plant, plans, readings
        if it == cfg.max_iterations:
            break
        if not fine and abs(offset) <= cfg.coarse_band:
            plant = _set_line_pressure(plant, cfg.injection_pressure - cfg.fine_delta_p, seed + it)
            _, pressure = measure_phase(plant, seed + it)
            fine = True
        correction = -offset
        if correction > 0:
            valve, dp = intake_belief, cfg.injection_pressure - pressure
        else:
            valve, dp = outlet_belief, pressure
        plan = plan_correction(correction, valve, dp, plant.phase_constant)
        plans.append(plan)
        log.debug("phasing %d: offset %.3f deg, %s %.4f s", it, offset,
                  plan.valve.value, plan.open_time)
        plant = apply_valve(plant, plan.valve, plan.open_time, dt=cfg.dt)
    raise DidNotConverge(f"phase offset still {readings[-1]:.3f} deg after "
                         f"{cfg.max_iterations} corrections", state=plant, plans=plans)


def bleed(plant: PlantState, cycles: int, *, factor: float = 0.5,
          floor: float = 2.0e-4) -> PlantState:
    """Halve (by default) the undissolved air fraction per cycle, down to ``floor``."""
    if cycles < 1:
        raise ValueError("bleed needs at least one cycle")
    if not 0.0 < factor < 1.0:
        raise ValueError("bleed factor must lie in (0, 1)")
    air = plant.air_fraction
    for _ in range(cycles):
        air = max(floor, air * factor)
    return replace(plant, air_fraction=air)


@dataclass
class EventLog:
    rows: list = field(default_factory=list)

    def add(self, time: float, mode: Mode, event: str, value="") -> None:
        self.rows.append((time, mode.value, event, value))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time", "mode", "event", "value"])
        for t, mode, event, value in self.rows:
            writer.writerow([repr(float(t)), mode, event,
                             repr(value) if isinstance(value, float) else value])
        return buf.getvalue()


class Controller:
    """Owns the plant between commands and runs each mode's procedure."""

    def __init__(self, plant: PlantState, *, phasing: PhasingConfig = PhasingConfig(),
                 operating_preload: float = DEFAULT_OPERATING_PRELOAD,
                 bleed_cycles: int = 5, bleed_factor: float = 0.5,
                 bleed_floor: float = 2.0e-4, seed: int = 0):
        if not 0.0 < operating_preload <= REGULATOR_MAX_KPA:
            raise ValueError("operating preload must lie in (0, 860] kPa")
        self.plant = plant
        self.phasing = phasing
        self.operating_preload = operating_preload
        self.bleed_cycles = bleed_cycles
        self.bleed_factor = bleed_factor
        self.bleed_floor = bleed_floor
        self.seed = seed
        self.mode = OperationMode(Mode.DEPRESSURIZED, 0.0)
        self.events = EventLog()
        self.last_plans: list[PhasePlan] = []
        self.last_residual: float | None = None
        self._phase_runs = 0

    def _enter(self, mode: OperationMode) -> None:
        self.mode = mode
        self.events.add(self.plant.time, mode.mode, "enter", mode.target_preload)

    def _regulate(self, kpa: float) -> None:
        self.plant = set_regulator(self.plant, kpa)
        self.events.add(self.plant.time, self.mode.mode, "preload", kpa)

    def command(self, command: Command | str, **kwargs) -> OperationMode:
        command = Command(command)
        nxt = transition(self.mode, command, operating_preload=self.operating_preload)
        self.events.add(self.plant.time, self.mode.mode, "command", command.value)
        self._enter(nxt)
        while True:
            self._run_procedure(**kwargs)
            if self.mode.mode not in TRANSITORY:
                return self.mode
            self._enter(advance(self.mode, operating_preload=self.operating_preload))

    def _run_procedure(self, **kwargs) -> None:
        m = self.mode.mode
        if m is Mode.PRESSURIZING:
            self._regulate(self.operating_preload)
        elif m is Mode.PHASING:
            self._phase()
        elif m is Mode.BLEEDING:
            self._regulate(HIBERNATE_PRELOAD_KPA)
            cycles = int(kwargs.get("cycles", self.bleed_cycles))
            self.plant = bleed(self.plant, cycles, factor=self.bleed_factor,
                               floor=self.bleed_floor)
            self.events.add(self.plant.time, m, "air_fraction", self.plant.air_fraction)
        elif m is Mode.DEPRESSURIZING:
            self._regulate(0.0)
        elif m is Mode.HIBERNATING:
            if self.plant.line.regulator_setpoint != HIBERNATE_PRELOAD_KPA:
                self._regulate(HIBERNATE_PRELOAD_KPA)

    def _phase(self) -> None:
        self._phase_runs += 1
        try:
            plant, plans, readings = run_phasing(self.plant, self.phasing,
                                                 seed=self.seed * 1000 + self._phase_runs * 100)
        except DidNotConverge as exc:
            self.plant = exc.state
            self.last_plans = exc.plans
            self.events.add(self.plant.time, Mode.PHASING, "did_not_converge", len(exc.plans))
            raise
        self.plant = plant
        self.last_plans = plans
        self.last_residual = readings[-1]
        for plan in plans:
            self.events.add(self.plant.time, Mode.PHASING, f"open_{plan.valve.value}",
                            plan.open_time)
        self.events.add(self.plant.time, Mode.PHASING, "residual_deg", readings[-1])
        self._regulate(self.operating_preload)
