"""Fixed-timestep simulation of the transmission pair and its water line.

Mechanics: the input shaft (inertia J) and output shaft are joined by the
transmission spring K with damping B acting on the relative motion.  With the
output clamped this reduces to ``J th'' + B th' + K th = tau``.  The linear
part is integrated with an exact zero-order hold; Coulomb friction on the
input shaft is added as a torque held over each step, with a stiction band
around zero velocity.

Fluid: the water line is a volume offset (mL, relative to perfectly phased)
plus pressures in kPa.  The line pressure follows the pneumatic preload
quasi-statically.  Valve flow is ``Kv * sqrt(dP)``.

Units follow the bench: kPa for pressures, mL for water, degrees for phase,
SI for everything mechanical.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _dynamics
from .errors import NegativePressureDrop, NonPositiveDt, RegulatorLimit
from .logs import ExperimentLog, InputSchedule

ENCODER_COUNTS = 8000
ENCODER_RESOLUTION = 2.0 * math.pi / ENCODER_COUNTS
REGULATOR_MAX_KPA = 860.0
DEFAULT_PHASE_CONSTANT = 9.594  # deg per mL
MAX_DT = 0.010


@dataclass(frozen=True)
class SecondOrderModel:
    inertia_J: float
    damping_B: float
    stiffness_K: float

    def __post_init__(self):
        if not self.inertia_J > 0:
            raise ValueError("J must be > 0")
        if self.damping_B < 0 or self.stiffness_K < 0:
            raise ValueError("B and K must be >= 0")

    @property
    def natural_frequency(self) -> float:
        return math.sqrt(self.stiffness_K / self.inertia_J)

    @property
    def damping_ratio(self) -> float:
        return self.damping_B / (2.0 * math.sqrt(self.stiffness_K * self.inertia_J))

    def as_array(self) -> np.ndarray:
        return np.array([self.inertia_J, self.damping_B, self.stiffness_K])


# Starting guess from the theoretical stiffness, and the fitted step model.
INITIAL_MODEL = SecondOrderModel(6.54e-5, 0.005, 23.54)
FITTED_MODEL = SecondOrderModel(5.20e-5, 0.0021, 18.71)


class ValveState(enum.Enum):
    OPEN = "open"
    CLOSED = "closed"


class Valve(enum.Enum):
    INTAKE = "intake"
    OUTLET = "outlet"


@dataclass(frozen=True)
class ValveSpec:
    """Solenoid valve; ``flow_factor_Kv`` in mL/(s*sqrt(kPa))."""

    # ~50 ms for a 0.4 deg correction at 15 kPa; no vendor value available
    flow_factor_Kv: float = 0.215
    latency: float = 0.0
    state: ValveState = ValveState.OPEN

    def __post_init__(self):
        if not self.flow_factor_Kv > 0:
            raise ValueError("Kv must be > 0")
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


@dataclass(frozen=True)
class FluidLineState:
    water_pressure: float = 0.0
    air_preload_pressure: float = 0.0
    water_volume_offset: float = 0.0
    supply_pressure: float = 700.0
    regulator_setpoint: float = 0.0
    intake_total: float = 0.0
    outlet_total: float = 0.0

    def __post_init__(self):
        if self.water_pressure < 0 or self.air_preload_pressure < 0 or self.supply_pressure < 0:
            raise ValueError("pressures must be >= 0")
        if not 0.0 <= self.regulator_setpoint <= REGULATOR_MAX_KPA:
            raise RegulatorLimit(f"setpoint {self.regulator_setpoint} kPa outside [0, 860]")


@dataclass(frozen=True)
class PlantState:
    theta_in: float = 0.0
    theta_out: float = 0.0
    omega_in: float = 0.0
    omega_out: float = 0.0
    line: FluidLineState = field(default_factory=FluidLineState)
    time: float = 0.0
    model: SecondOrderModel = FITTED_MODEL
    coulomb_torque: float = 0.0136
    phase_constant: float = DEFAULT_PHASE_CONSTANT
    load_inertia: float = 0.0
    intake: ValveSpec = field(default_factory=ValveSpec)
    outlet: ValveSpec = field(default_factory=ValveSpec)
    air_fraction: float = 2.0e-4
    # kPa of line pressure per mL of extra water; arbitrary small compliance
    pressure_gain: float = 1.0
    torque_noise: float = 0.002
    pressure_resolution: float = 1.0
    stiction_velocity: float = 1e-4
    torque_in: float = 0.0
    torque_out: float = 0.0

    @property
    def phase_offset(self) -> float:
        """Output-minus-input misalignment at rest [deg], set by the water volume."""
        return self.line.water_volume_offset * self.phase_constant

    @property
    def output_inertia(self) -> float:
        return self.model.inertia_J + self.load_inertia


def _equalized(line: FluidLineState, gain: float) -> FluidLineState:
    water = max(0.0, line.air_preload_pressure + gain * line.water_volume_offset)
    return replace(line, water_pressure=water)


def set_regulator(state: PlantState, setpoint: float) -> PlantState:
    """Command the preload regulator; the line follows instantly."""
    if not 0.0 <= setpoint <= REGULATOR_MAX_KPA:
        raise RegulatorLimit(f"setpoint {setpoint} kPa outside [0, {REGULATOR_MAX_KPA}]")
    line = replace(state.line, regulator_setpoint=setpoint, air_preload_pressure=setpoint)
    return replace(state, line=_equalized(line, state.pressure_gain))


def _friction_opposes(f: float, omega: float) -> bool:
    return f == 0.0 or (omega * f) <= 0.0


def step(state: PlantState, input_torque: float, output_clamped: bool,
         dt: float = 1e-3, load_torque: float = 0.0) -> PlantState:
    """Advance the shafts by one step of length ``dt``.

    With ``output_clamped`` the output angle is held and the spring acts
    between the input shaft and the clamp.  Otherwise the output carries
    ``model.inertia_J + load_inertia`` and ``load_torque``.
    """
    if not 0.0 < dt <= MAX_DT:
        raise NonPositiveDt(f"dt must lie in (0, {MAX_DT}] s, got {dt}")
    m = state.model
    J, B, K = m.inertia_J, m.damping_B, m.stiffness_K
    tc = state.coulomb_torque
    phase = math.radians(state.phase_offset)
    th, om = state.theta_in, state.omega_in

    if output_clamped:
        anchor = state.theta_out - phase
        c = _dynamics.single_shaft(J, B, K, dt)
        if tc > 0.0 and abs(om) <= state.stiction_velocity:
            drive = input_torque - K * (th - anchor)
            if abs(drive) <= tc:
                new_th, new_om = th, 0.0
            else:
                f = -math.copysign(tc, drive)
                new_th, new_om = _dynamics.advance(th, 0.0, input_torque + f, anchor, c)
                if not _friction_opposes(f, new_om):
                    new_om = 0.0
        else:
            f = -math.copysign(tc, om) if tc > 0.0 else 0.0
            new_th, new_om = _dynamics.advance(th, om, input_torque + f, anchor, c)
            if tc > 0.0 and not _friction_opposes(f, new_om):
                new_om = 0.0
        torque_out = K * (new_th - anchor) + B * new_om
        return replace(state, theta_in=new_th, omega_in=new_om, omega_out=0.0,
                       time=state.time + dt, torque_in=input_torque, torque_out=torque_out)

    J_out = state.output_inertia
    th_o, om_o = state.theta_out, state.omega_out
    stuck = False
    if tc > 0.0 and abs(om) <= state.stiction_velocity:
        drive = input_torque - K * (th - th_o + phase) + B * om_o
        if abs(drive) <= tc:
            stuck = True
            f = 0.0
        else:
            f = -math.copysign(tc, drive)
            om = 0.0
    else:
        f = -math.copysign(tc, om) if tc > 0.0 else 0.0

    if stuck:
        c = _dynamics.single_shaft(J_out, B, K, dt)
        new_th_o, new_om_o = _dynamics.advance(th_o, om_o, load_torque, th + phase, c)
        new_th, new_om = th, 0.0
    else:
        phi, gam = _dynamics.two_shaft(J, J_out, B, K, dt)
        x = phi @ np.array([th, om, th_o, om_o]) + gam @ np.array([input_torque + f, load_torque, phase])
        new_th, new_om, new_th_o, new_om_o = (float(v) for v in x)
        if tc > 0.0 and not _friction_opposes(f, new_om):
            new_om = 0.0
    torque_out = K * (new_th - new_th_o + phase) + B * (new_om - new_om_o)
    return replace(state, theta_in=new_th, omega_in=new_om, theta_out=new_th_o,
                   omega_out=new_om_o, time=state.time + dt,
                   torque_in=input_torque, torque_out=torque_out)


def valve_flow(valve: ValveSpec, delta_p: float) -> float:
    """Volumetric flow [mL/s] through a valve for a pressure drop in kPa."""
    if delta_p < 0:
        raise NegativePressureDrop(f"pressure drop must be >= 0, got {delta_p}")
    if valve.state is ValveState.CLOSED:
        return 0.0
    return valve.flow_factor_Kv * math.sqrt(delta_p)


def _valve_drop(state: PlantState, which: Valve) -> float:
    if which is Valve.INTAKE:
        return abs(state.line.supply_pressure - state.line.water_pressure)
    # outlet drains to an unpressurized reservoir
    return abs(state.line.water_pressure)


def apply_valve(state: PlantState, which: Valve | str, duration: float, *,
                dt: float = 1e-3, constant_dp: bool = False, advance_mechanics: bool = True,
                output_clamped: bool = True, input_torque: float = 0.0) -> PlantState:
    """Open one valve for ``duration`` seconds and move water accordingly.

    Flow starts ``latency`` seconds after the valve is commanded open.  The
    pressure drop is re-evaluated every sub-step unless ``constant_dp``.
    With ``advance_mechanics`` the shafts are stepped alongside (zero input
    torque, output clamped by default) and the plant clock advances.
    """
    which = Valve(which)
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if duration == 0:
        return state
    valve = replace(state.intake if which is Valve.INTAKE else state.outlet, state=ValveState.OPEN)
    sign = 1.0 if which is Valve.INTAKE else -1.0
    fixed_q = valve_flow(valve, _valve_drop(state, which)) if constant_dp else None

    n = max(1, math.ceil(duration / dt - 1e-9))
    h = duration / n
    for k in range(n):
        t0, t1 = k * h, (k + 1) * h
        open_part = max(0.0, t1 - max(t0, valve.latency))
        if open_part > 0.0:
            q = fixed_q if constant_dp else valve_flow(valve, _valve_drop(state, which))
            dv = q * open_part
            line = state.line
            line = replace(
                line,
                water_volume_offset=line.water_volume_offset + sign * dv,
                intake_total=line.intake_total + (dv if sign > 0 else 0.0),
                outlet_total=line.outlet_total + (dv if sign < 0 else 0.0),
            )
            state = replace(state, line=_equalized(line, state.pressure_gain))
        if advance_mechanics:
            state = step(state, input_torque, output_clamped, h)
    return state


def volume_for_phase(delta_phi: float, phase_constant: float = DEFAULT_PHASE_CONSTANT) -> float:
    """Water volume [mL] that shifts the shafts by ``delta_phi`` degrees."""
    if not phase_constant > 0:
        raise ValueError("phase_constant must be > 0")
    return abs(delta_phi) / phase_constant


def with_phase_offset(state: PlantState, offset: float) -> PlantState:
    """Plant at rest with the line holding ``offset`` degrees of misalignment."""
    line = replace(state.line, water_volume_offset=offset / state.phase_constant)
    # the input shaft sits where the spring is relaxed
    return replace(state, line=_equalized(line, state.pressure_gain),
                   theta_in=state.theta_out - math.radians(offset), omega_in=0.0)


@dataclass(frozen=True)
class SensorFrame:
    encoder_in: int
    encoder_out: int
    torque_in: float
    torque_out: float
    pressure_readout: float

    @property
    def phase_offset(self) -> float:
        """Measured output-minus-input angle [deg] from the encoders."""
        return (self.encoder_out - self.encoder_in) * 360.0 / ENCODER_COUNTS


def encoder_counts(theta: float) -> int:
    return math.floor(theta / (2.0 * math.pi) * ENCODER_COUNTS)


def read_sensors(state: PlantState, noise_seed: int, torque_sigma: float | None = None) -> SensorFrame:
    sigma = state.torque_noise if torque_sigma is None else torque_sigma
    noise = np.random.default_rng(noise_seed).normal(0.0, 1.0, 2) * sigma
    res = state.pressure_resolution
    pressure = round(state.line.water_pressure / res) * res if res > 0 else state.line.water_pressure
    return SensorFrame(
        encoder_in=encoder_counts(state.theta_in),
        encoder_out=encoder_counts(state.theta_out),
        torque_in=state.torque_in + float(noise[0]),
        torque_out=state.torque_out + float(noise[1]),
        pressure_readout=pressure,
    )


def settle(state: PlantState, duration: float, *, dt: float = 1e-3,
           output_clamped: bool = True) -> PlantState:
    """Let the shafts ring down with no applied torque."""
    for _ in range(int(round(duration / dt))):
        state = step(state, 0.0, output_clamped, dt)
    return state


def run_schedule(state: PlantState, schedule: InputSchedule, *, seed: int = 0,
                 torque_sigma: float | None = None, measured_torque=None,
                 metadata: dict | None = None) -> tuple[PlantState, ExperimentLog]:
    """Replay an input schedule and record a trajectory log.

    Row 0 records the state before any input; row k records the state after
    holding row k-1's inputs for one sample interval.  The logged input
    torque is the scheduled torque unless ``measured_torque`` gives the
    instantaneous value at each sample.  Torque channels carry seeded
    Gaussian sensor noise; angles are the true shaft angles.
    """
    n = len(schedule)
    if n < 2:
        raise ValueError("schedule needs at least two samples")
    dts = np.diff(schedule.time)
    uniform = (schedule.time[-1] - schedule.time[0]) / (n - 1)
    if np.max(np.abs(dts - uniform)) <= 1e-6 * uniform:
        # one step size for the whole run, the same value ExperimentLog.dt reports
        dts = np.full(n - 1, uniform)
    sigma = state.torque_noise if torque_sigma is None else torque_sigma
    rows = np.empty((n, 8))

    def record(i, s, tau_in):
        rows[i] = (schedule.time[i], tau_in, s.torque_out, s.theta_in, s.theta_out,
                   s.line.water_pressure, s.line.air_preload_pressure,
                   s.line.water_volume_offset)

    logged = schedule.torque_in if measured_torque is None else np.asarray(measured_torque, float)
    if len(logged) != n:
        raise ValueError("measured_torque length mismatch")
    record(0, state, float(logged[0]))
    for i in range(1, n):
        state = step(state, float(schedule.torque_in[i - 1]), bool(schedule.output_clamped[i - 1]),
                     float(dts[i - 1]), float(schedule.torque_load[i - 1]))
        record(i, state, float(logged[i]))
    if sigma > 0:
        noise = np.random.default_rng(seed).normal(0.0, sigma, (n, 2))
        rows[:, 1:3] += noise
    log = ExperimentLog(*rows.T, metadata=dict(metadata or {}))
    return state, log
