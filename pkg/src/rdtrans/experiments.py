"""Input profiles and runners for the three bench experiments."""
from __future__ import annotations

import enum
import math
from dataclasses import replace

import numpy as np

from .logs import ExperimentLog, InputSchedule
from .plant import PlantState, run_schedule

HAND_LOAD_INERTIA = 0.0387  # kg*m^2 on the output shaft


class ExperimentKind(enum.Enum):
    STEP_FIT = "step"
    SINE_HYSTERESIS = "sine"
    HAND_TRACKING = "hand"


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 + x * (6.0 * x - 15.0))


def step_torque(t, levels=(0.5, 0.0, -0.5, 0.0, 1.0, 0.0, -1.0, 0.0),
                hold: float = 0.15, lead: float = 0.01):
    """Consecutive torque steps, each held for ``hold`` seconds after a rest lead-in."""
    t = np.asarray(t, dtype=float)
    idx = np.floor((t - lead) / hold + 1e-9).astype(int)
    out = np.zeros_like(t)
    inside = (idx >= 0) & (idx < len(levels))
    out[inside] = np.asarray(levels, dtype=float)[idx[inside]]
    return out


def sine_torque(t, amplitude: float = 1.0, frequency: float = 0.25, ramp: float = 0.8):
    """One torque sine cycle from rest, eased in and out so the shaft does not ring."""
    t = np.asarray(t, dtype=float)
    period = 1.0 / frequency
    envelope = _smoothstep(t / ramp) * _smoothstep((period - t) / ramp)
    return amplitude * np.sin(2.0 * np.pi * frequency * t) * envelope


HAND_TONES = ((0.6, 0.4, 0.0), (0.3, 1.1, 1.0), (0.15, 2.3, 2.0))


def hand_torque(t, duration: float = 6.0, scale: float = 1.0):
    """Multi-sine stand-in for a hand-driven handle, eased in and out."""
    t = np.asarray(t, dtype=float)
    torque = sum(a * np.sin(2.0 * np.pi * f * t + ph) for a, f, ph in HAND_TONES)
    envelope = _smoothstep(t / 0.5) * _smoothstep((duration - t) / 0.5)
    return scale * torque * envelope


DURATIONS = {
    ExperimentKind.STEP_FIT: 0.01 + 8 * 0.15,
    ExperimentKind.SINE_HYSTERESIS: 4.0,
    ExperimentKind.HAND_TRACKING: 6.0,
}


def profile(kind: ExperimentKind | str, dt: float = 1e-3):
    """Sample times, per-interval drive torque, and torque at the sample instants.

    The drive over ``[t_k, t_k + dt)`` is the continuous profile at the
    interval midpoint, so the held staircase has no net lag behind the
    logged torque.
    """
    kind = ExperimentKind(kind)
    t = np.arange(int(round(DURATIONS[kind] / dt)) + 1) * dt
    if kind is ExperimentKind.STEP_FIT:
        tau = step_torque(t)
        return t, tau, tau
    fn = sine_torque if kind is ExperimentKind.SINE_HYSTERESIS else hand_torque
    return t, fn(t + 0.5 * dt), fn(t)


def run_experiment(plant: PlantState, kind: ExperimentKind | str, *, seed: int = 0,
                   dt: float = 1e-3) -> tuple[PlantState, ExperimentLog]:
    """Drive a copy of the plant through one experiment and log it.

    Step and sine runs clamp the output shaft; the hand run frees it under
    the 0.0387 kg*m^2 load.  Every run starts from rest: the shafts are
    stopped and the input shaft is placed where the spring is relaxed.  The
    returned plant is the post-run state with the original load restored.
    """
    kind = ExperimentKind(kind)
    t, drive, measured = profile(kind, dt)
    plant = replace(plant, theta_in=plant.theta_out - math.radians(plant.phase_offset),
                    omega_in=0.0, omega_out=0.0)
    if kind is ExperimentKind.HAND_TRACKING:
        clamped, sim = False, replace(plant, load_inertia=HAND_LOAD_INERTIA)
    else:
        clamped, sim = True, plant
    schedule = InputSchedule(time=t, torque_in=drive, torque_load=None, output_clamped=clamped)
    final, log = run_schedule(sim, schedule, seed=seed, measured_torque=measured,
                              metadata={"kind": kind.value, "seed": seed})
    return replace(final, load_inertia=plant.load_inertia), log
