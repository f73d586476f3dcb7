"""Lumped stiffness budget of the transmission.

The transmission is treated as a chain of springs in series, loaded by the
input capstan while the output capstan is locked:

    water column, undissolved air, cable, translating core, rolling diaphragm

Fluid stiffnesses follow from bulk moduli and line geometry; cable stiffness
from E*A/L.  Core and diaphragm stiffnesses are measured/FEA constants and are
consumed as inputs.  All quantities are SI (N, m, Pa).
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import NonPositiveInput, ZeroFraction, ZeroStiffnessComponent

COMPONENTS = ("water", "air", "cable", "core", "diaphragm")


class Phase(enum.Enum):
    WATER = "water"
    AIR = "air"


class CompositionMode(enum.Enum):
    # 1/(2 K_core) core term
    AS_PRINTED_EQ7 = "as_printed_eq7"
    # 2/K_core core term (default)
    TABLE_II_CONSISTENT = "table_ii_consistent"


@dataclass(frozen=True)
class FluidProperties:
    bulk_modulus_water: float = 2.20e9
    # gamma * p_atm; see README for why this is not 1.42 GPa
    bulk_modulus_air: float = 1.42e5
    area_cylinder: float = 9.62e-4
    area_hose: float = 3.17e-5
    length_cylinder: float = 3.80e-2
    length_hose: float = 4.26e-2
    fraction_water: float = 0.9999
    fraction_air: float = 1.0e-4

    def __post_init__(self):
        for name in ("bulk_modulus_water", "bulk_modulus_air", "area_cylinder",
                     "area_hose", "length_cylinder", "length_hose"):
            if not getattr(self, name) > 0:
                raise NonPositiveInput(f"{name} must be > 0")
        for name in ("fraction_water", "fraction_air"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if abs(self.fraction_water + self.fraction_air - 1.0) > 1e-9:
            raise ValueError("fraction_water + fraction_air must equal 1")

    def with_air_fraction(self, fraction: float) -> "FluidProperties":
        return replace(self, fraction_air=fraction, fraction_water=1.0 - fraction)


@dataclass(frozen=True)
class TransmissionConfig:
    pressure_max: float = 1.7e6
    radius_piston: float = 0.015
    radius_capstan: float = 0.010
    cable_modulus: float = 200e9
    # free parameters, calibrated so E*A/L = 8.98e6 N/m
    cable_area: float = 1.2e-6
    cable_free_length: float = 0.026726
    stiffness_core: float = 3.80e6
    stiffness_diaphragm: float = 1.02e6
    fluid: FluidProperties = field(default_factory=FluidProperties)
    composition_mode: CompositionMode = CompositionMode.TABLE_II_CONSISTENT

    def __post_init__(self):
        for name in ("pressure_max", "radius_piston", "radius_capstan",
                     "cable_modulus", "cable_area", "cable_free_length",
                     "stiffness_core", "stiffness_diaphragm"):
            if not getattr(self, name) > 0:
                raise NonPositiveInput(f"{name} must be > 0")


@dataclass(frozen=True)
class StiffnessBreakdown:
    k_water: float
    k_air: float
    k_cable: float
    k_core: float
    k_diaphragm: float
    k_total_linear: float
    k_total_rotational: float
    compliance: dict
    compliance_share: dict
    mode: CompositionMode

    def effective_stiffness(self) -> dict:
        """Stiffness of each series term as it enters the total (1/compliance)."""
        return {name: 1.0 / c for name, c in self.compliance.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["component", "stiffness_N_per_m", "compliance_share"])
        for name in COMPONENTS:
            writer.writerow([name, repr(getattr(self, f"k_{name}")),
                             repr(self.compliance_share[name])])
        writer.writerow(["total", repr(self.k_total_linear), repr(1.0)])
        return buf.getvalue()


@dataclass(frozen=True)
class CableTensionSet:
    """Cable preload tensions and moment arms about the capstan y-axis.

    ``arm_left``/``arm_right`` are the departure arms.  The termination arms
    default to the same values, which is the symmetric layout.
    """

    tension_left: float
    tension_right: float
    arm_left: float
    arm_right: float
    termination_arm_left: float | None = None
    termination_arm_right: float | None = None

    def __post_init__(self):
        if self.tension_left < 0 or self.tension_right < 0:
            raise ValueError("cable tensions must be >= 0")


def fluid_stiffness(props: FluidProperties, phase: Phase | str) -> float:
    """Axial stiffness [N/m] of one fluid phase in the line.

    The phase occupies fraction ``p`` of the two diaphragm cylinders and the
    hose: ``K = 1 / (p * (2 L_cyl/(A_cyl E) + L_hose/(A_hose E)))``.
    """
    phase = Phase(phase)
    if phase is Phase.WATER:
        modulus, fraction = props.bulk_modulus_water, props.fraction_water
    else:
        modulus, fraction = props.bulk_modulus_air, props.fraction_air
    if fraction <= 0.0:
        raise ZeroFraction(f"{phase.value} fraction is zero")
    compliance = fraction * (2.0 * props.length_cylinder / (props.area_cylinder * modulus)
                             + props.length_hose / (props.area_hose * modulus))
    return 1.0 / compliance


def cable_stiffness(modulus: float, area: float, length: float) -> float:
    if modulus <= 0 or area <= 0 or length <= 0:
        raise NonPositiveInput("cable modulus, area and length must be > 0")
    return modulus * area / length


def _compliance_terms(k: dict, mode: CompositionMode) -> dict:
    core = 1.0 / (2.0 * k["core"]) if mode is CompositionMode.AS_PRINTED_EQ7 else 2.0 / k["core"]
    return {
        "water": 1.0 / k["water"],
        "air": 1.0 / k["air"],
        "cable": 1.0 / k["cable"],
        "core": core,
        "diaphragm": 2.0 / k["diaphragm"],
    }


def total_stiffness(config: TransmissionConfig) -> StiffnessBreakdown:
    k = {
        "water": fluid_stiffness(config.fluid, Phase.WATER),
        "air": fluid_stiffness(config.fluid, Phase.AIR),
        "cable": cable_stiffness(config.cable_modulus, config.cable_area,
                                 config.cable_free_length),
        "core": config.stiffness_core,
        "diaphragm": config.stiffness_diaphragm,
    }
    return compose_stiffness(k, config.composition_mode, config.radius_capstan)


def compose_stiffness(k: Mapping[str, float], mode: CompositionMode | str,
                      radius_capstan: float) -> StiffnessBreakdown:
    """Series composition of component stiffnesses keyed water/air/cable/core/diaphragm."""
    mode = CompositionMode(mode)
    for name in COMPONENTS:
        value = k[name]
        if not value > 0 or math.isinf(value):
            raise ZeroStiffnessComponent(f"{name} stiffness is {value}")
    terms = _compliance_terms(k, mode)
    total_compliance = math.fsum(terms.values())
    k_lin = 1.0 / total_compliance
    return StiffnessBreakdown(
        k_water=k["water"], k_air=k["air"], k_cable=k["cable"],
        k_core=k["core"], k_diaphragm=k["diaphragm"],
        k_total_linear=k_lin,
        k_total_rotational=k_lin * radius_capstan ** 2,
        compliance=terms,
        compliance_share={n: c / total_compliance for n, c in terms.items()},
        mode=mode,
    )


def air_fraction_sweep(config: TransmissionConfig,
                       fractions: Iterable[float]) -> list[tuple[float, float]]:
    """Total linear stiffness for each undissolved-air fraction.

    The water fraction is set to ``1 - fraction`` at each point.
    """
    curve = []
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ValueError(f"air fraction must lie in (0, 1], got {f}")
        cfg = replace(config, fluid=config.fluid.with_air_fraction(f))
        curve.append((f, total_stiffness(cfg).k_total_linear))
    return curve


def rotational_stiffness(k_linear: float, radius_capstan: float) -> float:
    return k_linear * radius_capstan ** 2


def max_force(pressure_max: float, radius_piston: float) -> float:
    """Largest load the diaphragm can carry: half the rated pressure over the piston area."""
    if pressure_max <= 0 or radius_piston <= 0:
        raise NonPositiveInput("pressure and piston radius must be > 0")
    return pressure_max / 2.0 * math.pi * radius_piston ** 2


def max_torque(force: float, radius_capstan: float) -> float:
    if force < 0 or radius_capstan < 0:
        raise ValueError("force and radius must be >= 0")
    return force * radius_capstan


def moment_balance_residual(t: CableTensionSet) -> float:
    """Signed y-axis moment of the four cable runs on the capstan."""
    term_l = t.arm_left if t.termination_arm_left is None else t.termination_arm_left
    term_r = t.arm_right if t.termination_arm_right is None else t.termination_arm_right
    return (t.tension_left * t.arm_left - t.tension_left * term_l
            + t.tension_right * t.arm_right - t.tension_right * term_r)


def sweep_to_csv(curve: Sequence[tuple[float, float]], radius_capstan: float) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["air_fraction", "k_linear_N_per_m", "k_rotational_Nm_per_rad"])
    for f, k in curve:
        writer.writerow([repr(f), repr(k), repr(rotational_stiffness(k, radius_capstan))])
    return buf.getvalue()
