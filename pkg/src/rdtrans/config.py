"""Flat ``key = value`` configuration files.

One file configures everything: the stiffness budget, the simulated plant,
and the controller.  Lines starting with ``#`` or ``;`` are comments.  Keys
ending in ``_kpa``, ``_deg`` or ``_ml`` are in those units; everything else is
SI.  Unknown keys are rejected so typos do not pass silently.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace

from .controller import DEFAULT_OPERATING_PRELOAD, PhasingConfig
from .errors import ConfigError
from .plant import PlantState
from .stiffness import CompositionMode, TransmissionConfig


@dataclass(frozen=True)
class SystemConfig:
    transmission: TransmissionConfig = field(default_factory=TransmissionConfig)
    plant: PlantState = field(default_factory=PlantState)
    phasing: PhasingConfig = field(default_factory=PhasingConfig)
    operating_preload_kpa: float = DEFAULT_OPERATING_PRELOAD
    bleed_cycles: int = 5
    bleed_factor: float = 0.5
    bleed_floor: float = 2.0e-4
    # |initial misalignment| is drawn uniformly below this unless pinned
    initial_phase_spread_deg: float = 30.0
    initial_phase_offset_deg: float | None = None


# key -> (group, attribute, converter)
_KEYS = {
    "pressure_max": ("transmission", "pressure_max", float),
    "radius_piston": ("transmission", "radius_piston", float),
    "radius_capstan": ("transmission", "radius_capstan", float),
    "cable_modulus": ("transmission", "cable_modulus", float),
    "cable_area": ("transmission", "cable_area", float),
    "cable_free_length": ("transmission", "cable_free_length", float),
    "stiffness_core": ("transmission", "stiffness_core", float),
    "stiffness_diaphragm": ("transmission", "stiffness_diaphragm", float),
    "composition_mode": ("transmission", "composition_mode", CompositionMode),
    "bulk_modulus_water": ("fluid", "bulk_modulus_water", float),
    "bulk_modulus_air": ("fluid", "bulk_modulus_air", float),
    "area_cylinder": ("fluid", "area_cylinder", float),
    "area_hose": ("fluid", "area_hose", float),
    "length_cylinder": ("fluid", "length_cylinder", float),
    "length_hose": ("fluid", "length_hose", float),
    "fraction_air": ("fluid", "fraction_air", float),
    "inertia_j": ("model", "inertia_J", float),
    "damping_b": ("model", "damping_B", float),
    "stiffness_k": ("model", "stiffness_K", float),
    "coulomb_torque": ("plant", "coulomb_torque", float),
    "phase_constant_deg_per_ml": ("plant", "phase_constant", float),
    "pressure_gain_kpa_per_ml": ("plant", "pressure_gain", float),
    "torque_noise": ("plant", "torque_noise", float),
    "pressure_resolution_kpa": ("plant", "pressure_resolution", float),
    "stiction_velocity": ("plant", "stiction_velocity", float),
    "air_fraction_initial": ("plant", "air_fraction", float),
    "supply_pressure_kpa": ("line", "supply_pressure", float),
    "intake_kv": ("intake", "flow_factor_Kv", float),
    "intake_latency": ("intake", "latency", float),
    "outlet_kv": ("outlet", "flow_factor_Kv", float),
    "outlet_latency": ("outlet", "latency", float),
    "phasing_tolerance_deg": ("phasing", "tolerance", float),
    "fine_delta_p_kpa": ("phasing", "fine_delta_p", float),
    "max_iterations": ("phasing", "max_iterations", int),
    "injection_pressure_kpa": ("phasing", "injection_pressure", float),
    "settle_time": ("phasing", "settle_time", float),
    "coarse_band_deg": ("phasing", "coarse_band", float),
    "intake_kv_belief": ("belief_intake", "flow_factor_Kv", float),
    "outlet_kv_belief": ("belief_outlet", "flow_factor_Kv", float),
    "operating_preload_kpa": ("system", "operating_preload_kpa", float),
    "bleed_cycles": ("system", "bleed_cycles", int),
    "bleed_factor": ("system", "bleed_factor", float),
    "bleed_floor": ("system", "bleed_floor", float),
    "initial_phase_spread_deg": ("system", "initial_phase_spread_deg", float),
    "initial_phase_offset_deg": ("system", "initial_phase_offset_deg", float),
}

_SECTION = "transmission"


def parse_config(text: str) -> SystemConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    groups: dict[str, dict] = {}
    for key, raw in parser.items(_SECTION):
        if key not in _KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        group, attr, conv = _KEYS[key]
        try:
            groups.setdefault(group, {})[attr] = conv(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    try:
        return _build(groups)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _build(groups: dict) -> SystemConfig:
    base = SystemConfig()
    fluid_kw = dict(groups.get("fluid", {}))
    if "fraction_air" in fluid_kw:
        fluid_kw["fraction_water"] = 1.0 - fluid_kw["fraction_air"]
    fluid = replace(base.transmission.fluid, **fluid_kw)
    transmission = replace(base.transmission, fluid=fluid, **groups.get("transmission", {}))

    p = base.plant
    plant = replace(
        p,
        model=replace(p.model, **groups.get("model", {})),
        line=replace(p.line, **groups.get("line", {})),
        intake=replace(p.intake, **groups.get("intake", {})),
        outlet=replace(p.outlet, **groups.get("outlet", {})),
        **groups.get("plant", {}),
    )
    phasing_kw = dict(groups.get("phasing", {}))
    if "belief_intake" in groups:
        phasing_kw["intake_belief"] = replace(plant.intake, **groups["belief_intake"])
    if "belief_outlet" in groups:
        phasing_kw["outlet_belief"] = replace(plant.outlet, **groups["belief_outlet"])
    phasing = replace(base.phasing, **phasing_kw)
    return replace(base, transmission=transmission, plant=plant, phasing=phasing,
                   **groups.get("system", {}))


def load_config(path: str | os.PathLike) -> SystemConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def config_keys() -> list[str]:
    return sorted(_KEYS)
