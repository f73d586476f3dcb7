"""Simulation and analysis toolkit for a cable-driven rolling-diaphragm hydrostatic transmission."""
from .controller import Command, Controller, Mode, OperationMode, PhasingConfig, run_phasing, transition
from .logs import ExperimentLog, InputSchedule
from .plant import FITTED_MODEL, INITIAL_MODEL, PlantState, SecondOrderModel
from .stiffness import CompositionMode, FluidProperties, TransmissionConfig, total_stiffness
from .sysid import fit_second_order, hysteresis_metrics

__version__ = "0.1.0"

__all__ = [
    "Command", "CompositionMode", "Controller", "ExperimentLog", "FluidProperties",
    "InputSchedule", "Mode", "OperationMode", "PhasingConfig", "PlantState",
    "SecondOrderModel", "FITTED_MODEL", "INITIAL_MODEL", "TransmissionConfig",
    "fit_second_order", "hysteresis_metrics", "run_phasing", "total_stiffness", "transition",
]
