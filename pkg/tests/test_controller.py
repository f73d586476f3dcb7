import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdtrans.controller import (
    HIBERNATE_PRELOAD_KPA,
    Command,
    Controller,
    Mode,
    OperationMode,
    PhasingConfig,
    advance,
    bleed,
    plan_correction,
    reachable,
    run_phasing,
    transition,
)
from rdtrans.errors import DidNotConverge, IllegalTransition, ZeroPressureDrop
from rdtrans.plant import PlantState, Valve, ValveSpec, set_regulator, with_phase_offset

D, B, H, PR, PH, O, DP = (Mode.DEPRESSURIZED, Mode.BLEEDING, Mode.HIBERNATING,
                          Mode.PRESSURIZING, Mode.PHASING, Mode.OPERATING, Mode.DEPRESSURIZING)

# operating-procedure graph, written out independently of the implementation
EXPECTED = {
    (D, "bleed"): B, (D, "pressurize"): PR, (D, "shutdown"): D,
    (H, "bleed"): B, (H, "pressurize"): PR, (H, "depressurize"): DP, (H, "shutdown"): H,
    (O, "operate"): O, (O, "phase"): PH, (O, "pressurize"): PR, (O, "hibernate"): H,
    (O, "shutdown"): H, (O, "depressurize"): DP,
    (PH, "phase"): PH, (PH, "hibernate"): H, (PH, "depressurize"): DP,
}
EXPECTED_AUTO = {B: H, PR: PH, PH: O, DP: D}


def pressurized(offset_deg, preload=600.0, **kw):
    return set_regulator(with_phase_offset(PlantState(**kw), offset_deg), preload)


def with_belief(plant, error):
    kv = plant.intake.flow_factor_Kv * (1.0 + error)
    return PhasingConfig(intake_belief=replace(plant.intake, flow_factor_Kv=kv),
                         outlet_belief=replace(plant.outlet, flow_factor_Kv=kv))


def mode_of(m):
    return OperationMode(m, HIBERNATE_PRELOAD_KPA if m is H else 0.0)


@pytest.mark.parametrize("mode,command", list(itertools.product(Mode, Command)))
def test_transition_table_exhaustive(mode, command):
    expected = EXPECTED.get((mode, command.value))
    if expected is None:
        with pytest.raises(IllegalTransition):
            transition(mode_of(mode), command)
    else:
        assert transition(mode_of(mode), command).mode is expected


@pytest.mark.parametrize("mode", list(Mode))
def test_auto_advance(mode):
    assert advance(mode_of(mode)).mode is EXPECTED_AUTO.get(mode, mode)


@pytest.mark.parametrize("start", [m for m in Mode if m not in (O, PH)])
def test_operating_needs_phasing(start):
    assert O not in reachable(start, avoid=PH)
    assert O in reachable(start)


def test_hibernate_to_operating_flow():
    m = transition(mode_of(H), Command.PRESSURIZE)
    assert m.mode is PR
    m = advance(m)
    assert m.mode is PH
    assert advance(m).mode is O


def test_depressurized_operate_is_illegal():
    with pytest.raises(IllegalTransition):
        transition(mode_of(D), "operate")


def test_hibernate_sets_low_preload():
    m = transition(OperationMode(O, 600.0), Command.HIBERNATE)
    assert m == OperationMode(H, 100.0)
    with pytest.raises(ValueError):
        OperationMode(H, 600.0)


def test_plan_correction_examples():
    p = plan_correction(9.594, ValveSpec(flow_factor_Kv=1.0), 1.0)
    assert p.valve is Valve.INTAKE
    assert p.open_time == pytest.approx(1.0)
    assert p.predicted_volume == pytest.approx(1.0)
    assert plan_correction(0.0, ValveSpec(), 10.0).open_time == 0.0
    p = plan_correction(-9.594, ValveSpec(flow_factor_Kv=2.0), 4.0)
    assert p.valve is Valve.OUTLET
    assert p.open_time == pytest.approx(0.25)


def test_plan_correction_adds_latency():
    p = plan_correction(9.594, ValveSpec(flow_factor_Kv=1.0, latency=0.02), 1.0)
    assert p.open_time == pytest.approx(1.02)


def test_plan_correction_zero_drop():
    with pytest.raises(ZeroPressureDrop):
        plan_correction(1.0, ValveSpec(), 0.0)


def test_phasing_exact_model_one_correction():
    plant = pressurized(10.0, coulomb_torque=0.0)
    out, plans, readings = run_phasing(plant)
    assert len(plans) == 1
    assert abs(readings[-1]) <= 0.4
    assert abs(out.phase_offset) <= 0.4


def test_phasing_with_kv_error():
    plant = pressurized(10.0)
    out, plans, readings = run_phasing(plant, with_belief(plant, -0.1 / 1.1))
    assert len(plans) <= 3
    assert abs(readings[-1]) <= 0.4


def test_phasing_already_aligned():
    plant = pressurized(0.3)
    out, plans, readings = run_phasing(plant)
    assert plans == []
    assert out.line == plant.line


def test_fine_phasing_lowers_line_pressure():
    out, plans, _ = run_phasing(pressurized(2.0))
    assert plans
    assert out.line.water_pressure == pytest.approx(700.0 - 15.0, abs=1.0)


def test_phasing_exhausted_raises():
    plant = pressurized(20.0)
    with pytest.raises(DidNotConverge) as err:
        run_phasing(plant, replace(with_belief(plant, -0.6), max_iterations=2))
    assert len(err.value.plans) == 2


@settings(max_examples=25, deadline=None)
@given(st.floats(-180.0, 180.0), st.floats(-0.25, 0.25), st.integers(0, 1000))
def test_phasing_terminates(offset, error, seed):
    plant = pressurized(offset)
    out, plans, readings = run_phasing(plant, with_belief(plant, error), seed=seed)
    assert len(plans) <= 20
    assert abs(readings[-1]) <= 0.4


@settings(max_examples=25, deadline=None)
@given(st.floats(-60.0, 60.0), st.floats(-0.33, 0.49), st.integers(0, 1000))
def test_phasing_monotone(offset, error, seed):
    # belief error measured against the belief: plant flow is within 50% of it
    plant = pressurized(offset)
    cfg = replace(with_belief(plant, error), max_iterations=60)
    _, _, readings = run_phasing(plant, cfg, seed=seed)
    mags = np.abs(readings)
    assert np.all(np.diff(mags) <= 1e-9)


def test_bleed_examples():
    assert bleed(PlantState(air_fraction=0.0064), 5).air_fraction == pytest.approx(2e-4)
    assert bleed(PlantState(air_fraction=0.0064), 2).air_fraction == pytest.approx(0.0016)
    with pytest.raises(ValueError):
        bleed(PlantState(), 0)


def test_controller_end_to_end():
    ctl = Controller(with_phase_offset(PlantState(air_fraction=0.0064), -12.0), seed=3)
    assert ctl.command("bleed").mode is H
    assert ctl.plant.air_fraction == pytest.approx(2e-4)
    assert ctl.command("pressurize").mode is O
    assert abs(ctl.last_residual) <= 0.4
    assert ctl.plant.line.regulator_setpoint == 600.0
    assert ctl.command("hibernate") == OperationMode(H, 100.0)
    assert ctl.plant.line.regulator_setpoint == 100.0
    assert ctl.command("depressurize").mode is D
    with pytest.raises(IllegalTransition):
        ctl.command("operate")


def test_controller_preload_never_exceeds_regulator():
    with pytest.raises(ValueError):
        Controller(PlantState(), operating_preload=900.0)
    ctl = Controller(with_phase_offset(PlantState(), 25.0), operating_preload=860.0)
    for cmd in ("pressurize", "phase", "hibernate", "pressurize", "depressurize"):
        ctl.command(cmd)
    preloads = [float(v) for _, _, e, v in ctl.events.rows if e == "preload"]
    assert preloads and max(preloads) <= 860.0


def test_event_log_csv():
    ctl = Controller(PlantState())
    ctl.command("pressurize")
    lines = ctl.events.to_csv().splitlines()
    assert lines[0] == "time,mode,event,value"
    assert any(",Operating,enter," in ln for ln in lines)
