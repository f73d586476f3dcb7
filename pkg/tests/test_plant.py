import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import step_response
from rdtrans.errors import NegativePressureDrop, NonPositiveDt, RegulatorLimit
from rdtrans.logs import InputSchedule
from rdtrans.plant import (
    ENCODER_COUNTS,
    FITTED_MODEL,
    FluidLineState,
    PlantState,
    SecondOrderModel,
    Valve,
    ValveSpec,
    ValveState,
    apply_valve,
    encoder_counts,
    read_sensors,
    run_schedule,
    set_regulator,
    step,
    valve_flow,
    volume_for_phase,
)

frictionless = PlantState(coulomb_torque=0.0)


def test_fitted_model_values():
    m = FITTED_MODEL
    assert (m.inertia_J, m.damping_B, m.stiffness_K) == (5.20e-5, 0.0021, 18.71)
    assert m.natural_frequency == pytest.approx(math.sqrt(18.71 / 5.2e-5))


def test_model_invariants():
    with pytest.raises(ValueError):
        SecondOrderModel(0.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        SecondOrderModel(1.0, -0.1, 1.0)


def test_zero_input_keeps_rest_state():
    s = step(PlantState(), 0.0, True)
    assert (s.theta_in, s.omega_in, s.theta_out, s.omega_out) == (0.0, 0.0, 0.0, 0.0)
    assert s.time == pytest.approx(1e-3)


def test_constant_torque_steady_state():
    s = frictionless
    for _ in range(3000):
        s = step(s, 0.1, True)
    assert s.theta_in == pytest.approx(0.1 / 18.71, rel=0.01)
    assert 0.1 / 18.71 == pytest.approx(5.345e-3, rel=1e-3)


def test_step_response_matches_closed_form():
    n = 500
    s = frictionless
    theta = [s.theta_in]
    for _ in range(n):
        s = step(s, 0.1, True)
        theta.append(s.theta_in)
    m = FITTED_MODEL
    ref = step_response(m.inertia_J, m.damping_B, m.stiffness_K, 0.1, np.arange(n + 1) * 1e-3)
    assert np.max(np.abs(np.array(theta) - ref)) <= 0.01 * 0.1 / m.stiffness_K


@pytest.mark.parametrize("dt", [0.0, -1e-3, 0.0101])
def test_bad_dt(dt):
    with pytest.raises(NonPositiveDt):
        step(PlantState(), 0.0, True, dt)


def test_energy_conserved_without_losses():
    s = PlantState(model=SecondOrderModel(5.2e-5, 0.0, 18.71), coulomb_torque=0.0,
                   theta_in=0.01)

    def energy(s):
        return 0.5 * s.model.inertia_J * s.omega_in ** 2 + 0.5 * s.model.stiffness_K * s.theta_in ** 2

    e0 = energy(s)
    for _ in range(10_000):
        s = step(s, 0.0, True)
    assert energy(s) == pytest.approx(e0, rel=1e-3)


def test_free_output_conserves_momentum():
    s = PlantState(coulomb_torque=0.0, load_inertia=0.01, omega_in=1.0, theta_in=0.02)
    p0 = s.model.inertia_J * s.omega_in + s.output_inertia * s.omega_out
    for _ in range(500):
        s = step(s, 0.0, False)
    p1 = s.model.inertia_J * s.omega_in + s.output_inertia * s.omega_out
    assert p1 == pytest.approx(p0, rel=1e-9)


def test_friction_holds_small_torque():
    s = PlantState(coulomb_torque=0.0136)
    for _ in range(100):
        s = step(s, 0.01, True)
    assert s.theta_in == 0.0 and s.omega_in == 0.0


def test_clamped_output_torque_sign():
    s = frictionless
    for _ in range(3000):
        s = step(s, 0.2, True)
    assert s.torque_out == pytest.approx(0.2, rel=1e-6)


def test_valve_flow_examples():
    assert valve_flow(ValveSpec(flow_factor_Kv=1.0), 4.0) == 2.0
    assert valve_flow(ValveSpec(flow_factor_Kv=1.0), 0.0) == 0.0
    assert valve_flow(ValveSpec(flow_factor_Kv=1.0, state=ValveState.CLOSED), 100.0) == 0.0
    with pytest.raises(NegativePressureDrop):
        valve_flow(ValveSpec(), -1.0)


def unit_line_plant():
    # intake drop supply - water = 1 kPa; pressure does not follow volume
    return PlantState(line=FluidLineState(supply_pressure=1.0), pressure_gain=0.0,
                      intake=ValveSpec(flow_factor_Kv=1.0))


def test_apply_valve_zero_duration():
    s = unit_line_plant()
    assert apply_valve(s, Valve.INTAKE, 0.0) is s


def test_apply_valve_one_millilitre():
    s = apply_valve(unit_line_plant(), Valve.INTAKE, 1.0, constant_dp=True,
                    advance_mechanics=False)
    assert s.line.water_volume_offset == pytest.approx(1.0, rel=1e-12)
    assert s.phase_offset == pytest.approx(9.594, rel=1e-12)


def test_apply_valve_latency_delays_flow():
    s = replace(unit_line_plant(), intake=ValveSpec(flow_factor_Kv=1.0, latency=0.25))
    s = apply_valve(s, "intake", 1.0, constant_dp=True, advance_mechanics=False)
    assert s.line.water_volume_offset == pytest.approx(0.75, rel=1e-12)


def test_apply_valve_advances_clock():
    s = apply_valve(unit_line_plant(), Valve.INTAKE, 0.05)
    assert s.time == pytest.approx(0.05)


def test_outlet_removes_water():
    s = set_regulator(PlantState(), 400.0)
    s = apply_valve(s, Valve.OUTLET, 0.1, advance_mechanics=False)
    assert s.line.water_volume_offset < 0
    assert s.line.outlet_total == pytest.approx(-s.line.water_volume_offset)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(list(Valve)), st.floats(0.0, 0.05)), max_size=6))
def test_water_conservation(ops):
    s = set_regulator(PlantState(), 500.0)
    for which, duration in ops:
        s = apply_valve(s, which, duration, advance_mechanics=False)
    net = s.line.intake_total - s.line.outlet_total
    assert s.line.water_volume_offset == pytest.approx(net, abs=1e-12)
    assert s.phase_offset == s.line.water_volume_offset * s.phase_constant


def test_volume_for_phase_examples():
    assert volume_for_phase(9.594) == pytest.approx(1.0)
    assert volume_for_phase(0.0) == 0.0
    assert volume_for_phase(-19.188) == pytest.approx(2.0)


def test_regulator_bounds():
    assert set_regulator(PlantState(), 860.0).line.regulator_setpoint == 860.0
    with pytest.raises(RegulatorLimit):
        set_regulator(PlantState(), 861.0)
    with pytest.raises(RegulatorLimit):
        FluidLineState(regulator_setpoint=900.0)


def test_line_follows_preload():
    s = set_regulator(PlantState(), 600.0)
    assert s.line.water_pressure == 600.0 and s.line.air_preload_pressure == 600.0


def test_encoder_one_revolution():
    assert encoder_counts(2.0 * math.pi) == ENCODER_COUNTS
    frame = read_sensors(PlantState(theta_in=2.0 * math.pi), 0)
    assert frame.encoder_in == 8000


def test_sensors_without_noise_are_exact():
    s = replace(PlantState(), torque_in=0.3, torque_out=-0.2)
    frame = read_sensors(s, 5, torque_sigma=0.0)
    assert (frame.torque_in, frame.torque_out) == (0.3, -0.2)


def test_sensors_deterministic():
    s = replace(PlantState(), torque_in=0.3)
    assert read_sensors(s, 11) == read_sensors(s, 11)
    assert read_sensors(s, 11) != read_sensors(s, 12)


def test_pressure_readout_quantized():
    s = set_regulator(PlantState(), 600.4)
    assert read_sensors(s, 0).pressure_readout == 600.0


def test_run_schedule_bit_identical():
    t = np.arange(400) * 1e-3
    tau = 0.5 * np.sin(2 * np.pi * 5 * t)
    sched = InputSchedule(time=t, torque_in=tau, torque_load=None, output_clamped=False)
    s = replace(PlantState(), load_inertia=0.01)
    a_state, a_log = run_schedule(s, sched, seed=3)
    b_state, b_log = run_schedule(s, sched, seed=3)
    assert a_state == b_state
    assert a_log.to_csv() == b_log.to_csv()
