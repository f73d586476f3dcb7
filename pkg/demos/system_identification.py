"""
Identifying the transmission from bench experiments
===================================================

Three experiments mirror the bench: torque steps against a clamped output,
one slow torque sine for the hysteresis loop, and a hand-like drive against
an inertial load.  A second-order model is fitted to the steps and checked
against the other two.
"""

# %%
from rdtrans.experiments import ExperimentKind, run_experiment
from rdtrans.plant import FITTED_MODEL, INITIAL_MODEL, PlantState
from rdtrans.sysid import fit_second_order, hysteresis_metrics, tracking_report, validate

plant = PlantState()  # Coulomb friction 0.0136 N*m, sensor noise 0.002 N*m
_, steps = run_experiment(plant, ExperimentKind.STEP_FIT, seed=1)

# %%
# Start from the theoretical guess and fit by output error.  Friction is not
# in the model, so the fit soaks it up as extra damping.
fit = fit_second_order(steps, INITIAL_MODEL)
print("truth ", FITTED_MODEL)
print("fitted", fit.model, f"fit {fit.fit_percentage:.1f}%")

# %%
# Validate on the sine cycle, then read hysteresis and static friction off it.
_, sine = run_experiment(plant, ExperimentKind.SINE_HYSTERESIS, seed=2)
print(f"validation on sine: {validate(fit.model, sine):.1f}%")
h = hysteresis_metrics(sine)
print(f"hysteresis {h.max_hysteresis:.4f} N*m ({h.percent_of_range:.2f}% of 6 N*m), "
      f"static friction {h.static_friction:.4f} N*m")

# %%
# With the output free and loaded, torque passes through almost one-to-one.
_, hand = run_experiment(plant, ExperimentKind.HAND_TRACKING, seed=3)
t = tracking_report(hand)
print(f"torque slope {t.torque_slope:.4f}, rms angle error {t.rms_angle_error:.4f} rad")
