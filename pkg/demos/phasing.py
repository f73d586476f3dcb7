"""
Phasing a misaligned transmission
=================================

When the line holds too much or too little water the output shaft sits at an
angle to the input.  The phasing loop reads the encoders, converts the
misalignment to a water volume and opens the intake or outlet valve for the
time that volume takes.  Here the controller also believes the valves are 20%
faster than they really are.
"""

# %%
from dataclasses import replace

from rdtrans.controller import PhasingConfig, run_phasing
from rdtrans.plant import PlantState, set_regulator, with_phase_offset

plant = set_regulator(with_phase_offset(PlantState(), -17.0), 600.0)
print(f"start: {plant.phase_offset:+.2f} deg at {plant.line.water_pressure:.0f} kPa")

belief = replace(plant.intake, flow_factor_Kv=1.2 * plant.intake.flow_factor_Kv)
cfg = PhasingConfig(intake_belief=belief, outlet_belief=belief)

# %%
# Each correction undershoots by the belief error, so a few rounds are needed.
# Once the offset is small the line is dropped to 15 kPa below the supply so
# intake flow is slow and fine-grained.
plant, plans, readings = run_phasing(plant, cfg)
for reading, plan in zip(readings, plans):
    print(f"read {reading:+7.3f} deg -> {plan.valve.value:6s} for {1000 * plan.open_time:6.1f} ms")
print(f"final reading {readings[-1]:+.3f} deg")
