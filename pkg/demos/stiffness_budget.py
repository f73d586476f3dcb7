"""
Where does the transmission's compliance come from?
===================================================

The transmission is a chain of springs in series: the water column, a little
undissolved air, the cable, the translating core and the rolling diaphragms.
This script prints the budget, compares the two ways of counting the core,
and sweeps the air fraction.
"""

# %%
# The default configuration carries the bench geometry and material constants.
import numpy as np

from rdtrans.stiffness import (CompositionMode, TransmissionConfig, air_fraction_sweep,
                               max_force, max_torque, rotational_stiffness, total_stiffness)

cfg = TransmissionConfig()
budget = total_stiffness(cfg)
for name, share in budget.compliance_share.items():
    print(f"{name:10s} {budget.effective_stiffness()[name]:10.3e} N/m  {100 * share:5.1f}% of compliance")
print(f"total      {budget.k_total_linear:10.3e} N/m  = {budget.k_total_rotational:.2f} N*m/rad")

# %%
# The diaphragm and the undissolved air dominate.  Counting the core as
# 1/(2 K_core) instead of 2/K_core makes the transmission look stiffer:
half = total_stiffness(TransmissionConfig(composition_mode=CompositionMode.AS_PRINTED_EQ7))
print(f"half-core total: {half.k_total_linear:.3e} N/m")

# %%
# Load limits follow from the diaphragm pressure rating.
f = max_force(cfg.pressure_max, cfg.radius_piston)
print(f"max force {f:.1f} N, max torque {max_torque(f, cfg.radius_capstan):.3f} N*m")

# %%
# Stiffness falls steeply as air builds up in the line.
fractions = np.geomspace(1e-5, 1e-2, 7)
for frac, k in air_fraction_sweep(cfg, fractions):
    print(f"air {100 * frac:8.4f}%   k_rot {rotational_stiffness(k, cfg.radius_capstan):7.2f} N*m/rad")
