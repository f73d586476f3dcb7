"""
A scripted operator session
===========================

The same line-oriented commands an operator would type, fed from a list.
Outputs land in a temporary directory.
"""

# %%
import tempfile

from rdtrans.cli import Session, SessionConfig
from rdtrans.config import parse_config

commands = """
status
bleed cycles=4
pressurize
run step
fit
hibernate
status
""".split("\n")

with tempfile.TemporaryDirectory() as tmp:
    session = Session(parse_config("coulomb_torque = 0"), SessionConfig(log_directory=tmp, random_seed=3))
    for line in commands:
        session.execute(line)
    print(open(f"{tmp}/events.csv").read())
