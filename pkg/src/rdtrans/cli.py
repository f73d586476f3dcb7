"""Line-oriented operator shell for the simulated transmission.

Each input line is a verb followed by optional ``key=value`` arguments::

    status
    pressurize
    phase
    run step
    fit
    run sine
    run hand
    report
    sweep min=1e-5 max=1e-2 n=40
    hibernate
    quit

Verbs that change the operating mode go through the controller's state
machine, so an out-of-order command is refused rather than executed.  Every
CSV the session writes lands in the log directory with a fixed name, which
makes two runs of the same script directly comparable.
"""
from __future__ import annotations

import argparse
import enum
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np

from . import controller as ctl
from . import experiments, sysid
from .config import SystemConfig, load_config
from .errors import ConfigError, DidNotConverge, IllegalTransition, NotOperating, TransmissionError
from .logs import ExperimentLog
from .plant import INITIAL_MODEL, PlantState, read_sensors, with_phase_offset
from .stiffness import air_fraction_sweep, rotational_stiffness, sweep_to_csv, total_stiffness


class Verb(enum.Enum):
    STATUS = "status"
    PRESSURIZE = "pressurize"
    PHASE = "phase"
    OPERATE = "operate"
    HIBERNATE = "hibernate"
    BLEED = "bleed"
    DEPRESSURIZE = "depressurize"
    SHUTDOWN = "shutdown"
    RUN_EXPERIMENT = "run"
    FIT_MODEL = "fit"
    REPORT = "report"
    SWEEP = "sweep"
    HELP = "help"
    QUIT = "quit"


ALIASES = {"experiment": Verb.RUN_EXPERIMENT, "exit": Verb.QUIT, "?": Verb.HELP}

# verbs that are controller commands under the same name
CONTROL_VERBS = {
    Verb.PRESSURIZE: ctl.Command.PRESSURIZE,
    Verb.PHASE: ctl.Command.PHASE,
    Verb.OPERATE: ctl.Command.OPERATE,
    Verb.HIBERNATE: ctl.Command.HIBERNATE,
    Verb.BLEED: ctl.Command.BLEED,
    Verb.DEPRESSURIZE: ctl.Command.DEPRESSURIZE,
    Verb.SHUTDOWN: ctl.Command.SHUTDOWN,
}

HELP_TEXT = """\
commands:
  status                      mode, pressures, phase offset, last fit
  pressurize                  raise the line to operating preload and phase it
  phase                       re-phase the shafts (from Operating)
  operate                     stay in Operating
  hibernate                   hold the line at 100 kPa
  bleed [cycles=N]            bleed undissolved air (from Depressurized/Hibernating)
  depressurize                vent the line to 0 kPa
  shutdown                    leave the line safe and end the session
  run step|sine|hand          run an experiment (Operating only)
  fit                         fit J, B, K to the latest step log
  report                      stiffness budget plus hysteresis/tracking of latest logs
  sweep [min=F max=F n=N]     stiffness versus undissolved-air fraction
  help                        this text
  quit                        end the session
"""


class ParseError(ValueError):
    """Malformed command arguments."""


@dataclass(frozen=True)
class Command:
    verb: Verb
    args: dict = field(default_factory=dict)
    positional: tuple = ()


def parse_command(line: str) -> Command | None:
    """Parse one input line; blank lines and ``#`` comments give None.

    An unrecognised verb raises KeyError; bad arguments raise ParseError.
    """
    line = line.split("#", 1)[0].strip()
    if not line:
        return None
    head, *rest = line.split()
    head = head.lower()
    if head in ALIASES:
        verb = ALIASES[head]
    elif head in _VERB_NAMES:
        verb = Verb(head)
    else:
        raise KeyError(head)
    args, positional = {}, []
    for tok in rest:
        if "=" in tok:
            key, _, value = tok.partition("=")
            if not key or not value:
                raise ParseError(f"malformed argument {tok!r}")
            args[key.lower()] = value
        else:
            positional.append(tok)
    return Command(verb, args, tuple(positional))


_VERB_NAMES = {v.value for v in Verb}


@dataclass(frozen=True)
class SessionConfig:
    config_path: str | None = None
    log_directory: str = "logs"
    random_seed: int = 0
    realtime: bool = False


def initial_plant(cfg: SystemConfig, seed: int) -> PlantState:
    """Configured plant with a seeded (or pinned) starting misalignment."""
    plant = cfg.plant
    if cfg.initial_phase_offset_deg is not None:
        offset = cfg.initial_phase_offset_deg
    else:
        spread = cfg.initial_phase_spread_deg
        offset = float(np.random.default_rng(seed).uniform(-spread, spread))
    return with_phase_offset(plant, offset)


class Session:
    """One operator session: a controller, its plant, and the files it writes."""

    def __init__(self, cfg: SystemConfig, session: SessionConfig = SessionConfig(),
                 out: TextIO | None = None):
        self.cfg = cfg
        self.session = session
        self.out = out or sys.stdout
        self.log_dir = Path(session.log_directory)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.controller = ctl.Controller(
            initial_plant(cfg, session.random_seed),
            phasing=cfg.phasing, operating_preload=cfg.operating_preload_kpa,
            bleed_cycles=cfg.bleed_cycles, bleed_factor=cfg.bleed_factor,
            bleed_floor=cfg.bleed_floor, seed=session.random_seed)
        self.logs: dict[experiments.ExperimentKind, ExperimentLog] = {}
        self.last_fit: sysid.FitResult | None = None
        self.runs = 0
        self.finished = False
        self._write_events()

    @property
    def mode(self) -> ctl.Mode:
        return self.controller.mode.mode

    @property
    def plant(self) -> PlantState:
        return self.controller.plant

    def say(self, text: str) -> None:
        print(text, file=self.out)

    def _write_events(self) -> None:
        sysid.write_text(self.log_dir / "events.csv", self.controller.events.to_csv())

    def status_line(self) -> str:
        p = self.plant
        frame = read_sensors(p, self.session.random_seed, torque_sigma=0.0)
        parts = [
            f"mode={self.mode.value}",
            f"preload={self.controller.mode.target_preload:g} kPa",
            f"water={frame.pressure_readout:g} kPa",
            f"phase_offset={frame.phase_offset:.3f} deg",
            f"air_fraction={100.0 * p.air_fraction:.4g}%",
        ]
        if self.last_fit is not None:
            m = self.last_fit.model
            parts.append(f"fit=J:{m.inertia_J:.4g},B:{m.damping_B:.4g},K:{m.stiffness_K:.4g}"
                         f" ({self.last_fit.fit_percentage:.1f}%)")
        return " ".join(parts)

    def execute(self, line: str) -> bool:
        """Run one line.  Returns False for argument errors, True otherwise."""
        try:
            cmd = parse_command(line)
        except KeyError as exc:
            self.say(f"unknown command {exc.args[0]!r}")
            self.say(HELP_TEXT.rstrip())
            return True
        except ParseError as exc:
            self.say(f"error: {exc}")
            return False
        if cmd is None:
            return True
        start = self.plant.time
        try:
            self._dispatch(cmd)
        except ParseError as exc:
            self.say(f"error: {exc}")
            return False
        except IllegalTransition as exc:
            self.say(f"refused: {exc}")
        except (NotOperating, DidNotConverge, TransmissionError) as exc:
            self.say(f"failed: {exc}")
        finally:
            self._write_events()
        if self.session.realtime:
            time.sleep(max(0.0, self.plant.time - start))
        return True

    def _dispatch(self, cmd: Command) -> None:
        v = cmd.verb
        if v is Verb.HELP:
            self.say(HELP_TEXT.rstrip())
        elif v is Verb.QUIT:
            self.finished = True
        elif v is Verb.STATUS:
            self.say(self.status_line())
        elif v in CONTROL_VERBS:
            kwargs = {}
            if v is Verb.BLEED and "cycles" in cmd.args:
                kwargs["cycles"] = _int_arg(cmd.args, "cycles")
            self.controller.command(CONTROL_VERBS[v], **kwargs)
            self.say(self.status_line())
            if v is Verb.SHUTDOWN:
                self.finished = True
        elif v is Verb.RUN_EXPERIMENT:
            kind = cmd.positional[0] if cmd.positional else cmd.args.get("kind")
            if kind is None:
                raise ParseError("run needs an experiment kind: step, sine or hand")
            try:
                kind = experiments.ExperimentKind(kind.lower())
            except ValueError:
                raise ParseError(f"unknown experiment {kind!r}") from None
            path = run_experiment(kind, self)
            self.say(f"wrote {path.name} ({len(self.logs[kind])} samples)")
        elif v is Verb.FIT_MODEL:
            self.fit()
        elif v is Verb.REPORT:
            self.report()
        elif v is Verb.SWEEP:
            lo = _float_arg(cmd.args, "min", 1e-5)
            hi = _float_arg(cmd.args, "max", 1e-2)
            n = _int_arg(cmd.args, "n", 40)
            csv_path, _, curve = sweep_air(self, (lo, hi), n)
            f, k = min(curve, key=lambda c: abs(c[0] - 1e-4))
            self.say(f"wrote {csv_path.name}; k_rot at {100 * f:.4g}% air = "
                     f"{rotational_stiffness(k, self.cfg.transmission.radius_capstan):.3f} N*m/rad")

    def fit(self) -> sysid.FitResult:
        log = self.logs.get(experiments.ExperimentKind.STEP_FIT)
        if log is None:
            raise TransmissionError("no step log yet; run step first")
        result = sysid.fit_second_order(log, INITIAL_MODEL)
        self.last_fit = result
        sysid.write_text(self.log_dir / "fit.csv", result.to_csv())
        predicted = sysid.simulate_model(result.model, log.torque_in, log.dt)
        sysid.write_text(self.log_dir / "fit_plot.csv", sysid.plot_data_csv({
            "measured": (log.time, log.theta_in - log.theta_out),
            "model": (log.time, predicted),
        }))
        self.controller.events.add(self.plant.time, self.mode, "fit_percentage",
                                   result.fit_percentage)
        m = result.model
        self.say(f"J={m.inertia_J:.4g} kg*m^2 B={m.damping_B:.4g} N*m*s/rad "
                 f"K={m.stiffness_K:.4g} N*m/rad fit={result.fit_percentage:.2f}%")
        return result

    def report(self) -> None:
        budget = total_stiffness(self.cfg.transmission)
        sysid.write_text(self.log_dir / "stiffness.csv", budget.to_csv())
        self.say(f"stiffness: {budget.k_total_linear:.4g} N/m, "
                 f"{budget.k_total_rotational:.4g} N*m/rad ({budget.mode.value})")
        rows = [("k_total_linear", budget.k_total_linear),
                ("k_total_rotational", budget.k_total_rotational)]
        sine = self.logs.get(experiments.ExperimentKind.SINE_HYSTERESIS)
        if sine is not None:
            h = sysid.hysteresis_metrics(sine)
            rows += [("max_hysteresis", h.max_hysteresis), ("static_friction", h.static_friction),
                     ("hysteresis_percent", h.percent_of_range)]
            self.say(f"hysteresis: {h.max_hysteresis:.4g} N*m ({h.percent_of_range:.2f}% of range), "
                     f"static friction {h.static_friction:.4g} N*m")
            sysid.write_text(self.log_dir / "hysteresis_plot.csv", sysid.plot_data_csv({
                "torque_vs_deflection": (sine.theta_in - sine.theta_out, sine.torque_in)}))
        hand = self.logs.get(experiments.ExperimentKind.HAND_TRACKING)
        if hand is not None:
            t = sysid.tracking_report(hand)
            rows += [("rms_angle_error", t.rms_angle_error),
                     ("rms_torque_error", t.rms_torque_error), ("torque_slope", t.torque_slope)]
            self.say(f"tracking: rms angle error {t.rms_angle_error:.4g} rad, "
                     f"torque slope {t.torque_slope:.4f}")
            sysid.write_text(self.log_dir / "tracking_plot.csv", sysid.plot_data_csv({
                "torque_out_vs_in": (hand.torque_in, hand.torque_out),
                "theta_out_vs_in": (hand.theta_in, hand.theta_out)}))
        sysid.write_text(self.log_dir / "report.csv",
                         "metric,value\n" + "".join(f"{k},{v!r}\n" for k, v in rows))


def _float_arg(args: dict, key: str, default: float | None = None) -> float:
    if key not in args:
        if default is None:
            raise ParseError(f"missing {key}=")
        return default
    try:
        return float(args[key])
    except ValueError:
        raise ParseError(f"{key} must be a number, got {args[key]!r}") from None


def _int_arg(args: dict, key: str, default: int | None = None) -> int:
    if key not in args:
        if default is None:
            raise ParseError(f"missing {key}=")
        return default
    try:
        return int(args[key])
    except ValueError:
        raise ParseError(f"{key} must be an integer, got {args[key]!r}") from None


def run_experiment(kind: experiments.ExperimentKind | str, session: Session) -> Path:
    """Run one experiment on the session's plant and write its trajectory CSV."""
    kind = experiments.ExperimentKind(kind)
    if session.mode is not ctl.Mode.OPERATING:
        raise NotOperating(f"experiments need Operating mode, not {session.mode.value}")
    session.runs += 1
    seed = session.session.random_seed * 1000 + session.runs
    plant, log = experiments.run_experiment(session.plant, kind, seed=seed)
    session.controller.plant = plant
    session.logs[kind] = log
    path = session.log_dir / f"run{session.runs:02d}_{kind.value}.csv"
    log.save(path)
    session.controller.events.add(plant.time, session.mode, f"experiment_{kind.value}", path.name)
    return path


def sweep_air(session: Session, fraction_range: tuple[float, float] = (1e-5, 1e-2),
              n: int = 40) -> tuple[Path, Path, list]:
    """Log-spaced stiffness sweep over undissolved-air fraction; writes CSV and plot data."""
    lo, hi = fraction_range
    if not 0.0 < lo < hi <= 1.0:
        raise ParseError(f"sweep range must satisfy 0 < min < max <= 1, got {lo}, {hi}")
    if n < 2:
        raise ParseError("sweep needs n >= 2")
    fractions = np.geomspace(lo, hi, n)
    curve = air_fraction_sweep(session.cfg.transmission, fractions.tolist())
    r = session.cfg.transmission.radius_capstan
    csv_path = session.log_dir / "air_sweep.csv"
    plot_path = session.log_dir / "air_sweep_plot.csv"
    sysid.write_text(csv_path, sweep_to_csv(curve, r))
    sysid.write_text(plot_path, sysid.plot_data_csv({
        "k_rotational_vs_air_percent": ([100.0 * f for f, _ in curve],
                                        [rotational_stiffness(k, r) for _, k in curve])}))
    return csv_path, plot_path, curve


def repl(session: SessionConfig, lines=None, out: TextIO | None = None) -> int:
    """Run a session over ``lines`` (stdin when None).  Returns the exit status."""
    try:
        cfg = load_config(session.config_path) if session.config_path else SystemConfig()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    sess = Session(cfg, session, out=out)
    interactive = lines is None and sys.stdin.isatty()
    source = sys.stdin if lines is None else lines
    if interactive:
        sess.say("type 'help' for commands")
    for raw in source:
        ok = sess.execute(raw)
        if not ok and not interactive:
            return 1
        if sess.finished:
            break
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdtrans",
                                description="Rolling-diaphragm transmission operator shell")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", type=int, default=0, help="session random seed")
    p.add_argument("--script", help="batch command file (default: read stdin)")
    p.add_argument("--log-dir", default="logs", help="directory for CSV outputs")
    p.add_argument("--realtime", action="store_true",
                   help="pace the simulation clock against wall-clock time")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    session = SessionConfig(config_path=args.config, log_directory=args.log_dir,
                            random_seed=args.seed, realtime=args.realtime)
    if args.script is None:
        return repl(session)
    try:
        with open(args.script) as fh:
            lines = fh.readlines()
    except OSError as exc:
        print(f"cannot read script: {exc}", file=sys.stderr)
        return 2
    return repl(session, lines)


if __name__ == "__main__":
    sys.exit(main())
