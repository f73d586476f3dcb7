"""Second-order model identification and experiment analysis.

The model is ``theta/tau = 1/(J s^2 + B s + K)``.  Fitting is output-error:
the model is simulated on the measured torque and (J, B, K) are adjusted to
match the measured angle, using Levenberg-damped Gauss-Newton on the log of
the parameters.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from . import _dynamics
from .errors import InsufficientCycle, NoImprovement, NonPositiveDt, SingularJacobian
from .logs import ExperimentLog
from .plant import ENCODER_RESOLUTION, SecondOrderModel

FULL_TORQUE_RANGE = 6.0  # N*m


@dataclass(frozen=True)
class FitResult:
    model: SecondOrderModel
    fit_percentage: float
    residual_rms: float
    initial_guess: SecondOrderModel
    iterations: int = 0
    cost_history: tuple = ()

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["parameter", "value", "initial"])
        for name in ("inertia_J", "damping_B", "stiffness_K"):
            writer.writerow([name, repr(getattr(self.model, name)),
                             repr(getattr(self.initial_guess, name))])
        writer.writerow(["fit_percentage", repr(self.fit_percentage), ""])
        writer.writerow(["residual_rms", repr(self.residual_rms), ""])
        writer.writerow(["iterations", self.iterations, ""])
        return buf.getvalue()


@dataclass(frozen=True)
class HysteresisReport:
    max_hysteresis: float
    static_friction: float
    percent_of_range: float
    static_friction_percent: float = 0.0


@dataclass(frozen=True)
class TrackingReport:
    rms_angle_error: float
    rms_torque_error: float
    peak_angle_error: float
    peak_torque_error: float
    torque_slope: float
    torque_intercept: float


def simulate_model(model: SecondOrderModel, torque, dt: float,
                   theta0: float = 0.0, omega0: float = 0.0) -> np.ndarray:
    """Angle response of the linear model to a sampled torque (held per sample).

    ``theta[k+1]`` is the angle after holding ``torque[k]`` for ``dt``; this is
    the same update the plant uses for a clamped output without friction.
    """
    if not dt > 0:
        raise NonPositiveDt(f"dt must be > 0, got {dt}")
    tau = np.asarray(torque, dtype=float)
    c = _dynamics.single_shaft(model.inertia_J, model.damping_B, model.stiffness_K, dt)
    out = np.empty(len(tau))
    th, om = theta0, omega0
    for k in range(len(tau)):
        out[k] = th
        th, om = _dynamics.advance(th, om, float(tau[k]), 0.0, c)
    return out


def fit_percentage(measured, predicted) -> float:
    y = np.asarray(measured, dtype=float)
    spread = np.linalg.norm(y - y.mean())
    if spread == 0.0:
        return -math.inf
    return float(100.0 * (1.0 - np.linalg.norm(y - np.asarray(predicted)) / spread))


def _deflection(log: ExperimentLog) -> np.ndarray:
    return log.theta_in - log.theta_out


def fit_second_order(log: ExperimentLog, init: SecondOrderModel, *,
                     max_iterations: int = 100, rel_step: float = 1e-6,
                     damping: float = 1e-3, tol: float = 1e-12) -> FitResult:
    """Output-error fit of (J, B, K) to a step log, starting from ``init``.

    The measured angle is the input/output deflection, so a clamped-output
    log and a free log are treated alike.
    """
    n_params = 3
    if len(log) < 10 * n_params:
        raise ValueError("log needs at least 30 samples")
    if not init.inertia_J > 0:
        raise ValueError("initial J must be > 0")
    tau = log.torque_in
    y = _deflection(log)
    dt = log.dt
    init_b = init.damping_B if init.damping_B > 0 else 1e-9 * init.inertia_J
    init_k = init.stiffness_K if init.stiffness_K > 0 else 1e-9
    p = np.log([init.inertia_J, init_b, init_k])

    def model_of(q):
        J, B, K = np.exp(q)
        return SecondOrderModel(float(J), float(B), float(K))

    def residual(q):
        return y - simulate_model(model_of(q), tau, dt)

    def result(q, r, it, history):
        return FitResult(model=model_of(q), fit_percentage=fit_percentage(y, y - r),
                         residual_rms=float(np.sqrt(np.mean(r ** 2))),
                         initial_guess=init, iterations=it, cost_history=tuple(history))

    r = residual(p)
    cost = float(r @ r)
    history = [cost]
    if not np.any(tau) or not np.any(y):
        raise NoImprovement("log has no excitation or no response", result(p, r, 0, history))
    if cost <= 1e-28 * float(y @ y):
        return result(p, r, 0, history)

    h = math.log1p(rel_step)
    lam = damping
    it = 0
    improved = False
    while it < max_iterations:
        jac = np.empty((len(y), n_params))
        for i in range(n_params):
            q = p.copy()
            q[i] += h
            jac[:, i] = (residual(q) - r) / h
        jtj = jac.T @ jac
        grad = jac.T @ r
        if not np.all(np.isfinite(jtj)) or np.linalg.matrix_rank(jtj) < n_params:
            if not np.any(jtj):
                raise NoImprovement("objective is flat in every parameter",
                                    result(p, r, it, history))
            raise SingularJacobian("Jacobian is rank deficient at the current estimate")
        it += 1
        accepted = False
        while lam < 1e12:
            delta = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)), -grad)
            q = p + delta
            r_new = residual(q)
            new_cost = float(r_new @ r_new)
            if np.isfinite(new_cost) and new_cost < cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
        improved = True
        lam = max(lam / 10.0, 1e-12)
        drop = cost - new_cost
        p, r, cost = q, r_new, new_cost
        history.append(cost)
        if drop <= tol * cost or np.max(np.abs(delta)) < 1e-10:
            break
    if not improved and cost > 1e-20 * float(y @ y):
        raise NoImprovement("no damped step reduced the objective", result(p, r, it, history))
    return result(p, r, it, history)


def validate(model: SecondOrderModel, log: ExperimentLog) -> float:
    """Fit percentage of ``model`` driven by the log's measured torque."""
    y = _deflection(log)
    return fit_percentage(y, simulate_model(model, log.torque_in, log.dt))


def _branch_curve(angle, torque, mask):
    a, t = angle[mask], torque[mask]
    order = np.argsort(a, kind="stable")
    return a[order], t[order]


def _stuck_span(angle, velocity, idx, deadband, resolution):
    n = len(angle)
    ext = angle[idx]

    def stuck(i):
        return abs(velocity[i]) <= deadband and abs(angle[i] - ext) < resolution

    lo = hi = idx
    while lo > 0 and stuck(lo - 1):
        lo -= 1
    while hi < n - 1 and stuck(hi + 1):
        hi += 1
    return lo, hi


def hysteresis_metrics(log: ExperimentLog, *, velocity_deadband: float = 1e-4,
                       resolution: float = ENCODER_RESOLUTION, smooth_samples: int = 21,
                       full_range: float = FULL_TORQUE_RANGE,
                       grid_points: int = 400) -> HysteresisReport:
    """Hysteresis gap and static friction of a torque/deflection cycle.

    Loading and unloading branches are split by the sign of the deflection
    rate.  Static friction is the torque change over the stretch at each
    angle extreme where the shaft does not move.
    """
    angle = _deflection(log)
    torque = log.torque_in
    # same filter on both channels keeps linear torque/angle relations intact
    smooth_angle = angle
    if smooth_samples > 1:
        torque = uniform_filter1d(torque, smooth_samples, mode="nearest")
        smooth_angle = uniform_filter1d(angle, smooth_samples, mode="nearest")
    velocity = np.gradient(angle, log.dt)
    up = velocity > velocity_deadband
    down = velocity < -velocity_deadband
    if up.sum() < 2 or down.sum() < 2:
        raise InsufficientCycle("log lacks both loading and unloading motion")
    i_max, i_min = int(np.argmax(angle)), int(np.argmin(angle))
    if not (0 < i_max < len(angle) - 1 and 0 < i_min < len(angle) - 1):
        raise InsufficientCycle("angle extremes must be interior turnarounds")

    a_up, t_up = _branch_curve(smooth_angle, torque, up)
    a_dn, t_dn = _branch_curve(smooth_angle, torque, down)
    lo, hi = max(a_up[0], a_dn[0]), min(a_up[-1], a_dn[-1])
    if not hi > lo:
        raise InsufficientCycle("branches do not overlap in angle")
    grid = np.linspace(lo, hi, grid_points)
    gap = np.abs(np.interp(grid, a_up, t_up) - np.interp(grid, a_dn, t_dn))
    max_hyst = float(gap.max())

    frictions = []
    for idx in (i_max, i_min):
        s0, s1 = _stuck_span(angle, velocity, idx, velocity_deadband, resolution)
        seg = torque[s0:s1 + 1]
        frictions.append(float(seg.max() - seg.min()))
    static = max(frictions)
    return HysteresisReport(max_hysteresis=max_hyst, static_friction=static,
                            percent_of_range=100.0 * max_hyst / full_range,
                            static_friction_percent=100.0 * static / full_range)


def percent_of_range(value: float, full_range: float = FULL_TORQUE_RANGE) -> float:
    return 100.0 * value / full_range


def tracking_report(log: ExperimentLog) -> TrackingReport:
    """Input-versus-output tracking errors and the torque transfer slope."""
    d_angle = log.theta_in - log.theta_out
    d_torque = log.torque_in - log.torque_out
    x, y = log.torque_in, log.torque_out
    if np.ptp(x) > 0:
        slope, intercept = np.polyfit(x, y, 1)
    else:
        slope, intercept = math.nan, math.nan
    return TrackingReport(
        rms_angle_error=float(np.sqrt(np.mean(d_angle ** 2))),
        rms_torque_error=float(np.sqrt(np.mean(d_torque ** 2))),
        peak_angle_error=float(np.max(np.abs(d_angle))),
        peak_torque_error=float(np.max(np.abs(d_torque))),
        torque_slope=float(slope),
        torque_intercept=float(intercept),
    )


def plot_data_csv(curves: dict) -> str:
    """Long-form x/y series, one block of rows per named curve."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["curve", "x", "y"])
    for name, (xs, ys) in curves.items():
        for xv, yv in zip(xs, ys):
            writer.writerow([name, repr(float(xv)), repr(float(yv))])
    return buf.getvalue()


def write_text(path: str | os.PathLike, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)
