"""Timestamped trajectory logs and their CSV form.

Every CSV produced by the package for a trajectory uses TRAJECTORY_HEADER.
Floats are written with ``repr`` so a round trip is lossless and repeated
runs are byte-identical.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

TRAJECTORY_HEADER = ("time_s", "torque_in_Nm", "torque_out_Nm", "theta_in_rad",
                     "theta_out_rad", "water_kPa", "air_kPa", "volume_offset_mL")
SCHEDULE_HEADER = ("time_s", "torque_in_Nm", "torque_load_Nm", "output_clamped")

_FIELDS = ("time", "torque_in", "torque_out", "theta_in", "theta_out",
           "water_kpa", "air_kpa", "volume_offset")


@dataclass
class ExperimentLog:
    time: np.ndarray
    torque_in: np.ndarray
    torque_out: np.ndarray
    theta_in: np.ndarray
    theta_out: np.ndarray
    water_kpa: np.ndarray | None = None
    air_kpa: np.ndarray | None = None
    volume_offset: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in _FIELDS:
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, np.asarray(value, dtype=float))
        n = len(self.time)
        for name in _FIELDS[1:]:
            value = getattr(self, name)
            if value is None:
                if name in ("water_kpa", "air_kpa", "volume_offset"):
                    setattr(self, name, np.zeros(n))
                    continue
            if len(getattr(self, name)) != n:
                raise ValueError(f"channel {name} has {len(getattr(self, name))} samples, expected {n}")
        if n >= 2:
            dt = np.diff(self.time)
            if np.any(dt <= 0):
                raise ValueError("time must be strictly increasing")
            mean = (self.time[-1] - self.time[0]) / (n - 1)
            if np.max(np.abs(dt - mean)) > 1e-6 * mean + 1e-12:
                raise ValueError("samples are not uniformly spaced")

    def __len__(self):
        return len(self.time)

    @property
    def dt(self) -> float:
        return float((self.time[-1] - self.time[0]) / (len(self.time) - 1))

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.dt

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for key, value in sorted(self.metadata.items()):
            buf.write(f"# {key}={value}\n")
        writer.writerow(TRAJECTORY_HEADER)
        cols = [getattr(self, name) for name in _FIELDS]
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentLog":
        metadata = {}
        lines = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                metadata[key] = value
            elif line.strip():
                lines.append(line)
        reader = csv.reader(lines)
        header = tuple(next(reader))
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header {header}")
        data = np.array([[float(v) for v in row] for row in reader], dtype=float)
        if data.size == 0:
            data = np.zeros((0, len(TRAJECTORY_HEADER)))
        return cls(*data.T, metadata=metadata)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentLog":
        with open(path, newline="") as fh:
            return cls.from_csv(fh.read())


@dataclass
class InputSchedule:
    """Per-sample inputs for a replayed run."""

    time: np.ndarray
    torque_in: np.ndarray
    torque_load: np.ndarray
    output_clamped: np.ndarray

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        n = len(self.time)
        self.torque_in = np.asarray(self.torque_in, dtype=float)
        self.torque_load = (np.zeros(n) if self.torque_load is None
                            else np.asarray(self.torque_load, dtype=float))
        self.output_clamped = np.asarray(self.output_clamped, dtype=bool)
        if self.output_clamped.ndim == 0:
            self.output_clamped = np.full(n, bool(self.output_clamped))
        for name in ("torque_in", "torque_load", "output_clamped"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"schedule channel {name} length mismatch")

    def __len__(self):
        return len(self.time)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SCHEDULE_HEADER)
        for t, a, b, c in zip(self.time, self.torque_in, self.torque_load, self.output_clamped):
            writer.writerow([repr(float(t)), repr(float(a)), repr(float(b)), int(c)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "InputSchedule":
        rows = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
        reader = csv.reader(rows)
        header = tuple(next(reader))
        if header != SCHEDULE_HEADER:
            raise ValueError(f"unexpected schedule header {header}")
        data = [row for row in reader]
        cols = list(zip(*data)) if data else [(), (), (), ()]
        return cls(time=[float(v) for v in cols[0]],
                   torque_in=[float(v) for v in cols[1]],
                   torque_load=[float(v) for v in cols[2]],
                   output_clamped=[bool(int(v)) for v in cols[3]])
