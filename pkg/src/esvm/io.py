"""Readers and writers for trajectories, ACF reports and replicate summaries."""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .samplers import Trajectory
from .variance import LagWindow, autocovariances

TRAJ_MAGIC = b"ESVMTRAJ"
_HEADER = struct.Struct("<8sII")


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    d = traj.dim
    header = ["step"] + [f"theta_{j}" for j in range(d)] + [f"grad_{j}" for j in range(d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(traj.n):
            w.writerow([k, *map(repr, traj.samples[k].tolist()), *map(repr, traj.grad_estimates[k].tolist())])
    return path


def read_trajectory_csv(path, sampler: str = "ula") -> Trajectory:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d = (table.shape[1] - 1) // 2
    return Trajectory(table[:, 1:1 + d].copy(), table[:, 1 + d:].copy(), sampler=sampler)


def write_trajectory_binary(traj: Trajectory, path) -> Path:
    """16-byte header (magic, u32 n, u32 d) then n rows of [theta, grad] as little-endian f64."""
    path = Path(path)
    body = np.hstack([traj.samples, traj.grad_estimates]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(TRAJ_MAGIC, traj.n, traj.dim))
        fh.write(body.tobytes(order="C"))
    return path


def read_trajectory_binary(path, sampler: str = "ula") -> Trajectory:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("file too short for a trajectory header")
    magic, n, d = _HEADER.unpack_from(raw)
    if magic != TRAJ_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != n * 2 * d:
        raise ValueError(f"expected {n * 2 * d} values, found {body.size}")
    body = body.reshape(n, 2 * d).astype(float)
    return Trajectory(body[:, :d].copy(), body[:, d:].copy(), sampler=sampler)


def write_acf_csv(h, window: LagWindow, path) -> Path:
    """Columns lag, rho, weight, weighted_rho for lags 0..b-1."""
    path = Path(path)
    rho = autocovariances(h, window.truncation)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["lag", "rho", "weight", "weighted_rho"])
        for lag, (r, wt) in enumerate(zip(rho, window.weights)):
            w.writerow([lag, repr(float(r)), repr(float(wt)), repr(float(r * wt))])
    return path


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path
