"""CSV writers and readers for spectra, trajectories, MSF curves and sweeps.

Floats are written with 17 significant digits so 64-bit values round-trip.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

import numpy as np

from .dynamics import Trajectory
from .spectral import Spectrum

__all__ = [
    "fmt",
    "spectrum_csv",
    "eigenvectors_csv",
    "trajectory_csv",
    "msf_csv",
    "sweep_csv",
    "read_spectrum_csv",
    "read_matrix_csv",
    "read_trajectory_csv",
    "read_msf_csv",
    "read_sweep_csv",
]

SWEEP_HEADER = ["sigma", "theory_stable", "empirical_sync_fraction", "mean_final_sync_error"]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write(rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def spectrum_csv(s: Spectrum) -> str:
    return _write([["k", "eigenvalue"]] + [[str(k), fmt(v)] for k, v in enumerate(s.eigenvalues, 1)])


def eigenvectors_csv(s: Spectrum) -> str:
    V = s.eigenvectors
    header = [f"v{k}" for k in range(1, V.shape[1] + 1)]
    return _write([header] + [[fmt(v) for v in row] for row in V])


def trajectory_csv(traj: Trajectory) -> str:
    _, N, m = traj.x.shape
    header = ["t"] + [f"v{i}_c{a}" for i in range(N) for a in range(m)]
    rows = [[fmt(t)] + [fmt(v) for v in x.reshape(-1)] for t, x in zip(traj.times, traj.x)]
    return _write([header] + rows)


def msf_csv(curve: Sequence[tuple[float, float]]) -> str:
    return _write([["alpha", "rate"]] + [[fmt(a), fmt(r)] for a, r in curve])


def sweep_csv(rows) -> str:
    """Rows are :class:`~hypermsf.stability.VerifyRow`."""
    out = [SWEEP_HEADER]
    for r in rows:
        out.append([fmt(r.sigma), str(int(r.theory_stable)), fmt(r.sync_fraction), fmt(r.mean_final_error)])
    return _write(out)


def _read(text: str, header: Sequence[str] | None = None) -> tuple[list[str], list[list[str]]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty CSV")
    if header is not None and rows[0] != list(header):
        raise ValueError(f"unexpected CSV header {rows[0]}, wanted {list(header)}")
    return rows[0], rows[1:]


def read_spectrum_csv(text: str) -> np.ndarray:
    _, rows = _read(text, ["k", "eigenvalue"])
    return np.array([float(r[1]) for r in rows])


def read_matrix_csv(text: str) -> np.ndarray:
    _, rows = _read(text)
    return np.array([[float(v) for v in r] for r in rows])


def read_trajectory_csv(text: str, dim: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(times, states)`` with states shaped ``(samples, N, dim)``."""
    header, rows = _read(text)
    if header[0] != "t":
        raise ValueError("trajectory CSV must start with a 't' column")
    data = np.array([[float(v) for v in r] for r in rows])
    n_cols = len(header) - 1
    return data[:, 0], data[:, 1:].reshape(len(rows), n_cols // dim, dim)


def read_msf_csv(text: str) -> list[tuple[float, float]]:
    _, rows = _read(text, ["alpha", "rate"])
    return [(float(a), float(r)) for a, r in rows]


def read_sweep_csv(text: str) -> list[tuple[float, bool, float, float]]:
    _, rows = _read(text, SWEEP_HEADER)
    return [(float(s), bool(int(t)), float(f), float(e)) for s, t, f, e in rows]
