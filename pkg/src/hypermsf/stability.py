"""Lyapunov growth, master-stability conditions and coupling windows.

``lambda_max`` is always the additive rate (per unit time for flows, per step
for maps).  The multiplicative condition ``|1 - sigma*lam| * exp(lambda_max) < 1``
is evaluated in log form as ``log|1 - sigma*lam| + lambda_max < 0``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .dynamics import VertexDynamics
from .errors import LyapunovError, SpectrumError, SyncPrecludedError
from .hypercore import ChemicalHypergraph, sync_invariance_check
from .spectral import LaplacianMatrix, Spectrum, laplacian

__all__ = [
    "LyapunovEstimate",
    "ModeVerdict",
    "StabilityReport",
    "Window",
    "VerifyRow",
    "VerifyReport",
    "FLOW_DEFAULTS",
    "MAP_DEFAULTS",
    "lyapunov_exponent",
    "msf_mode_rate",
    "stability_report",
    "sigma_window",
    "modal_decomposition",
    "msf_curve",
    "verify_window",
]

Mode = Literal["flow", "map"]

FLOW_DEFAULTS = {"dt": 0.01, "renorm_interval": 1.0, "transient": 100.0, "t_total": 2000.0}
MAP_DEFAULTS = {"dt": 1.0, "renorm_interval": 1, "transient": 1000, "t_total": 1_000_000}

MARGINAL_TOL = 1e-12
BOUNDARY_RTOL = 1e-12
_N_CHECKPOINTS = 10


# ---------------------------------------------------------------------------
# Benettin estimator


def _tangent_seed(m: int) -> np.ndarray:
    # fixed generic direction: reproducible and never aligned with a coordinate axis
    v = np.random.default_rng(20210603).standard_normal(m)
    return v / np.linalg.norm(v)


def _rk4_propagators(M: np.ndarray, dt: float) -> np.ndarray:
    """One-step RK4 propagator of ``de/dt = M(t) e`` from stage matrices ``M[..., s, :, :]``."""
    M1, M2, M3, M4 = (M[..., s, :, :] for s in range(4))
    eye = np.eye(M.shape[-1])
    P1 = eye + dt / 2 * M1
    P2 = eye + dt / 2 * (M2 @ P1)
    P3 = eye + dt * (M3 @ P2)
    return eye + dt / 6 * (M1 + 2 * (M2 @ P1) + 2 * (M3 @ P2) + M4 @ P3)


def _benettin(
    dyn_f: VertexDynamics,
    dyn_h: VertexDynamics | None,
    alphas: np.ndarray,
    x0,
    mode: Mode,
    dt: float,
    n_total: int,
    n_trans: int,
    k_renorm: int,
    coupling_constant: float = 0.0,
):
    """Maximal rates of ``e' = (Df + alpha Dh) e`` along the orbit of ``f + a h``.

    Returns ``(rates, history)`` where ``history[:, j]`` is the running estimate
    at the j-th of ten evenly spaced checkpoints of the measurement window.
    """
    m = dyn_f.dim
    x = np.asarray(x0, dtype=float).reshape(m)
    A = len(alphas)
    use_h = dyn_h is not None
    a_const = float(coupling_constant)

    def field_(y):
        out = dyn_f.f(y)
        if use_h and a_const != 0.0:
            out = out + a_const * dyn_h.f(y)
        return out

    n_stage = 4 if mode == "flow" else 1
    chunk = max(256, 2**19 // max(1, A * n_stage * m * m))

    span = n_total - n_trans
    checkpoints = [n_trans + round(j * span / _N_CHECKPOINTS) for j in range(1, _N_CHECKPOINTS + 1)]
    history = np.empty((A, _N_CHECKPOINTS))
    next_cp = 0

    v = np.tile(_tangent_seed(m), (A, 1))
    logsum = np.zeros(A)
    alpha_col = alphas[:, None, None, None, None]

    # a state-independent Jacobian makes the orbit irrelevant; it may also diverge
    frozen = dyn_f.constant_jacobian and (not use_h or dyn_h.constant_jacobian)

    scalar_map = None
    if mode == "map" and m == 1 and dyn_f.f_scalar is not None and not (use_h and a_const):
        scalar_map = dyn_f.f_scalar

    for start in range(0, n_total, chunk):
        c = min(chunk, n_total - start)
        stages = np.empty((c, n_stage, m))
        with np.errstate(all="ignore"):
            if frozen:
                stages[:] = x
            elif scalar_map is not None:
                xs = float(x[0])
                orbit = [0.0] * c
                for i in range(c):
                    orbit[i] = xs
                    xs = scalar_map(xs)
                stages[:, 0, 0] = orbit
                x = np.array([xs])
            else:
                for i in range(c):
                    if mode == "map":
                        stages[i, 0] = x
                        x = field_(x)
                    else:
                        k1 = field_(x)
                        x2 = x + dt / 2 * k1
                        k2 = field_(x2)
                        x3 = x + dt / 2 * k2
                        k3 = field_(x3)
                        x4 = x + dt * k3
                        k4 = field_(x4)
                        stages[i, 0], stages[i, 1], stages[i, 2], stages[i, 3] = x, x2, x3, x4
                        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not (np.all(np.isfinite(stages)) and np.all(np.isfinite(x))):
            bad = np.flatnonzero(~np.all(np.isfinite(stages.reshape(c, -1)), axis=1))
            step = start + (int(bad[0]) if bad.size else c)
            raise LyapunovError(
                f"reference trajectory became non-finite at step {step} (t={step * dt:g}); "
                "try a smaller dt or a different initial condition"
            )

        M = dyn_f.jacobian(stages)[None]
        if use_h:
            M = M + alpha_col * dyn_h.jacobian(stages)[None]
        else:
            M = np.broadcast_to(M, (A,) + M.shape[1:])
        R = M[:, :, 0] if mode == "map" else _rk4_propagators(M, dt)

        if m == 1:
            with np.errstate(divide="ignore"):
                g = np.log(np.abs(R[:, :, 0, 0]))
            steps = start + 1 + np.arange(c)
            g = np.where(steps > n_trans, g, 0.0)
            cum = logsum[:, None] + np.cumsum(g, axis=1)
            while next_cp < _N_CHECKPOINTS and checkpoints[next_cp] <= start + c:
                n = checkpoints[next_cp]
                history[:, next_cp] = cum[:, n - start - 1] / ((n - n_trans) * dt)
                next_cp += 1
            logsum = cum[:, -1]
            continue

        for i in range(c):
            v = np.einsum("aij,aj->ai", R[:, i], v)
            n = start + i + 1
            if next_cp < _N_CHECKPOINTS and n == checkpoints[next_cp]:
                with np.errstate(divide="ignore"):
                    cur = logsum + np.log(np.linalg.norm(v, axis=1))
                history[:, next_cp] = cur / ((n - n_trans) * dt)
                next_cp += 1
            if n % k_renorm == 0 or n == n_trans:
                nrm = np.linalg.norm(v, axis=1)
                if n > n_trans:
                    with np.errstate(divide="ignore"):
                        logsum = logsum + np.log(nrm)
                dead = nrm == 0.0
                if np.any(dead):
                    nrm = np.where(dead, 1.0, nrm)
                    v = np.where(dead[:, None], _tangent_seed(m), v)
                    if n > n_trans:
                        logsum = np.where(dead, -np.inf, logsum)
                v = v / nrm[:, None]
    return history[:, -1].copy(), history


@dataclass(frozen=True)
class LyapunovEstimate:
    lambda_max: float
    growth_factor: float
    t_total: float
    renorm_interval: float
    transient_discarded: float
    convergence_history: tuple[float, ...]
    mode: str
    dt: float
    tolerance: float

    @property
    def converged(self) -> bool:
        h = self.convergence_history
        if len(h) < 2 or not all(math.isfinite(v) for v in h[-2:]):
            return len(h) >= 2 and h[-1] == h[-2]
        return abs(h[-1] - h[-2]) <= self.tolerance


def _resolve_horizon(mode, dt, t_total, renorm_interval, transient):
    d = FLOW_DEFAULTS if mode == "flow" else MAP_DEFAULTS
    dt = d["dt"] if mode == "map" else (d["dt"] if dt is None else float(dt))
    t_total = d["t_total"] if t_total is None else t_total
    renorm_interval = d["renorm_interval"] if renorm_interval is None else renorm_interval
    transient = d["transient"] if transient is None else transient
    if not (t_total > transient > 0):
        raise ValueError("need t_total > transient > 0")
    if renorm_interval <= 0 or dt <= 0:
        raise ValueError("renorm_interval and dt must be positive")
    n_total = int(round(t_total / dt))
    n_trans = int(round(transient / dt))
    k_renorm = max(1, int(round(renorm_interval / dt)))
    if n_total - n_trans < _N_CHECKPOINTS:
        raise ValueError("measurement window too short for the step size")
    return dt, t_total, renorm_interval, transient, n_total, n_trans, k_renorm


def lyapunov_exponent(
    dyn: VertexDynamics,
    x0,
    mode: Mode | None = None,
    t_total: float | None = None,
    renorm_interval: float | None = None,
    transient: float | None = None,
    dt: float | None = None,
    tolerance: float = 1e-3,
) -> LyapunovEstimate:
    """Maximal Lyapunov exponent by the single-vector Benettin method.

    The tangent vector is evolved with the reference orbit, renormalized every
    ``renorm_interval`` and the log growth averaged after ``transient``.  For
    maps all horizons count steps.  Missing arguments fall back to
    ``FLOW_DEFAULTS`` / ``MAP_DEFAULTS``.
    """
    mode = mode or dyn.kind
    if mode not in ("flow", "map"):
        raise ValueError(f"mode must be 'flow' or 'map', got {mode!r}")
    dt, t_total, renorm_interval, transient, n_total, n_trans, k_renorm = _resolve_horizon(
        mode, dt, t_total, renorm_interval, transient
    )
    rates, history = _benettin(
        dyn, None, np.zeros(1), x0, mode, dt, n_total, n_trans, k_renorm
    )
    lam = float(rates[0])
    if math.isnan(lam):
        raise LyapunovError("Lyapunov estimate is NaN; try a different initial condition")
    est = LyapunovEstimate(
        lambda_max=lam,
        growth_factor=math.exp(lam),
        t_total=float(t_total),
        renorm_interval=float(renorm_interval),
        transient_discarded=float(transient),
        convergence_history=tuple(float(h) for h in history[0]),
        mode=mode,
        dt=float(dt),
        tolerance=tolerance,
    )
    if not est.converged:
        warnings.warn(
            f"Lyapunov estimate drifted by more than {tolerance:g} over the last tenth of the run",
            RuntimeWarning,
            stacklevel=2,
        )
    return est


def msf_curve(
    dyn_f: VertexDynamics,
    dyn_h: VertexDynamics,
    alphas: Sequence[float],
    x0,
    mode: Mode | None = None,
    t_total: float | None = None,
    renorm_interval: float | None = None,
    transient: float | None = None,
    dt: float | None = None,
    coupling_constant: float = 0.0,
) -> list[tuple[float, float]]:
    """Master stability function: transverse rate of ``Df + alpha Dh`` for each alpha.

    The reference orbit solves ``x' = f(x) + a h(x)`` with ``a =
    coupling_constant`` (0 by default, the uncoupled orbit).  All alphas share
    the same reference orbit.
    """
    if dyn_f.dim != dyn_h.dim:
        raise ValueError("f and h must have the same state dimension")
    alphas = np.asarray(list(alphas), dtype=float)
    if alphas.size == 0:
        raise ValueError("alpha grid is empty")
    mode = mode or dyn_f.kind
    dt, _, _, _, n_total, n_trans, k_renorm = _resolve_horizon(
        mode, dt, t_total, renorm_interval, transient
    )
    rates, _ = _benettin(
        dyn_f, dyn_h, alphas, x0, mode, dt, n_total, n_trans, k_renorm, coupling_constant
    )
    return [(float(a), float(r)) for a, r in zip(alphas, rates)]


# ---------------------------------------------------------------------------
# master stability conditions


def msf_mode_rate(lambda_max: float, sigma: float, lam: float) -> float:
    """``log|1 - sigma*lam| + lambda_max``; ``-inf`` when the factor vanishes."""
    factor = abs(1.0 - sigma * lam)
    if factor == 0.0:
        return -math.inf
    return math.log(factor) + lambda_max


@dataclass(frozen=True)
class Window:
    """Admissible coupling interval.

    ``raw_lo``/``raw_hi`` are the unclipped bounds; ``lo``/``hi`` are clipped
    to ``[0, 1]``.  Membership is strict on the raw bounds, with a relative
    guard band of ``BOUNDARY_RTOL`` so rounding-level boundary hits stay out.
    """

    lo: float
    hi: float
    raw_lo: float
    raw_hi: float

    def contains(self, sigma: float) -> bool:
        # points within rounding distance of a bound count as marginal, not inside
        eps = BOUNDARY_RTOL * max(1.0, abs(sigma))
        return 0.0 <= sigma <= 1.0 and self.raw_lo + eps < sigma < self.raw_hi - eps

    def distance_to_boundary(self, sigma: float) -> float:
        return min(abs(sigma - self.raw_lo), abs(sigma - self.raw_hi))

    def to_json(self) -> dict:
        return {"lo": self.lo, "hi": self.hi}


def sigma_window(s: Spectrum, lambda_max: float) -> Window | None:
    k0 = s.zero_multiplicity
    if k0 >= s.n:
        raise SpectrumError("no nonzero eigenvalue: nothing to stabilize against")
    if not math.isfinite(lambda_max):
        raise ValueError("lambda_max must be finite")
    lam_min = float(s.eigenvalues[k0])
    lam_max = float(s.eigenvalues[-1])
    inv = math.exp(-lambda_max)
    raw_lo = (1.0 - inv) / lam_min
    raw_hi = (1.0 + inv) / lam_max
    lo, hi = max(raw_lo, 0.0), min(raw_hi, 1.0)
    if lo >= hi:
        return None
    return Window(lo, hi, raw_lo, raw_hi)


@dataclass(frozen=True)
class ModeVerdict:
    k: int
    eigenvalue: float
    rate: float | None
    verdict: Literal["neutral", "stable", "marginal", "unstable"]


@dataclass(frozen=True)
class StabilityReport:
    sigma: float
    lambda_max: float
    per_mode: tuple[ModeVerdict, ...]
    neutral_modes: tuple[int, ...]
    overall: Literal["stable", "unstable"]
    sync_precluded: bool
    window: Window | None = None

    @property
    def stable(self) -> bool:
        return self.overall == "stable"

    def to_json(self) -> dict:
        return {
            "sigma": self.sigma,
            "lambda_max": self.lambda_max,
            "modes": [
                {
                    "k": mv.k,
                    "eigenvalue": mv.eigenvalue,
                    "rate": None if mv.rate is None or math.isinf(mv.rate) else mv.rate,
                    "verdict": mv.verdict,
                }
                for mv in self.per_mode
            ],
            "neutral": list(self.neutral_modes),
            "overall": self.overall,
            "sync_precluded": self.sync_precluded,
            "window": self.window.to_json() if self.window else None,
        }


def stability_report(
    s: Spectrum, lambda_max: float, sigma: float, zero_tol: float | None = None
) -> StabilityReport:
    """Per-mode master-stability verdicts.

    Modes with eigenvalue at most ``zero_tol`` are neutral: they span the
    generalized synchronization manifold and are not required to decay.
    Mode indices ``k`` are 1-based in ascending eigenvalue order.
    """
    tol = s.zero_tol if zero_tol is None else zero_tol
    modes = []
    neutral = []
    for k, lam in enumerate(s.eigenvalues, start=1):
        lam = float(lam)
        if lam <= tol:
            neutral.append(k)
            modes.append(ModeVerdict(k, lam, None, "neutral"))
            continue
        rate = msf_mode_rate(lambda_max, sigma, lam)
        if rate < -MARGINAL_TOL:
            verdict = "stable"
        elif rate > MARGINAL_TOL:
            verdict = "unstable"
        else:
            verdict = "marginal"
        modes.append(ModeVerdict(k, lam, rate, verdict))
    overall = "stable" if all(m.verdict in ("neutral", "stable") for m in modes) else "unstable"
    window = None
    if len(neutral) < s.n and math.isfinite(lambda_max):
        window = sigma_window(Spectrum(s.eigenvalues, tol), lambda_max)
    return StabilityReport(
        sigma=float(sigma),
        lambda_max=float(lambda_max),
        per_mode=tuple(modes),
        neutral_modes=tuple(neutral),
        overall=overall,
        sync_precluded=not neutral,
        window=window,
    )


def modal_decomposition(s: Spectrum, eps) -> np.ndarray:
    """Coefficients ``C`` with ``eps = V C`` for the eigenvector matrix ``V`` of L.

    ``V = D^-1/2 W`` with ``W`` orthogonal, so ``C = W^T D^1/2 eps`` exactly.
    """
    if s.eigenvectors is None or s.sym_vectors is None or s.degrees is None:
        raise ValueError("modal_decomposition needs a spectrum with eigenvectors")
    e = np.asarray(eps, dtype=float)
    flat = e.ndim == 1
    if flat:
        e = e[:, None]
    C = s.sym_vectors.T @ (np.sqrt(s.degrees)[:, None] * e)
    resid = np.max(np.abs(s.eigenvectors @ C - e), initial=0.0)
    if resid > 1e-8 * max(1.0, float(np.max(np.abs(e), initial=0.0))):
        raise SpectrumError(f"eigenbasis reconstruction error {resid:.3e} exceeds tolerance")
    return C[:, 0] if flat else C


# ---------------------------------------------------------------------------
# empirical verification


@dataclass(frozen=True)
class VerifyRow:
    sigma: float
    theory_stable: bool
    excluded: bool
    sync_fraction: float
    mean_final_error: float
    agreement: float


@dataclass(frozen=True)
class VerifyReport:
    rows: tuple[VerifyRow, ...]
    window: Window | None
    trials: int
    agreement_fraction: float | None = field(default=None)


def _laplacian_for(H) -> LaplacianMatrix:
    return H if isinstance(H, LaplacianMatrix) else laplacian(H)


def _batched_field(dyn: VertexDynamics, L: np.ndarray, sigma: float, X: np.ndarray) -> np.ndarray:
    F = dyn.f(X)
    return F - sigma * np.einsum("ij,tjm->tim", L, F)


def _simulate_batch(dyn, L, sigma, X, mode, n_steps, dt):
    """Evolve a stack of states ``(trials, N, m)``; diverged trials become NaN."""
    with np.errstate(all="ignore"):
        for _ in range(n_steps):
            if mode == "map":
                X = _batched_field(dyn, L, sigma, X)
            else:
                k1 = _batched_field(dyn, L, sigma, X)
                k2 = _batched_field(dyn, L, sigma, X + dt / 2 * k1)
                k3 = _batched_field(dyn, L, sigma, X + dt / 2 * k2)
                k4 = _batched_field(dyn, L, sigma, X + dt * k3)
                X = X + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            bad = ~np.all(np.isfinite(X), axis=(1, 2))
            if np.any(bad):
                X[bad] = np.nan
    return X


def _final_errors(X: np.ndarray, P) -> np.ndarray:
    if isinstance(P, str):
        D = X - X[:, :1]
        resid = D - D.mean(axis=1, keepdims=True)
    else:
        resid = X - np.einsum("ij,tjm->tim", P, X)
    err = np.max(np.abs(resid), axis=(1, 2))
    return np.where(np.isfinite(err), err, np.inf)


def _sync_reference(dyn: VertexDynamics, seed: int, dt: float, settle: float) -> np.ndarray:
    """A point on the attractor of a single uncoupled vertex."""
    rng = np.random.default_rng([seed, 0xA77])
    x = dyn.sample(rng)[None, None, :]
    n = int(round(settle / dt))
    return _simulate_batch(dyn, np.zeros((1, 1)), 0.0, x, "flow", n, dt)[0, 0]


def verify_window(
    H: ChemicalHypergraph | LaplacianMatrix,
    dyn: VertexDynamics,
    window: Window | None,
    sigmas: Sequence[float],
    trials: int = 20,
    *,
    mode: Mode | None = None,
    n_steps: int = 1000,
    dt: float = 0.01,
    seed: int = 42,
    threads: int = 1,
    projector=None,
    sync_tol: float = 1e-6,
    margin: float = 0.02,
    perturbation: float = 1e-3,
    settle: float = 50.0,
) -> VerifyReport:
    """Simulate Laplacian-coupled dynamics over a sigma grid and compare with ``window``.

    Each sigma runs ``trials`` randomized initial conditions; a trial counts as
    synchronized when its terminal sync error is below ``sync_tol``.  Sigmas
    within ``margin`` of a window boundary are reported but excluded from the
    agreement statistic.  Per-sigma random streams are derived from
    ``(seed, sigma index)``, so results do not depend on ``threads``.
    """
    mode = mode or dyn.kind
    if projector is None:
        if not isinstance(H, ChemicalHypergraph) or not sync_invariance_check(H)[0]:
            raise SyncPrecludedError(
                "synchronized state is not invariant for this hypergraph; supply a projector"
            )
        projector = "constants"
    Lm = _laplacian_for(H)
    L = Lm.dense
    N = Lm.n
    sigmas = [float(x) for x in sigmas]
    ref = _sync_reference(dyn, seed, dt, settle) if mode == "flow" else None

    def run(k: int):
        sigma = sigmas[k]
        rng = np.random.default_rng([seed, k])
        if mode == "map":
            X0 = dyn.sample(rng, (trials, N))
        else:
            d = rng.standard_normal((trials, N, dyn.dim))
            d *= perturbation / np.linalg.norm(d.reshape(trials, -1), axis=1)[:, None, None]
            X0 = ref[None, None, :] + d
        X = _simulate_batch(dyn, L, sigma, X0, mode, n_steps, dt)
        errs = _final_errors(X, projector)
        synced = errs < sync_tol
        theory = window is not None and window.contains(sigma)
        excluded = window is not None and window.distance_to_boundary(sigma) <= margin
        return VerifyRow(
            sigma=sigma,
            theory_stable=theory,
            excluded=excluded,
            sync_fraction=float(np.mean(synced)),
            mean_final_error=float(np.mean(errs)),
            agreement=float(np.mean(synced == theory)),
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, range(len(sigmas))))
    else:
        rows = [run(k) for k in range(len(sigmas))]
    counted = [r for r in rows if not r.excluded]
    agreement = float(np.mean([r.agreement for r in counted])) if counted else None
    return VerifyReport(tuple(rows), window, trials, agreement)
