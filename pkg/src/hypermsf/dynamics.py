"""Vertex dynamics, the three coupling architectures, and time stepping.

States are ``(N, m)`` arrays, row ``i`` being the state of vertex ``i``.
Vertex vector fields act on the trailing axis, so ``f`` and ``jacobian``
accept any ``(..., m)`` array and return ``(..., m)`` / ``(..., m, m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .errors import DynamicsDomainError, IntegrationError
from .hypercore import ChemicalHypergraph, incidence
from .spectral import LaplacianMatrix

__all__ = [
    "VertexDynamics",
    "ScalarMap",
    "MatrixCoupling",
    "LaplacianDiffusive",
    "HyperedgeSymmetric",
    "CoupledSystem",
    "SystemState",
    "Trajectory",
    "linear",
    "logistic",
    "lorenz",
    "rossler",
    "DYNAMICS",
    "SCALAR_MAPS",
    "make_dynamics",
    "jacobian_error",
    "rhs",
    "linearized_rhs",
    "integrate",
    "cml_step",
    "cml_run",
    "sync_error",
]

Array = np.ndarray


@dataclass(frozen=True)
class VertexDynamics:
    """Per-vertex vector field (or map) with its Jacobian.

    ``kind`` is the natural interpretation ("flow" or "map"); the Lyapunov
    estimator can override it.  ``box`` is a ``(lo, hi)`` pair bounding the
    region used for random initial conditions and Jacobian checks.
    ``f_scalar``, if given, is the same map on a plain float (``dim == 1``
    only); long orbit loops use it to avoid per-step array overhead.
    ``constant_jacobian`` marks fields whose Jacobian does not depend on the
    state, so tangent dynamics can be followed without the (possibly
    unbounded) reference orbit.
    """

    name: str
    dim: int
    f: Callable[[Array], Array]
    jacobian: Callable[[Array], Array]
    kind: Literal["flow", "map"] = "flow"
    box: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    params: dict = field(default_factory=dict)
    f_scalar: Callable[[float], float] | None = None
    constant_jacobian: bool = False

    def sample(self, rng: np.random.Generator, shape=()) -> Array:
        lo, hi = self.box if self.box else ((-1.0,) * self.dim, (1.0,) * self.dim)
        return rng.uniform(lo, hi, size=tuple(shape) + (self.dim,))


def linear(a: float = 1.0) -> VertexDynamics:
    a = float(a)

    def jac(x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape + (1,), a)

    return VertexDynamics(
        "linear", 1, lambda x: a * np.asarray(x, dtype=float), jac, "flow",
        ((-1.0,), (1.0,)), {"a": a}, f_scalar=lambda x: a * x,
        constant_jacobian=True,
    )


def logistic(r: float = 4.0) -> VertexDynamics:
    r = float(r)

    def f(x):
        x = np.asarray(x, dtype=float)
        return r * x * (1.0 - x)

    def jac(x):
        x = np.asarray(x, dtype=float)
        return (r * (1.0 - 2.0 * x))[..., None]

    return VertexDynamics(
        "logistic", 1, f, jac, "map", ((0.0,), (1.0,)), {"r": r},
        f_scalar=lambda x: r * x * (1.0 - x),
    )


def lorenz(sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0) -> VertexDynamics:
    s, r, b = float(sigma), float(rho), float(beta)

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
        out[..., 0] = s * (x1 - x0)
        out[..., 1] = x0 * (r - x2) - x1
        out[..., 2] = x0 * x1 - b * x2
        return out

    def jac(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape + (3,))
        J[..., 0, 0] = -s
        J[..., 0, 1] = s
        J[..., 1, 0] = r - x[..., 2]
        J[..., 1, 1] = -1.0
        J[..., 1, 2] = -x[..., 0]
        J[..., 2, 0] = x[..., 1]
        J[..., 2, 1] = x[..., 0]
        J[..., 2, 2] = -b
        return J

    box = ((-20.0, -25.0, 5.0), (20.0, 25.0, 45.0))
    return VertexDynamics("lorenz", 3, f, jac, "flow", box, {"sigma": s, "rho": r, "beta": b})


def rossler(a: float = 0.2, b: float = 0.2, c: float = 5.7) -> VertexDynamics:
    a, b, c = float(a), float(b), float(c)

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
        out[..., 0] = -x1 - x2
        out[..., 1] = x0 + a * x1
        out[..., 2] = b + x2 * (x0 - c)
        return out

    def jac(x):
        x = np.asarray(x, dtype=float)
        J = np.zeros(x.shape + (3,))
        J[..., 0, 1] = -1.0
        J[..., 0, 2] = -1.0
        J[..., 1, 0] = 1.0
        J[..., 1, 1] = a
        J[..., 2, 0] = x[..., 2]
        J[..., 2, 2] = x[..., 0] - c
        return J

    box = ((-10.0, -10.0, 0.0), (10.0, 10.0, 5.0))
    return VertexDynamics("rossler", 3, f, jac, "flow", box, {"a": a, "b": b, "c": c})


DYNAMICS: dict[str, Callable[..., VertexDynamics]] = {
    "linear": linear,
    "logistic": logistic,
    "lorenz": lorenz,
    "rossler": rossler,
}


def make_dynamics(name: str, **params) -> VertexDynamics:
    try:
        factory = DYNAMICS[name]
    except KeyError:
        raise ValueError(f"unknown dynamics {name!r}; choose from {sorted(DYNAMICS)}") from None
    return factory(**params)


def jacobian_error(dyn: VertexDynamics, points: Array, step: float = 1e-6) -> float:
    """Largest componentwise gap between ``dyn.jacobian`` and central differences of ``dyn.f``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    J = dyn.jacobian(points)
    worst = 0.0
    for k in range(dyn.dim):
        e = np.zeros(dyn.dim)
        e[k] = step
        fd = (dyn.f(points + e) - dyn.f(points - e)) / (2 * step)
        worst = max(worst, float(np.max(np.abs(fd - J[..., :, k]))))
    return worst


@dataclass(frozen=True)
class ScalarMap:
    """Scalar function ``g`` with derivative, applied componentwise."""

    name: str
    fn: Callable[[Array], Array]
    deriv: Callable[[Array], Array]


SCALAR_MAPS: dict[str, ScalarMap] = {
    "identity": ScalarMap("identity", lambda y: np.asarray(y, dtype=float), np.ones_like),
    "tanh": ScalarMap("tanh", np.tanh, lambda y: 1.0 / np.cosh(y) ** 2),
    "sin": ScalarMap("sin", np.sin, np.cos),
}


# ---------------------------------------------------------------------------
# couplings


@dataclass(frozen=True)
class MatrixCoupling:
    """``dx_i = f(x_i) + sum_j A_ij h(x_j)``."""

    A: Array
    h: VertexDynamics

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"coupling matrix must be square, got {A.shape}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def n_vertices(self) -> int:
        return self.A.shape[0]

    @property
    def row_sums(self) -> Array:
        return self.A.sum(axis=1)

    @property
    def row_sum_constant(self) -> bool:
        rs = self.row_sums
        return bool(np.ptp(rs) <= 1e-12 * max(1.0, float(np.abs(rs).max())))


@dataclass(frozen=True)
class LaplacianDiffusive:
    """``dx_i = f(x_i) - sigma (L f)(x)_i``: the Laplacian acts on the vector of f-values."""

    sigma: float
    laplacian: LaplacianMatrix

    def __post_init__(self):
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError(f"sigma must lie in [0, 1], got {self.sigma}")

    @property
    def n_vertices(self) -> int:
        return self.laplacian.n


@dataclass(frozen=True)
class HyperedgeSymmetric:
    """``dx_i = f(x_i) + sum_{h containing i} g(mean of the members of h)``.

    Membership is unsigned: catalysts participate like any other member, and
    the aggregate includes vertex ``i`` itself.
    """

    hypergraph: ChemicalHypergraph
    g: ScalarMap = SCALAR_MAPS["identity"]
    aggregator: Literal["arithmetic", "geometric"] = "arithmetic"
    _B: Array = field(init=False, repr=False, compare=False)
    _sizes: Array = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.aggregator not in ("arithmetic", "geometric"):
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        B = incidence(self.hypergraph).binary.astype(float)
        object.__setattr__(self, "_B", B)
        object.__setattr__(self, "_sizes", B.sum(axis=0))

    @property
    def n_vertices(self) -> int:
        return self.hypergraph.n_vertices

    def aggregate(self, x: Array) -> Array:
        """Per-hyperedge symmetric mean, shape ``(M, m)``."""
        B, m_h = self._B, self._sizes[:, None]
        if self.aggregator == "arithmetic":
            return (B.T @ x) / m_h
        nonpos = (B.T @ (x <= 0.0)) > 0
        if np.any(nonpos):
            h, comp = np.argwhere(nonpos)[0]
            raise DynamicsDomainError(
                f"geometric mean over hyperedge {h} (component {comp}) needs positive entries"
            )
        logx = np.log(np.where(x > 0.0, x, 1.0))
        return np.exp((B.T @ logx) / m_h)


Coupling = MatrixCoupling | LaplacianDiffusive | HyperedgeSymmetric


@dataclass(frozen=True)
class CoupledSystem:
    dynamics: VertexDynamics
    coupling: Coupling

    def __post_init__(self):
        c = self.coupling
        if isinstance(c, MatrixCoupling) and c.h.dim != self.dynamics.dim:
            raise ValueError("f and h must have the same state dimension")

    @property
    def n_vertices(self) -> int:
        return self.coupling.n_vertices

    @property
    def dim(self) -> int:
        return self.dynamics.dim

    def describe(self) -> str:
        c = self.coupling
        if isinstance(c, MatrixCoupling):
            return f"matrix(h={c.h.name})"
        if isinstance(c, LaplacianDiffusive):
            return f"laplacian(sigma={c.sigma!r})"
        return f"hyperedge(g={c.g.name},aggregator={c.aggregator})"


@dataclass(frozen=True)
class SystemState:
    t: float
    x: Array

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"state must be an (N, m) array, got shape {x.shape}")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled trajectory; ``x`` has shape ``(samples, N, m)``."""

    times: Array
    x: Array
    metadata: dict = field(default_factory=dict)

    @property
    def states(self) -> list[SystemState]:
        return [SystemState(t, xi) for t, xi in zip(self.times, self.x)]

    @property
    def final(self) -> SystemState:
        return SystemState(self.times[-1], self.x[-1])


def _as_array(system: CoupledSystem, state) -> tuple[Array, float]:
    if isinstance(state, SystemState):
        x, t = state.x, state.t
    else:
        x, t = np.asarray(state, dtype=float), 0.0
    if x.ndim == 1 and system.dim == 1:
        x = x[:, None]
    if x.shape != (system.n_vertices, system.dim):
        raise ValueError(
            f"state shape {x.shape} does not match system ({system.n_vertices}, {system.dim})"
        )
    return x, t


def _checked(values: Array, what: str, t: float) -> Array:
    if not np.all(np.isfinite(values)):
        vertex = int(np.argwhere(~np.isfinite(values))[0][0])
        raise IntegrationError(f"{what} is non-finite at vertex {vertex}, t={t}", vertex, t)
    return values


def rhs(system: CoupledSystem, state) -> Array:
    """Right-hand side of the coupled system (the update itself for maps)."""
    x, t = _as_array(system, state)
    # overflow is reported through IntegrationError, not numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        F = _checked(system.dynamics.f(x), "f", t)
        c = system.coupling
        if isinstance(c, MatrixCoupling):
            Hx = _checked(c.h.f(x), "h", t)
            return F + c.A @ Hx
        if isinstance(c, LaplacianDiffusive):
            return F - c.sigma * (c.laplacian.dense @ F)
        agg = c.aggregate(x)
        return F + c._B @ c.g.fn(agg)


def linearized_rhs(system: CoupledSystem, xstar, eps) -> Array:
    """Variational right-hand side at ``xstar`` applied to the perturbation ``eps``."""
    x, t = _as_array(system, xstar)
    e, _ = _as_array(system, eps)
    Df = system.dynamics.jacobian(x)
    local = np.einsum("iab,ib->ia", Df, e)
    c = system.coupling
    if isinstance(c, MatrixCoupling):
        Dh = c.h.jacobian(x)
        return local + c.A @ np.einsum("jab,jb->ja", Dh, e)
    if isinstance(c, LaplacianDiffusive):
        return local - c.sigma * (c.laplacian.dense @ local)
    B, m_h = c._B, c._sizes[:, None]
    agg = c.aggregate(x)
    if c.aggregator == "arithmetic":
        d_agg = (B.T @ e) / m_h
    else:
        d_agg = agg / m_h * (B.T @ (e / x))
    return local + B @ (c.g.deriv(agg) * d_agg)


def _rk4_step(system: CoupledSystem, x: Array, t: float, dt: float) -> Array:
    k1 = rhs(system, SystemState(t, x))
    k2 = rhs(system, SystemState(t + dt / 2, x + dt / 2 * k1))
    k3 = rhs(system, SystemState(t + dt / 2, x + dt / 2 * k2))
    k4 = rhs(system, SystemState(t + dt, x + dt * k3))
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(
    system: CoupledSystem, s0: SystemState, dt: float, t_end: float, dt_out: float | None = None
) -> Trajectory:
    """Classical fixed-step RK4, sampled every ``dt_out`` (an integer multiple of ``dt``)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    dt_out = dt if dt_out is None else dt_out
    every = round(dt_out / dt)
    if every < 1 or abs(every * dt - dt_out) > 1e-9 * dt_out:
        raise ValueError("dt_out must be an integer multiple of dt")
    if t_end <= s0.t:
        raise ValueError("t_end must exceed the initial time")
    x, t0 = _as_array(system, s0)
    n_steps = int(math.floor((t_end - t0) / dt + 1e-9))
    n_samples = n_steps // every + 1
    out = np.empty((n_samples,) + x.shape)
    out[0] = x
    meta = {"integrator": "rk4", "dt": dt, "dt_out": dt_out, "coupling": system.describe()}
    for n in range(1, n_steps + 1):
        t = t0 + (n - 1) * dt
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                x = _rk4_step(system, x, t, dt)
            _checked(x, "state", t + dt)
        except IntegrationError as exc:
            k = (n - 1) // every + 1
            exc.partial = Trajectory(t0 + dt_out * np.arange(k), out[:k].copy(), meta)
            raise
        if n % every == 0:
            out[n // every] = x
    times = t0 + dt_out * np.arange(n_samples)
    return Trajectory(times, out, meta)


def cml_step(system: CoupledSystem, state: SystemState) -> SystemState:
    """One coupled-map-lattice step: the right-hand side read as a map."""
    x_next = rhs(system, state)
    _checked(x_next, "map output", state.t + 1)
    return SystemState(state.t + 1, x_next)


def cml_run(system: CoupledSystem, s0: SystemState, n_steps: int, every: int = 1) -> Trajectory:
    x, t0 = _as_array(system, s0)
    n_samples = n_steps // every + 1
    out = np.empty((n_samples,) + x.shape)
    out[0] = x
    state = SystemState(t0, x)
    meta = {"integrator": "map", "dt": 1, "dt_out": every, "coupling": system.describe()}
    for n in range(1, n_steps + 1):
        try:
            state = cml_step(system, state)
        except IntegrationError as exc:
            k = (n - 1) // every + 1
            exc.partial = Trajectory(t0 + every * np.arange(k, dtype=float), out[:k].copy(), meta)
            raise
        if n % every == 0:
            out[n // every] = state.x
    return Trajectory(t0 + every * np.arange(n_samples, dtype=float), out, meta)


def sync_error(x, P="constants") -> float:
    """Distance of a state from the (generalized) synchronization manifold.

    With ``P="constants"`` this is ``max_{i,a} |x_i^a - mean_i x_i^a|``;
    otherwise ``||x - P x||_inf`` with the projector applied per component.
    """
    x = x.x if isinstance(x, SystemState) else np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if isinstance(P, str):
        if P != "constants":
            raise ValueError(f"unknown projector {P!r}")
        # centring on x_0 first keeps identical rows at exactly zero error
        d = x - x[:1]
        resid = d - d.mean(axis=0, keepdims=True)
    else:
        resid = x - np.asarray(P) @ x
    return float(np.max(np.abs(resid)))
