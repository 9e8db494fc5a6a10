"""Explicit finite-difference scheme for the SPDE system on a truncated line.

The system is discretized with the standard Walsh discretization: explicit
Euler in time, centered second difference in space, and a noise increment
``sqrt(dt/dx) * xi`` per cell and channel.  Stability requires
``dt <= dx^2 / 2`` and is enforced as a hard error.  The domain [-L, L] is
clamped to the initial value 1 at both ends; tangent (linearized) fields are
clamped to 0.

The drift generator is normalized so that its fundamental solution is the
Gaussian density with variance t (``model.heat_kernel``), which every
covariance formula in the package is built on; the stencil coefficient is
therefore ``dt / (2 dx^2)`` (``DIFFUSIVITY = 1/2``).

Replicas are reproducible units of work: the noise of replica ``r`` under
seed ``s`` is the counter-based stream keyed by ``(s, r)``, so trajectories
are pure functions of ``(field, grid, seed, replica_id)`` regardless of batch
composition or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import BlowupError, ConfigError
from .model import DiffusionField
from .rng import philox_generator

TIME_ALIGN_TOL = 1e-9

# Diffusivity matching the variance-t heat kernel of the mild-solution formulas.
DIFFUSIVITY = 0.5


@dataclass(frozen=True)
class Grid:
    """Space-time discretization of [0, T] x [-L, L].

    ``nx`` interior nodes at ``x_l = -L + l dx`` (l = 1..nx) with spacing
    ``dx = 2L/(nx+1)``; ``nt`` steps of size ``dt = T/nt``.
    """

    T: float
    nt: int
    L: float
    nx: int
    output_times: tuple = ()

    def __post_init__(self):
        if self.T <= 0.0 or self.L <= 0.0:
            raise ConfigError("grid extents T, L must be positive")
        if self.nt < 1 or self.nx < 1:
            raise ConfigError("grid sizes nt, nx must be positive")
        if self.dt > 0.5 * self.dx * self.dx * (1.0 + 1e-12):
            raise ConfigError(
                f"stability violated: dt = {self.dt:.6g} exceeds dx^2/2 = "
                f"{0.5 * self.dx * self.dx:.6g}; refine dt or coarsen dx")
        times = tuple(sorted(float(t) for t in self.output_times))
        for t in times:
            self.time_index(t)
        object.__setattr__(self, "output_times", times)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def dx(self) -> float:
        return 2.0 * self.L / (self.nx + 1)

    @property
    def xs(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(1, self.nx + 1)

    def time_index(self, t: float) -> int:
        """Map a time to its step index; times must lie on the grid exactly."""
        n = round(t / self.dt)
        if n < 0 or n > self.nt or abs(t - n * self.dt) > TIME_ALIGN_TOL * max(1.0, self.T):
            raise ConfigError(f"time {t} is not on the grid (dt = {self.dt:.6g})")
        return n

    @property
    def margin(self) -> float:
        """Largest radius with the required truncation padding 6 sqrt(2T)."""
        return self.L - 6.0 * math.sqrt(2.0 * self.T)

    def validate_radius(self, R: float) -> None:
        if R <= 0.0:
            raise ConfigError(f"radius must be positive, got {R}")
        if R > self.margin + TIME_ALIGN_TOL:
            raise ConfigError(
                f"radius {R} exceeds the truncation margin L - 6 sqrt(2T) = "
                f"{self.margin:.6g}; enlarge the domain")

    @classmethod
    def build(cls, T: float, dt: float, dx: float, r_max: float,
              output_times: Sequence[float] = (), padding: float = 6.0) -> "Grid":
        """Construct a grid from target resolutions and the largest radius.

        The half-width is rounded up to a lattice multiple of ``dx`` so that
        node coordinates are exact multiples of ``dx``; ``padding`` multiplies
        ``sqrt(2T)``.
        """
        if dt <= 0.0 or dx <= 0.0:
            raise ConfigError("dt and dx must be positive")
        if padding < 6.0:
            raise ConfigError("truncation padding below 6 sqrt(2T) is not allowed")
        nt = max(1, round(T / dt))
        if abs(T / nt - dt) > TIME_ALIGN_TOL * dt:
            raise ConfigError(f"dt = {dt} does not divide T = {T}")
        need = r_max + padding * math.sqrt(2.0 * T)
        n_half = int(math.ceil(need / dx - TIME_ALIGN_TOL))
        return cls(T=T, nt=nt, L=n_half * dx, nx=2 * n_half - 1,
                   output_times=tuple(output_times))


@dataclass
class NoiseStream:
    """Reproducible per-replica stream of standard normals ``xi[n, j, l]``."""

    seed: int
    replica_id: int
    m: int
    nx: int

    def __post_init__(self):
        if self.replica_id < 0:
            raise ConfigError("replica_id must be nonnegative")
        self._gen = philox_generator(self.seed, self.replica_id)

    def normals(self, steps: int, out: Optional[np.ndarray] = None) -> np.ndarray:
        """Next ``steps`` time slices, shape (steps, m, nx)."""
        if out is None:
            return self._gen.standard_normal((steps, self.m, self.nx))
        self._gen.standard_normal(out=out)
        return out


@dataclass(frozen=True)
class FieldState:
    """Solution values on the interior nodes at one time step."""

    step: int
    values: np.ndarray  # (d, nx)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise ConfigError("field state values must be a (d, nx) array")
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class TangentState:
    """Linearized-field values for one source index, clamped to 0 at the ends."""

    step: int
    source_index: int
    values: np.ndarray  # (d, nx)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise ConfigError("tangent values must be a (d, nx) array")
        object.__setattr__(self, "values", arr)


def _laplacian(values: np.ndarray, boundary: float) -> np.ndarray:
    """Centered second difference along the node axis of (..., nx, d) arrays."""
    lap = np.empty_like(values)
    if values.shape[-2] == 1:
        lap[..., 0, :] = 2.0 * boundary - 2.0 * values[..., 0, :]
        return lap
    lap[..., 0, :] = values[..., 1, :] - 2.0 * values[..., 0, :] + boundary
    lap[..., -1, :] = boundary - 2.0 * values[..., -1, :] + values[..., -2, :]
    lap[..., 1:-1, :] = (values[..., 2:, :] - 2.0 * values[..., 1:-1, :]
                         + values[..., :-2, :])
    return lap


def _advance(u: np.ndarray, xi: np.ndarray, field: DiffusionField,
             lam: float, scale: float) -> np.ndarray:
    """One explicit step of the batch state ``u`` (B, nx, d) under ``xi`` (B, nx, m)."""
    sig = field.sigma(u)
    out = np.matmul(sig, xi[..., None])[..., 0]
    out *= scale
    lap = _laplacian(u, 1.0)
    lap *= lam
    out += lap
    out += u
    return out


def _advance_tangent(z: np.ndarray, xi: np.ndarray,
                     jac: np.ndarray, lam: float, scale: float,
                     source: Optional[np.ndarray]) -> np.ndarray:
    """One linearized step of ``z`` (B, nx, d) under the primal path's noise;
    ``jac`` is the Jacobian evaluated on the primal state."""
    jz = np.einsum("...ijk,...k->...ij", jac, z)
    noise_term = np.matmul(jz, xi[..., None])[..., 0]
    out = z + lam * _laplacian(z, 0.0) + scale * noise_term
    if source is not None:
        out = out + source
    return out


def step_explicit(state: FieldState, field: DiffusionField, grid: Grid,
                  noise: np.ndarray) -> FieldState:
    """Advance one field state by one explicit step.

    ``noise`` is the (m, nx) slice of standard normals for this step.  The
    update at interior node l and component i is

        u_i += (dt/dx^2) (u_i(l+1) - 2 u_i(l) + u_i(l-1))
               + sum_j sigma_ij(u(l)) sqrt(dt/dx) xi_j(l)

    with boundary neighbors clamped to 1.
    """
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (field.m, grid.nx):
        raise ConfigError(f"noise slice must have shape {(field.m, grid.nx)}")
    u = np.ascontiguousarray(state.values.T)[None]
    xi = np.ascontiguousarray(noise.T)[None]
    lam = DIFFUSIVITY * grid.dt / (grid.dx * grid.dx)
    scale = math.sqrt(grid.dt / grid.dx)
    out = _advance(u, xi, field, lam, scale)
    if not np.isfinite(out).all():
        raise BlowupError(f"non-finite field values at step {state.step + 1}")
    return FieldState(step=state.step + 1, values=out[0].T)


def step_tangent(u_state: FieldState, tangents: Sequence[TangentState],
                 field: DiffusionField, grid: Grid, noise: np.ndarray,
                 source_increments: Optional[Sequence[np.ndarray]] = None
                 ) -> list[TangentState]:
    """Advance tangent fields coupled to ``u_state`` under the same noise.

    Each tangent obeys the linearization of the explicit step around the
    primal path, plus its per-step source increment; boundary neighbors are
    clamped to 0 (the derivative of the clamped primal boundary).
    """
    if not field.differentiable:
        raise ConfigError("tangent stepping requires a field with a jacobian")
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (field.m, grid.nx):
        raise ConfigError(f"noise slice must have shape {(field.m, grid.nx)}")
    u = np.ascontiguousarray(u_state.values.T)[None]
    xi = np.ascontiguousarray(noise.T)[None]
    jac = field.jacobian(u)
    lam = DIFFUSIVITY * grid.dt / (grid.dx * grid.dx)
    scale = math.sqrt(grid.dt / grid.dx)
    out = []
    for idx, tan in enumerate(tangents):
        if tan.step != u_state.step:
            raise ConfigError("tangent and primal states are out of sync")
        src = None
        if source_increments is not None:
            src = np.ascontiguousarray(np.asarray(source_increments[idx], dtype=float).T)[None]
        z = np.ascontiguousarray(tan.values.T)[None]
        znew = _advance_tangent(z, xi, jac, lam, scale, src)
        if not np.isfinite(znew).all():
            raise BlowupError(f"non-finite tangent values at step {tan.step + 1}")
        out.append(TangentState(step=tan.step + 1, source_index=tan.source_index,
                                values=znew[0].T))
    return out


def noise_steps(field: DiffusionField, grid: Grid, seed: int,
                replicas: Sequence[int], last_step: Optional[int] = None,
                block_steps: int = 32
                ) -> Iterator[tuple[int, np.ndarray, Optional[np.ndarray]]]:
    """Drive a batch of replicas, yielding ``(n, u, xi)`` per step.

    ``u`` has shape (B, nx, d) and is the state at step ``n``; ``xi`` has
    shape (B, nx, m) and is the noise that will advance step n -> n+1.  A
    final ``(last_step, u, None)`` closes the stream.  Consumers must not
    mutate the yielded arrays.
    """
    last = grid.nt if last_step is None else last_step
    if last < 0 or last > grid.nt:
        raise ConfigError(f"last_step must lie in [0, {grid.nt}]")
    streams = [NoiseStream(seed, rid, field.m, grid.nx) for rid in replicas]
    lam = DIFFUSIVITY * grid.dt / (grid.dx * grid.dx)
    scale = math.sqrt(grid.dt / grid.dx)
    u = np.ones((len(streams), grid.nx, field.d))
    buf = np.empty((len(streams), block_steps, field.m, grid.nx))
    n = 0
    while n < last:
        k = min(block_steps, last - n)
        for i, s in enumerate(streams):
            s.normals(k, out=buf[i, :k])
        block = np.ascontiguousarray(buf[:, :k].transpose(1, 0, 3, 2))  # (k, B, nx, m)
        for j in range(k):
            yield n, u, block[j]
            u = _advance(u, block[j], field, lam, scale)
            n += 1
        _check_finite(u, replicas, n)
    yield last, u, None


def _check_finite(u: np.ndarray, replicas: Sequence[int], step: int) -> None:
    ok = np.isfinite(u).all(axis=(1, 2))
    if not ok.all():
        bad = [replicas[i] for i in np.flatnonzero(~ok)]
        raise BlowupError(
            f"replica(s) {bad} produced non-finite field values by step {step}")


def simulate(field: DiffusionField, grid: Grid, seed: int,
             replica_id: int) -> list[FieldState]:
    """Full trajectory of one replica, returning states at the output times.

    A pure function of ``(field, grid, seed, replica_id)``: identical inputs
    give bit-identical outputs.
    """
    if not grid.output_times:
        raise ConfigError("grid has no output_times to report")
    wanted = {grid.time_index(t) for t in grid.output_times}
    states = []
    for n, u, xi in noise_steps(field, grid, seed, [replica_id]):
        if n in wanted:
            states.append(FieldState(step=n, values=u[0].T.copy()))
        if xi is None:
            break
    return states
