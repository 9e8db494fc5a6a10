"""Spatial averages, eta curves, and covariance quadratures.

The normalized spatial average of component i over [-R, R] is

    F_i = (1/sqrt(R)) ( sum_l u_i(x_l) w_l - 2R ),

a midpoint-cell Riemann sum whose weights are the exact overlaps of the node
cells with the window, so a constant field averages to zero up to rounding.

Eta curves tabulate the stationary second moments of the coefficient field,
eta^(k)_ij(r) = E[sigma_ik(u(r, x)) sigma_jk(u(r, x))]; they are the only
model input of every covariance quadrature in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import special

from .errors import ConfigError
from .model import DiffusionField
from .solver import FieldState, Grid, noise_steps

ETA_SYM_TOL = 1e-10


def average_weights(grid: Grid, R: float) -> np.ndarray:
    """Quadrature weights of the window [-R, R]: exact cell overlaps."""
    grid.validate_radius(R)
    xs = grid.xs
    h = 0.5 * grid.dx
    return np.clip(np.minimum(xs + h, R) - np.maximum(xs - h, -R), 0.0, grid.dx)


def spatial_average(state, grid: Grid, R: float) -> np.ndarray:
    """Normalized, centered spatial average of a field state over [-R, R]."""
    values = state.values if isinstance(state, FieldState) else np.asarray(state, dtype=float)
    if values.ndim != 2 or values.shape[1] != grid.nx:
        raise ConfigError(f"state values must be (d, {grid.nx})")
    w = average_weights(grid, R)
    return (values @ w - 2.0 * R) / math.sqrt(R)


@dataclass(frozen=True)
class AverageSample:
    """Per-replica spatial averages on a (time, radius) grid."""

    replica_id: int
    times: tuple
    radii: tuple
    f: np.ndarray  # (n_times, n_radii, d)

    @property
    def g(self) -> np.ndarray:
        """Unnormalized averages G = sqrt(R) * F."""
        r = np.sqrt(np.asarray(self.radii, dtype=float))
        return self.f * r[None, :, None]


@dataclass
class EtaCurve:
    """Tabulated eta^(k)_ij(r) on a time grid, with standard errors."""

    times: np.ndarray            # (n,)
    values: np.ndarray           # (n, m, d, d)
    se: Optional[np.ndarray]     # same shape, or None for exact curves
    provenance: str              # monte-carlo | closed-form-constant | volterra-pam

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.size < 2:
            raise ConfigError("eta curve needs at least two time nodes")
        if np.any(np.diff(self.times) <= 0.0) or self.times[0] < 0.0:
            raise ConfigError("eta times must be strictly increasing and nonnegative")
        if self.values.shape[:1] != self.times.shape or self.values.ndim != 4:
            raise ConfigError("eta values must have shape (n_times, m, d, d)")
        if self.values.shape[2] != self.values.shape[3]:
            raise ConfigError("eta values must be square in the component indices")
        scale = max(1.0, float(np.max(np.abs(self.values))))
        asym = float(np.max(np.abs(self.values - self.values.transpose(0, 1, 3, 2))))
        if asym > ETA_SYM_TOL * scale:
            raise ConfigError("eta curve is not symmetric in the component indices")
        self.values = 0.5 * (self.values + self.values.transpose(0, 1, 3, 2))
        if self.se is not None:
            self.se = np.asarray(self.se, dtype=float)
            if self.se.shape != self.values.shape:
                raise ConfigError("eta SE must match the value shape")

    @property
    def d(self) -> int:
        return self.values.shape[2]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @classmethod
    def constant(cls, S, times: Sequence[float]) -> "EtaCurve":
        """Exact curve of a constant coefficient matrix: eta^(k)_ij = S_ik S_jk."""
        S = np.asarray(S, dtype=float)
        eta0 = np.einsum("ik,jk->kij", S, S)
        times = np.asarray(list(times), dtype=float)
        vals = np.broadcast_to(eta0, (times.size,) + eta0.shape).copy()
        return cls(times=times, values=vals, se=np.zeros_like(vals),
                   provenance="closed-form-constant")

    def interp(self, r: float) -> np.ndarray:
        """Linear interpolation of the (m, d, d) block at time r."""
        if r < self.times[0] - 1e-12 or r > self.times[-1] + 1e-12:
            raise ConfigError(f"time {r} outside the eta grid range")
        r = min(max(r, float(self.times[0])), float(self.times[-1]))
        j = int(np.searchsorted(self.times, r, side="right") - 1)
        j = min(max(j, 0), self.times.size - 2)
        t0, t1 = self.times[j], self.times[j + 1]
        lam = 0.0 if t1 == t0 else (r - t0) / (t1 - t0)
        return (1.0 - lam) * self.values[j] + lam * self.values[j + 1]

    def min_eigenvalues(self) -> np.ndarray:
        """Smallest eigenvalue of each (k, r) block; PSD curves are >= 0."""
        from .stats import sym_eig

        out = np.empty(self.values.shape[:2])
        for a in range(self.values.shape[0]):
            for k in range(self.values.shape[1]):
                out[a, k] = sym_eig(self.values[a, k])[0][0]
        return out

    def to_rows(self) -> Iterable[tuple]:
        se = self.se if self.se is not None else np.zeros_like(self.values)
        for a, r in enumerate(self.times):
            for k in range(self.m):
                for i in range(self.d):
                    for j in range(self.d):
                        yield (float(r), k, i, j,
                               float(self.values[a, k, i, j]),
                               float(se[a, k, i, j]))

    @classmethod
    def from_rows(cls, rows: Iterable[tuple], provenance: str = "monte-carlo") -> "EtaCurve":
        data = {}
        for r, k, i, j, val, se in rows:
            data.setdefault(float(r), {})[(int(k), int(i), int(j))] = (float(val), float(se))
        times = np.array(sorted(data))
        if times.size < 2:
            raise ConfigError("eta table needs at least two time nodes")
        m = 1 + max(k for e in data.values() for k, _, _ in e)
        d = 1 + max(i for e in data.values() for _, i, _ in e)
        vals = np.zeros((times.size, m, d, d))
        ses = np.zeros_like(vals)
        for a, r in enumerate(times):
            for (k, i, j), (val, se) in data[float(r)].items():
                vals[a, k, i, j] = val
                ses[a, k, i, j] = se
        return cls(times=times, values=vals, se=ses, provenance=provenance)


def default_block_width(grid: Grid) -> float:
    """Node-batching width for pooled-SE estimation: 4 sqrt(2T)."""
    return 4.0 * math.sqrt(2.0 * grid.T)


def estimate_eta(field: DiffusionField, grid: Grid, times: Sequence[float],
                 replicas: int, seed: int, chunk: int = 256) -> EtaCurve:
    """Monte Carlo estimate of the eta curve.

    Products sigma_ik(u) sigma_jk(u) are pooled over the replicas and over
    interior nodes with |x| <= L/2 (stationarity away from the clamped
    boundary).  Standard errors batch the pooled nodes into blocks of width
    4 sqrt(2T), beyond which spatial correlation is negligible.
    """
    times = sorted(float(t) for t in times)
    wanted = {grid.time_index(t): idx for idx, t in enumerate(times)}
    if len(wanted) != len(times):
        raise ConfigError("eta times must be distinct grid times")
    if replicas < 2:
        raise ConfigError("eta estimation needs at least 2 replicas")

    mask = np.abs(grid.xs) <= 0.5 * grid.L + 1e-12
    idx = np.flatnonzero(mask)
    per_block = max(1, int(round(default_block_width(grid) / grid.dx)))
    starts = np.arange(0, idx.size, per_block)
    counts = np.diff(np.append(starts, idx.size)).astype(float)

    last_needed = max(wanted)
    samples = [[] for _ in times]
    for lo in range(0, replicas, chunk):
        ids = range(lo, min(lo + chunk, replicas))
        for n, u, xi in noise_steps(field, grid, seed, ids, last_step=last_needed):
            pos = wanted.get(n)
            if pos is not None:
                sig = field.sigma(u[:, idx, :])                      # (B, P, d, m)
                prod = np.einsum("blik,bljk->blkij", sig, sig)       # (B, P, m, d, d)
                block = np.add.reduceat(prod, starts, axis=1)
                block /= counts[None, :, None, None, None]
                samples[pos].append(block)
            if xi is None:
                break

    vals = np.empty((len(times), field.m, field.d, field.d))
    ses = np.empty_like(vals)
    for pos in range(len(times)):
        pooled = np.concatenate(samples[pos], axis=0)    # (M, n_blocks, m, d, d)
        flat = pooled.reshape(-1, *pooled.shape[2:])
        vals[pos] = flat.mean(axis=0)
        ses[pos] = flat.std(axis=0, ddof=1) / math.sqrt(flat.shape[0])
    return EtaCurve(times=np.asarray(times), values=vals, se=ses,
                    provenance="monte-carlo")


def window_mass_factor(s, R: float):
    """Normalized double-window mass I_R(s) = int_0^{2R} p_s(z) (2 - z/R) dz.

    Equals (1/R) int int_{[-R,R]^2} p_s(x - x') dx dx' / (2R) ... in [0, 1],
    with I_R(0) = 1; evaluated in closed form via erf and the Gaussian moment
    int_0^Z z p_s(z) dz = s (p_s(0) - p_s(Z)).
    """
    if R <= 0.0:
        raise ConfigError(f"radius must be positive, got {R}")
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.ones_like(s_arr)
    pos = s_arr > 0.0
    sp = s_arr[pos]
    p0 = 1.0 / np.sqrt(2.0 * np.pi * sp)
    p2r = np.exp(-2.0 * R * R / sp) / np.sqrt(2.0 * np.pi * sp)
    out[pos] = special.erf(2.0 * R / np.sqrt(2.0 * sp)) - (sp / R) * (p0 - p2r)
    return float(out[0]) if np.ndim(s) == 0 else out


def _restrict_curve(eta: EtaCurve, arr: np.ndarray, t: float
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Restrict an array tabulated on the eta grid to [0, t], appending a
    linearly interpolated endpoint node at t."""
    if eta.times[0] > 1e-12:
        raise ConfigError("covariance quadratures need an eta grid starting at 0")
    if t < 0.0 or t > eta.times[-1] + 1e-12:
        raise ConfigError(f"time {t} outside the eta grid range")
    t = min(t, float(eta.times[-1]))
    inside = eta.times < t - 1e-12
    j = min(max(int(np.searchsorted(eta.times, t, side="right") - 1), 0),
            eta.times.size - 2)
    t0, t1 = eta.times[j], eta.times[j + 1]
    lam = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
    end = (1.0 - lam) * arr[j] + lam * arr[j + 1]
    rs = np.append(eta.times[inside], t)
    vals = np.concatenate([arr[inside], end[None]], axis=0)
    return rs, vals


def _trapezoid_eta(rs: np.ndarray, integrand: np.ndarray) -> np.ndarray:
    """Trapezoid along the leading (time) axis of an (n, m, d, d) integrand."""
    return np.trapezoid(integrand, rs, axis=0)


def limit_cross_covariance(eta: EtaCurve, s: float, t: float) -> np.ndarray:
    """Limiting covariance 2 sum_k int_0^{min(s,t)} eta^(k)(r) dr."""
    rs, vals = _restrict_curve(eta, eta.values, min(s, t))
    out = 2.0 * _trapezoid_eta(rs, vals).sum(axis=0)
    return 0.5 * (out + out.T)


def limit_covariance(eta: EtaCurve, t: float) -> np.ndarray:
    """Covariance matrix of the limiting Gaussian at time t."""
    return limit_cross_covariance(eta, t, t)


def prelimit_cross_covariance(eta: EtaCurve, s: float, t: float, R: float) -> np.ndarray:
    """Exact covariance of the normalized averages at times (s, t), radius R:
    2 sum_k int_0^{min(s,t)} eta^(k)(r) I_R(s + t - 2r) dr.

    The endpoint s = t, r -> t is regular because the closed form of I_R
    stays bounded (I_R -> 1).
    """
    rs, vals = _restrict_curve(eta, eta.values, min(s, t))
    factor = window_mass_factor(np.maximum(s + t - 2.0 * rs, 0.0), R)
    out = 2.0 * _trapezoid_eta(rs, vals * factor[:, None, None, None]).sum(axis=0)
    return 0.5 * (out + out.T)


def prelimit_covariance(eta: EtaCurve, t: float, R: float) -> np.ndarray:
    """Exact covariance of F^R(t), by windowed quadrature of the eta curve."""
    return prelimit_cross_covariance(eta, t, t, R)


def covariance_se(eta: EtaCurve, t: float, R: Optional[float] = None,
                  s: Optional[float] = None) -> np.ndarray:
    """Propagated standard error of the covariance quadratures.

    Eta errors are propagated through the linear quadrature assuming full
    correlation across grid times and channels (conservative).
    """
    if eta.se is None:
        return np.zeros((eta.d, eta.d))
    s = t if s is None else s
    rs, se_nodes = _restrict_curve(eta, eta.se, min(s, t))
    factor = np.ones_like(rs) if R is None else window_mass_factor(
        np.maximum(s + t - 2.0 * rs, 0.0), R)
    out = 2.0 * _trapezoid_eta(rs, np.abs(se_nodes) * factor[:, None, None, None]).sum(axis=0)
    return 0.5 * (out + out.T)


def two_point_cov(eta: EtaCurve, t: float, s: float, h: float) -> np.ndarray:
    """Two-point moments E[u_i(t, x) u_j(s, x + h)] from the eta curve:
    1 + sum_k int_0^{min(s,t)} eta^(k)_ij(r) p_{t+s-2r}(h) dr.

    At h = 0, t = s the (t - r)^(-1/2) endpoint singularity is removed by the
    substitution r = t - w^2, which turns the kernel into exp(-h^2/(4 w^2)) /
    sqrt(pi).
    """
    if t < 0.0 or s < 0.0:
        raise ConfigError("times must be nonnegative")
    a = min(s, t)
    d = eta.d
    if a == 0.0:
        return np.ones((d, d))
    if a > eta.times[-1] + 1e-12 or eta.times[0] > 1e-12:
        raise ConfigError("eta grid does not cover the requested times")

    npts = 4097
    if abs(t - s) > 1e-12:
        rs = np.linspace(0.0, a, npts)
        vals = np.stack([eta.interp(r) for r in rs])
        kern = np.exp(-h * h / (2.0 * (t + s - 2.0 * rs))) / np.sqrt(
            2.0 * np.pi * (t + s - 2.0 * rs))
        total = np.trapezoid(vals * kern[:, None, None, None], rs, axis=0)
    else:
        ws = np.linspace(0.0, math.sqrt(a), npts)
        vals = np.stack([eta.interp(t - w * w) for w in ws])
        if h == 0.0:
            expo = np.ones_like(ws)
        else:
            denom = 4.0 * ws * ws
            denom[0] = 1.0  # placeholder; the w = 0 limit of the kernel is 0
            expo = np.exp(-h * h / denom)
            expo[0] = 0.0
        kern = expo / math.sqrt(math.pi)
        total = np.trapezoid(vals * kern[:, None, None, None], ws, axis=0)
    return 1.0 + total.sum(axis=0)
