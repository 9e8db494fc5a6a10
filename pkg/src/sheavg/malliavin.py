"""Malliavin pairings by forward tangent simulation, and the Stein bound.

For each source index i the pairing <v_i, DF_j> of the adapted weight field

    v_{i,k}(s, y) = (1/sqrt(R)) sigma_ik(u(s, y)) int_{-R}^{R} p_{t-s}(x-y) dx

against the derivative of the averaged field splits into two terms:

* a no-propagation term, the double-window sum over cells of
  v_{i,k} v_{j,k} dt dx, and
* a stochastic propagation term: the Ito sum over cells of
  (1/sqrt(R)) window * jacobian(u) . Y^(i) against the driving noise,

where Y^(i) is the weight-aggregated tangent field that solves the linearized
scheme with per-step source dt * sum_k v_{i,k} sigma_(.,k)(u).  Summing the
per-source-point derivative contributions (``pairing_bruteforce``) gives the
identical value by linearity; only float rounding differs.  The expectation of
the pairing matrix is the exact covariance of F^R(t), which is the duality
identity the acceptance suite verifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .model import DiffusionField, kernel_window
from .observables import average_weights
from .solver import (DIFFUSIVITY, FieldState, Grid, NoiseStream, _advance,
                     _advance_tangent, _laplacian, noise_steps)
from .stats import SymMatrix, _as_sym, _inv_op_norm, op_norm

BRUTE_MAX_NT = 16
BRUTE_MAX_NX = 32


def _window_row(grid: Grid, tau: float, R: float) -> np.ndarray:
    """Window weights at time-to-horizon tau; the tau -> 0 limit is the
    indicator of the averaging interval."""
    if tau < 0.5 * grid.dt:
        return (np.abs(grid.xs) <= R).astype(float)
    return np.asarray(kernel_window(tau, grid.xs, R), dtype=float)


def v_weight(u_state: FieldState, field: DiffusionField, grid: Grid,
             t: float, R: float) -> np.ndarray:
    """Adapted weight field at the state's time: (d, m, nx) array with
    entry [i, k, l] = (1/sqrt(R)) sigma_ik(u(x_l)) window(t - s, x_l, R)."""
    s = u_state.step * grid.dt
    if s >= t:
        raise ConfigError("weight field needs the state time below the horizon")
    grid.validate_radius(R)
    win = _window_row(grid, t - s, R)
    sig = field.sigma(np.ascontiguousarray(u_state.values.T))  # (nx, d, m)
    return np.transpose(sig * win[:, None, None], (1, 2, 0)) / math.sqrt(R)


def _window_table(grid: Grid, t: float, radii: Sequence[float]) -> np.ndarray:
    """Precomputed windows, shape (n_steps, n_radii, nx)."""
    n_t = grid.time_index(t)
    out = np.empty((n_t, len(radii), grid.nx))
    for n in range(n_t):
        tau = t - n * grid.dt
        for r_idx, R in enumerate(radii):
            out[n, r_idx] = _window_row(grid, tau, R)
    return out


@dataclass(frozen=True)
class PairingSample:
    """One replica's pairing matrix P_ij ~ <v_i(t), DF_j(t)>."""

    replica_id: int
    p: np.ndarray  # (d, d)


@dataclass(frozen=True)
class PairingRun:
    """Batched pairing output: matrices and coupled average samples."""

    radii: tuple
    t: float
    p: np.ndarray  # (M, n_radii, d, d)
    f: np.ndarray  # (M, n_radii, d)


def run_pairings(field: DiffusionField, grid: Grid, t: float,
                 radii: Sequence[float], seed: int, replicas: Sequence[int],
                 ) -> PairingRun:
    """Co-evolve primal and weight-aggregated tangent fields for a batch of
    replicas, returning pairing matrices and the coupled F^R(t) samples.

    Deterministic per replica: identical (seed, replica_id) give identical
    rows regardless of batch composition.
    """
    if not field.differentiable:
        raise ConfigError("the pairing needs a differentiable coefficient family")
    radii = tuple(float(R) for R in radii)
    for R in radii:
        grid.validate_radius(R)
    n_t = grid.time_index(t)
    if n_t < 1:
        raise ConfigError("pairing horizon must be at least one step")

    d, m, nx = field.d, field.m, grid.nx
    n_r = len(radii)
    dt, dx = grid.dt, grid.dx
    lam = DIFFUSIVITY * dt / (dx * dx)
    scale = math.sqrt(dt / dx)
    root_cell = math.sqrt(dt * dx)
    inv_root_r = 1.0 / np.sqrt(np.asarray(radii))
    win = _window_table(grid, t, radii)
    avg_w = np.stack([average_weights(grid, R) for R in radii])

    B = len(replicas)
    y = np.zeros((B, n_r, d, nx, d))
    p_diag = np.zeros((B, n_r, d, d))
    p_stoch = np.zeros((B, n_r, d, d))
    f = None
    for n, u, xi in noise_steps(field, grid, seed, replicas, last_step=n_t):
        if xi is None:
            f = (np.einsum("rl,bli->bri", avg_w, u)
                 - 2.0 * np.asarray(radii)[None, :, None]) * inv_root_r[None, :, None]
            break
        sig = field.sigma(u)                        # (B, nx, d, m)
        jac = field.jacobian(u)                     # (B, nx, d, m, d)
        wfac = win[n] * inv_root_r[:, None]         # (n_r, nx)
        vw = sig[:, None] * wfac[None, :, :, None, None]   # (B, n_r, nx, d, m)
        p_diag += (dt * dx) * np.einsum("brlik,brljk->brij", vw, vw)
        jy = np.einsum("blpqk,brilk->brilpq", jac, y)      # (B, n_r, d, nx, d, m)
        p_stoch += root_cell * np.einsum("briljq,blq,rl->brij", jy, xi, wfac)
        src = dt * np.einsum("brlik,blpk->brilp", vw, sig)
        y = (y + lam * _laplacian(y, 0.0)
             + scale * np.einsum("brilpq,blq->brilp", jy, xi) + src)
    p = p_diag + p_stoch
    if not np.isfinite(p).all():
        raise ConfigError("pairing produced non-finite values")
    return PairingRun(radii=radii, t=t, p=p, f=f)


def pairing_tangent(field: DiffusionField, grid: Grid, t: float, R: float,
                    seed: int, replica_id: int) -> PairingSample:
    """Pairing matrix of one replica via the forward tangent-with-source pass."""
    run = run_pairings(field, grid, t, [R], seed, [replica_id])
    return PairingSample(replica_id=replica_id, p=run.p[0, 0])


def pairing_bruteforce(field: DiffusionField, grid: Grid, t: float, R: float,
                       seed: int, replica_id: int) -> PairingSample:
    """Pairing matrix by summing per-source-point derivative contributions.

    Every noise cell (n, l, channel) seeds its own tangent field, propagated
    with the same linearized scheme under the same noise, and its pairing
    contributions are accumulated source by source.  Algebraically identical
    to ``pairing_tangent``; kept as an oracle at tiny scale.
    """
    if grid.nt > BRUTE_MAX_NT or grid.nx > BRUTE_MAX_NX:
        raise ConfigError(
            f"brute-force pairing is restricted to nt <= {BRUTE_MAX_NT}, "
            f"nx <= {BRUTE_MAX_NX}")
    if not field.differentiable:
        raise ConfigError("the pairing needs a differentiable coefficient family")
    grid.validate_radius(R)
    n_t = grid.time_index(t)
    d, m, nx = field.d, field.m, grid.nx
    dt, dx = grid.dt, grid.dx
    lam = DIFFUSIVITY * dt / (dx * dx)
    scale = math.sqrt(dt / dx)
    root_cell = math.sqrt(dt * dx)
    inv_root_r = 1.0 / math.sqrt(R)

    stream = NoiseStream(seed, replica_id, m, nx)
    xi_all = np.ascontiguousarray(stream.normals(n_t).transpose(0, 2, 1))  # (n_t, nx, m)
    u = np.ones((1, nx, d))
    sigs, jacs = [], []
    for n in range(n_t):
        sigs.append(field.sigma(u)[0])
        jacs.append(field.jacobian(u)[0])
        u = _advance(u, xi_all[n][None], field, lam, scale)

    win = _window_table(grid, t, [R])[:, 0, :]  # (n_t, nx)
    vw = np.stack(sigs) * win[:, :, None, None] * inv_root_r  # (n_t, nx, d, m)

    p = np.einsum("nlik,nljk->ij", vw, vw) * (dt * dx)
    for n0 in range(n_t):
        for l0 in range(nx):
            for k0 in range(m):
                z = np.zeros((1, nx, d))
                z[0, l0, :] = sigs[n0][l0, :, k0] / dx
                acc = np.zeros(d)
                for n in range(n0 + 1, n_t):
                    jz = np.einsum("ljqk,lk->ljq", jacs[n], z[0])
                    acc += root_cell * inv_root_r * np.einsum(
                        "ljq,lq,l->j", jz, xi_all[n], win[n])
                    z = _advance_tangent(z, xi_all[n][None], jacs[n][None],
                                         lam, scale, None)
                p += (dt * dx) * np.outer(vw[n0, l0, :, k0], acc)
    return PairingSample(replica_id=replica_id, p=p)


@dataclass(frozen=True)
class SteinEstimate:
    """Sample variances of the pairing matrix and the resulting bound."""

    varhat: np.ndarray     # (d, d) sample variances of P_ij
    varhat_se: np.ndarray  # (d, d)
    bound: float
    cr: SymMatrix

    def __post_init__(self):
        if np.any(self.varhat < 0.0) or self.bound < 0.0:
            raise ValueError("variances and the bound must be nonnegative")


def stein_bound(pairings, CR) -> SteinEstimate:
    """Stein-method Wasserstein bound from pairing samples:

    sqrt(d) ||CR^-1||op ||CR||op^(1/2) sqrt(sum_ij Var(P_ij)).

    Raises ``SingularMatrixError`` when CR is numerically singular, which
    signals a failing non-degeneracy condition or an unresolvably small R.
    """
    if isinstance(pairings, (list, tuple)):
        arr = np.stack([s.p if isinstance(s, PairingSample) else np.asarray(s)
                        for s in pairings])
    else:
        arr = np.asarray(pairings, dtype=float)
    if arr.ndim != 3 or arr.shape[0] < 2:
        raise ConfigError("need at least 2 pairing samples (M, d, d)")
    sym = _as_sym(CR)
    inv_norm = _inv_op_norm(sym, "C^R")
    n = arr.shape[0]
    varhat = arr.var(axis=0, ddof=1)
    centered2 = (arr - arr.mean(axis=0)) ** 2
    m4 = centered2.mean(axis=0)
    varhat_se = np.sqrt(np.maximum(np.mean(centered2**2, axis=0) - m4**2, 0.0) / n)
    bound = (math.sqrt(sym.d) * inv_norm * math.sqrt(op_norm(sym))
             * math.sqrt(float(np.sum(varhat))))
    return SteinEstimate(varhat=varhat, varhat_se=varhat_se, bound=bound, cr=sym)
