"""Shared fixtures: the heavyweight seeded Monte Carlo runs backing the
acceptance suite.  Session-scoped so the full suite pays for each run once."""

import math

import numpy as np
import pytest

from sheavg import config as config_mod
from sheavg import experiments
from sheavg.observables import average_weights
from sheavg.solver import Grid, noise_steps

ACCEPT_SEED = 20260809

# Nonlinear scalar model for the Malliavin/duality experiments.
D1_SMOOTH = {"family": "bounded-smooth", "offsets": [[1.0]],
             "amplitudes": [[0.5]], "weights": [[[1.0]]]}

# Nonlinear two-component model with full rank at the flat state.  The phase
# of every sine is centered at pi/2 on the flat state (weights of each entry
# sum to pi/2), so the coefficient responds quadratically to fluctuations:
# odd cumulants of the averages stay small while the even-cumulant deviation
# from normality is strong at small radii and decays fast (~1/R), which keeps
# the normality test comfortable at R = 32 yet leaves a clearly decreasing
# distance signal across the radius grid.
_HP = math.pi / 2
D2_SMOOTH = {"family": "bounded-smooth",
             "offsets": [[1.2, 0.4], [0.3, 1.3]],
             "amplitudes": [[1.0, 0.5], [0.6, 0.9]],
             "weights": [[[2.4, _HP - 2.4], [1.0, _HP - 1.0]],
                         [[-0.8, _HP + 0.8], [0.9, _HP - 0.9]]]}

# Duplicated rows: the non-degeneracy condition fails by construction.
D2_DEGENERATE = {"family": "constant", "values": [[1.0, 1.0], [1.0, 1.0]]}


def collect_point_and_averages(cfg, replicas, node_x=0.0):
    """Batched collection of F samples plus the solution value at one node."""
    field, grid = cfg.field, cfg.grid
    radii = np.asarray(cfg.radii)
    weights = np.stack([average_weights(grid, R) for R in cfg.radii])
    inv_root = 1.0 / np.sqrt(radii)
    node = int(np.argmin(np.abs(grid.xs - node_x)))
    wanted = {grid.time_index(t): k for k, t in enumerate(grid.output_times)}
    f = np.empty((replicas, len(wanted), len(cfg.radii), field.d))
    point = np.empty((replicas, len(wanted), field.d))
    for lo, hi in experiments._chunk_ranges(0, replicas):
        for n, u, xi in noise_steps(field, grid, cfg.seed, range(lo, hi)):
            pos = wanted.get(n)
            if pos is not None:
                f[lo:hi, pos] = (np.einsum("rl,bli->bri", weights, u)
                                 - 2.0 * radii[None, :, None]) * inv_root[None, :, None]
                point[lo:hi, pos] = u[:, node, :]
            if xi is None:
                break
    return f, point


@pytest.fixture(scope="session")
def const_run():
    """Constant sigma = 1, d = m = 1: M = 5000 samples of F^R(1) at R = 5 and
    of u(1, 0).  Backs criteria 1 and 3."""
    raw = {
        "model": {"family": "constant", "values": [[1.0]]},
        "grid": {"final_time": 1.0, "output_times": [1.0]},
        "experiment": {"kind": "covariance", "seed": ACCEPT_SEED,
                       "replicas": 5000, "radii": [5.0], "time": 1.0},
    }
    cfg = config_mod.build(raw)
    f, point = collect_point_and_averages(cfg, cfg.replicas)
    return {"cfg": cfg, "f": f[:, 0, 0, :], "u0": point[:, 0, 0]}


@pytest.fixture(scope="session")
def calibration_run():
    """The sigma = 1 point moment at refined resolution (dx/2, dt/4)."""
    raw = {
        "model": {"family": "constant", "values": [[1.0]]},
        "grid": {"final_time": 1.0, "dt": 0.25e-3, "dx": 0.025,
                 "output_times": [1.0]},
        "experiment": {"kind": "covariance", "seed": ACCEPT_SEED + 5,
                       "replicas": 1500, "radii": [0.5], "time": 1.0},
    }
    cfg = config_mod.build(raw)
    _, point = collect_point_and_averages(cfg, cfg.replicas)
    return {"cfg": cfg, "u0": point[:, 0, 0]}


@pytest.fixture(scope="session")
def pam_run():
    """Linear sigma(u) = u, d = m = 1: point samples at t = 0.25, 0.5, 1.0."""
    raw = {
        "model": {"family": "affine", "offsets": [[0.0]], "slopes": [[[1.0]]]},
        "grid": {"final_time": 1.0, "output_times": [0.25, 0.5, 1.0]},
        "experiment": {"kind": "covariance", "seed": ACCEPT_SEED + 1,
                       "replicas": 4000, "radii": [0.5], "time": 1.0},
    }
    cfg = config_mod.build(raw)
    _, point = collect_point_and_averages(cfg, cfg.replicas)
    return {"cfg": cfg, "u0": point[:, :, 0], "times": (0.25, 0.5, 1.0)}


@pytest.fixture(scope="session")
def stein_run():
    """Nonlinear scalar model at T = t = 0.5: pairing matrices and coupled
    averages for R in {2, 4, 8, 16}, M = 2000.  Backs criteria 5 and 7."""
    raw = {
        "model": D1_SMOOTH,
        "grid": {"final_time": 0.5, "output_times": [0.5]},
        "experiment": {"kind": "malliavin", "seed": ACCEPT_SEED,
                       "replicas": 2000, "radii": [2.0, 4.0, 8.0, 16.0],
                       "time": 0.5, "eta": {"replicas": 800}},
    }
    cfg = config_mod.build(raw)
    parts = [experiments._collect_pairings(cfg.raw, a, b)
             for a, b in experiments._chunk_ranges(0, cfg.replicas)]
    p = np.concatenate([a for a, _ in parts], axis=0)
    f = np.concatenate([b for _, b in parts], axis=0)
    eta = experiments.resolve_eta(cfg)
    return {"cfg": cfg, "p": p, "f": f, "eta": eta}


@pytest.fixture(scope="session")
def d2_run():
    """Nonlinear full-rank d = m = 2 model on [0, 1]: F samples at the four
    output times and R in {4, 16, 32}, M = 2000, plus its eta estimate.
    Backs criteria 8, 9 and 10."""
    raw = {
        "model": D2_SMOOTH,
        "grid": {"final_time": 1.0, "output_times": [0.25, 0.5, 0.75, 1.0]},
        "experiment": {"kind": "fclt", "seed": ACCEPT_SEED,
                       "replicas": 2000, "radii": [4.0, 16.0, 32.0],
                       "time": 1.0, "eta": {"replicas": 800}},
    }
    cfg = config_mod.build(raw)
    parts = [experiments._collect_averages(cfg.raw, a, b)
             for a, b in experiments._chunk_ranges(0, cfg.replicas)]
    f = np.concatenate(parts, axis=0)
    eta = experiments.resolve_eta(cfg)
    return {"cfg": cfg, "f": f, "eta": eta,
            "times": (0.25, 0.5, 0.75, 1.0), "radii": (4.0, 16.0, 32.0)}
