"""Deterministic reference values anchoring the verification pipeline.

Two exactly-solvable regimes back the acceptance tests: the constant
coefficient case, where the averaged field is exactly Gaussian and all
covariances are quadratures of a constant eta, and the linear case
sigma(u) = lambda * u (d = m = 1), whose point second moment solves the
weakly singular Volterra equation

    f(t) = 1 + lambda^2 int_0^t f(r) (4 pi (t - r))^(-1/2) dr.

The Volterra solver uses product integration: f is piecewise linear and each
subinterval is integrated exactly against the singular kernel, so the
endpoint singularity costs no accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .observables import EtaCurve, limit_covariance, prelimit_covariance
from .stats import SymMatrix

MAX_VOLTERRA_STEPS = 1 << 20


@dataclass(frozen=True)
class VolterraSolution:
    """Tabulated solution of the second-moment Volterra equation."""

    coupling: float
    times: np.ndarray
    values: np.ndarray
    error_estimate: float
    steps: int

    def interp(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))

    def eta_curve(self) -> EtaCurve:
        """The curve lambda^2 f(r) as a (d = m = 1) eta input."""
        lam2 = self.coupling * self.coupling
        vals = (lam2 * self.values)[:, None, None, None]
        return EtaCurve(times=self.times, values=vals, se=np.zeros_like(vals),
                        provenance="volterra-pam")


def _volterra_level(lam: float, horizon: float, steps: int) -> np.ndarray:
    """Solve on a uniform grid with exact weights for the (t-r)^(-1/2) kernel.

    The sqrt(t) cusp of the solution at t = 0 would cap product integration
    at first order, so the first Picard iterate f0(t) = 1 + lam^2 sqrt(t/pi)
    is split off analytically.  The smooth remainder g = f - f0 solves

        g(t) = lam^4 t / 4 + lam^2 int_0^t g(r) (4 pi (t-r))^(-1/2) dr

    (the forcing uses int_0^t sqrt(r) (t-r)^(-1/2) dr = pi t / 2 exactly).
    """
    h = horizon / steps
    gaps = np.arange(steps + 1, dtype=float) * h
    roots = np.sqrt(gaps)
    cubes = gaps * roots
    # Per-subinterval moments against tau^(-1/2), tau = t_a - r in [g, g + h]:
    i0 = 2.0 * (roots[1:] - roots[:-1])
    i1 = (2.0 / 3.0) * (cubes[1:] - cubes[:-1])
    # g linear on the subinterval: weights for the older and newer node.
    w_left = (i1 - gaps[:-1] * i0) / h
    w_right = (gaps[1:] * i0 - i1) / h
    c = lam * lam / math.sqrt(4.0 * math.pi)
    implicit = c * w_right[0]
    if implicit >= 1.0:
        raise NumericalError("volterra step too coarse for this coupling")

    lam2 = lam * lam
    times = gaps
    g = np.empty(steps + 1)
    g[0] = 0.0
    wl_rev = w_left[::-1]
    wr_rev = w_right[::-1]
    for a in range(1, steps + 1):
        wl = wl_rev[steps - a :]           # w_left[a-1-j] for j = 0..a-1
        wr = wr_rev[steps - a :]
        known = float(wl @ g[:a]) + float(wr[:-1] @ g[1:a])
        g[a] = (lam2 * lam2 * times[a] / 4.0 + c * known) / (1.0 - implicit)
    return 1.0 + lam2 * np.sqrt(times / math.pi) + g


def pam_second_moment(coupling: float, horizon: float, steps: int = 64,
                      tol: float = 1e-8) -> VolterraSolution:
    """Second moment E[u(t, 0)^2] for sigma(u) = coupling * u, d = m = 1.

    Halves the step until the change at the coarse nodes drops below ``tol``;
    raises if that needs more than 2^20 steps.
    """
    if horizon <= 0.0:
        raise ConfigError("horizon must be positive")
    if steps < 16:
        raise ConfigError("need at least 16 initial steps")
    f = _volterra_level(coupling, horizon, steps)
    while True:
        fine = _volterra_level(coupling, horizon, 2 * steps)
        change = float(np.max(np.abs(fine[::2] - f)))
        f, steps = fine, 2 * steps
        if change < tol:
            break
        if 2 * steps > MAX_VOLTERRA_STEPS:
            raise NumericalError(
                f"volterra refinement did not reach tol {tol} within "
                f"{MAX_VOLTERRA_STEPS} steps (last change {change:.3e})")
    times = np.linspace(0.0, horizon, steps + 1)
    return VolterraSolution(coupling=coupling, times=times, values=f,
                            error_estimate=change, steps=steps)


def additive_point_variance(t: float) -> float:
    """Var u(t, x) for sigma = 1, d = m = 1: int_0^t (4 pi (t-r))^(-1/2) dr."""
    if t < 0.0:
        raise ConfigError("time must be nonnegative")
    return math.sqrt(t / math.pi)


@dataclass(frozen=True)
class ConstantSigmaLaw:
    C: SymMatrix
    CR: SymMatrix
    exact_gaussian: bool


def constant_sigma_law(S, t: float, R: float, eta_nodes: int = 2001) -> ConstantSigmaLaw:
    """Exact law of the averaged field for constant sigma = S.

    C = 2 t S S^T, and C^R comes from the same windowed quadrature the
    observables pipeline uses (shared code path, so oracle and pipeline
    cannot drift apart).  The law of F^R(t) is exactly Gaussian at every R.
    """
    if t <= 0.0:
        raise ConfigError("time must be positive")
    eta = EtaCurve.constant(S, np.linspace(0.0, t, eta_nodes))
    c = limit_covariance(eta, t)
    cr = prelimit_covariance(eta, t, R)
    return ConstantSigmaLaw(C=SymMatrix(c), CR=SymMatrix(cr), exact_gaussian=True)
