"""Coefficient structure of the SPDE system and heat-kernel primitives.

A diffusion field is the map ``sigma: R^d -> R^(d x m)`` multiplying the m
independent space-time white noises, together with its exact Jacobian when the
family is differentiable.  Families are declarative (constant / affine /
bounded-smooth) so configurations stay serializable and Jacobians exact.

Vectorization convention: ``sigma(u)`` accepts states of shape ``(..., d)``
and returns ``(..., d, m)``; ``jacobian(u)`` returns ``(..., d, m, d)`` with
``jac[..., i, j, k]`` the derivative of ``sigma_ij`` in the k-th component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special

from .errors import ConfigError
from .stats import sym_eig

# Numerical rank threshold for the non-degeneracy check, relative to the
# largest singular value.
RANK_RTOL = 1e-10

FAMILY_TAGS = ("constant", "affine", "bounded-smooth")


@dataclass(frozen=True)
class DiffusionField:
    """The coefficient map of the system together with its Jacobian."""

    d: int
    m: int
    sigma: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_hint: float = 0.0

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ConfigError("field dimensions d, m must be positive")
        if self.lipschitz_hint < 0.0:
            raise ConfigError("lipschitz_hint must be nonnegative")

    @property
    def differentiable(self) -> bool:
        return self.jacobian is not None


@dataclass(frozen=True)
class SigmaFamily:
    """Declarative description of a built-in coefficient family.

    ``constant``       sigma_ij(u) = S_ij                    params: values
    ``affine``         sigma_ij(u) = a_ij + sum_k b_ijk u_k  params: offsets, slopes
    ``bounded-smooth`` sigma_ij(u) = a_ij + c_ij sin(sum_k w_ijk u_k)
                                                             params: offsets, amplitudes, weights
    """

    tag: str
    params: dict

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise ConfigError(f"unknown sigma family {self.tag!r}")
        object.__setattr__(self, "params",
                           {k: np.asarray(v, dtype=float) for k, v in self.params.items()})
        d, m = self.shape
        expect = {
            "constant": {"values": (d, m)},
            "affine": {"offsets": (d, m), "slopes": (d, m, d)},
            "bounded-smooth": {"offsets": (d, m), "amplitudes": (d, m),
                               "weights": (d, m, d)},
        }[self.tag]
        if set(self.params) != set(expect):
            raise ConfigError(
                f"family {self.tag!r} needs parameters {sorted(expect)}, "
                f"got {sorted(self.params)}")
        for name, shape in expect.items():
            if self.params[name].shape != shape:
                raise ConfigError(
                    f"parameter {name!r} must have shape {shape}, "
                    f"got {self.params[name].shape}")
            if not np.isfinite(self.params[name]).all():
                raise ConfigError(f"parameter {name!r} has non-finite entries")

    @property
    def shape(self) -> tuple[int, int]:
        lead = self.params["values" if self.tag == "constant" else "offsets"]
        if lead.ndim != 2:
            raise ConfigError("leading family parameter must be a d x m matrix")
        return lead.shape

    @classmethod
    def constant(cls, values) -> "SigmaFamily":
        return cls("constant", {"values": values})

    @classmethod
    def affine(cls, offsets, slopes) -> "SigmaFamily":
        return cls("affine", {"offsets": offsets, "slopes": slopes})

    @classmethod
    def bounded_smooth(cls, offsets, amplitudes, weights) -> "SigmaFamily":
        return cls("bounded-smooth", {"offsets": offsets,
                                      "amplitudes": amplitudes,
                                      "weights": weights})

    def to_dict(self) -> dict:
        out = {"family": self.tag, "d": self.shape[0], "m": self.shape[1]}
        out.update({k: v.tolist() for k, v in self.params.items()})
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SigmaFamily":
        data = dict(data)
        tag = data.pop("family", None)
        if tag not in FAMILY_TAGS:
            raise ConfigError(f"model.family must be one of {FAMILY_TAGS}, got {tag!r}")
        d, m = data.pop("d", None), data.pop("m", None)
        fam = cls(tag, data)
        if d is not None and m is not None and fam.shape != (int(d), int(m)):
            raise ConfigError(
                f"declared (d, m) = ({d}, {m}) inconsistent with parameter shape {fam.shape}")
        return fam

    def build(self) -> DiffusionField:
        d, m = self.shape
        if self.tag == "constant":
            s = self.params["values"]
            zero_jac = np.zeros((d, m, d))

            def sigma(u, _s=s):
                u = np.asarray(u, dtype=float)
                return np.broadcast_to(_s, u.shape[:-1] + (d, m)).copy()

            def jacobian(u, _j=zero_jac):
                u = np.asarray(u, dtype=float)
                return np.broadcast_to(_j, u.shape[:-1] + (d, m, d)).copy()

            return DiffusionField(d, m, sigma, jacobian, lipschitz_hint=0.0)

        if self.tag == "affine":
            a, b = self.params["offsets"], self.params["slopes"]

            def sigma(u, _a=a, _b=b):
                u = np.asarray(u, dtype=float)
                return _a + np.einsum("ijk,...k->...ij", _b, u)

            def jacobian(u, _b=b):
                u = np.asarray(u, dtype=float)
                return np.broadcast_to(_b, u.shape[:-1] + _b.shape).copy()

            hint = float(np.sqrt(np.sum(b * b)))
            return DiffusionField(d, m, sigma, jacobian, lipschitz_hint=hint)

        a, c, w = (self.params["offsets"], self.params["amplitudes"],
                   self.params["weights"])

        def sigma(u, _a=a, _c=c, _w=w):
            u = np.asarray(u, dtype=float)
            phase = np.einsum("ijk,...k->...ij", _w, u)
            return _a + _c * np.sin(phase)

        def jacobian(u, _c=c, _w=w):
            u = np.asarray(u, dtype=float)
            phase = np.einsum("ijk,...k->...ij", _w, u)
            return (_c * np.cos(phase))[..., None] * _w

        hint = float(np.sqrt(np.sum(c * c * np.sum(w * w, axis=-1))))
        return DiffusionField(d, m, sigma, jacobian, lipschitz_hint=hint)


@dataclass(frozen=True)
class H1Result:
    holds: bool
    rank: int
    singular_values: np.ndarray


def check_h1(field: DiffusionField) -> H1Result:
    """Non-degeneracy check: do the columns of sigma at the all-ones state
    span R^d?

    The numerical rank counts singular values above ``RANK_RTOL`` times the
    largest one, computed from the symmetric eigendecomposition of
    sigma sigma^T.
    """
    s1 = np.asarray(field.sigma(np.ones(field.d)), dtype=float)
    if s1.shape != (field.d, field.m):
        raise ConfigError(
            f"sigma(1) returned shape {s1.shape}, expected {(field.d, field.m)}")
    if not np.isfinite(s1).all():
        raise ConfigError("sigma(1) has non-finite entries")
    gram = s1 @ s1.T
    vals, _ = sym_eig(gram)
    sv = np.sqrt(np.clip(vals[::-1], 0.0, None))
    top = float(sv[0]) if sv.size else 0.0
    rank = 0 if top == 0.0 else int(np.sum(sv > RANK_RTOL * top))
    return H1Result(holds=(rank == field.d), rank=rank, singular_values=sv)


def heat_kernel(t: float, x) -> np.ndarray | float:
    """Gaussian heat kernel ``(2 pi t)^(-1/2) exp(-x^2 / (2t))`` for t > 0."""
    if t <= 0.0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    x = np.asarray(x, dtype=float)
    out = np.exp(-x * x / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)
    return float(out) if out.ndim == 0 else out


def kernel_window(tau: float, y, R: float) -> np.ndarray | float:
    """Mass of the heat kernel over the averaging window:
    ``int_{-R}^{R} p_tau(x - y) dx``, evaluated in closed form via erf.

    Always in [0, 1]; monotone increasing in R with limit 1.
    """
    if tau <= 0.0:
        raise ValueError(f"kernel_window needs tau > 0, got {tau}")
    if R <= 0.0:
        raise ValueError(f"kernel_window needs R > 0, got {R}")
    y = np.asarray(y, dtype=float)
    root = np.sqrt(2.0 * tau)
    out = 0.5 * (special.erf((R - y) / root) + special.erf((R + y) / root))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out
