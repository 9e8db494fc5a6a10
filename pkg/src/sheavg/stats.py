"""Matrix analysis, Gaussian distances, normality tests and rate diagnostics.

All matrix routines target the tiny dense symmetric matrices produced by the
covariance pipeline (d <= 8).  The eigensolver is a cyclic Jacobi iteration so
results are reproducible bit-for-bit independently of the installed BLAS.

Fixed numerical constants (documented, not tunables):

* ``SYM_TOL = 1e-12``  -- symmetry rejection threshold.
* ``JACOBI_TOL = 1e-13`` -- off-diagonal Frobenius target, relative to ||A||.
* ``PSD_CLAMP = -1e-10`` -- eigenvalues in [PSD_CLAMP, 0) are clamped to 0;
  anything below is rejected as non-PSD.
* ``MIN_INVERTIBLE = 1e-12`` -- smallest eigenvalue accepted when an inverse
  operator norm is required.
* ``W1_GRID = 2048`` points between the 0.0005 and 0.9995 Gaussian quantiles
  for the one-dimensional CDF-distance integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import NumericalError, SingularMatrixError
from .rng import DIRECTION_STREAM, GAUSSIAN_SAMPLE_STREAM, philox_generator

SYM_TOL = 1e-12
JACOBI_TOL = 1e-13
PSD_CLAMP = -1e-10
MIN_INVERTIBLE = 1e-12
W1_GRID = 2048
W1_TAIL = 5e-4


def sym_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with eigenvalues ascending and orthonormal
    eigenvectors in the columns of ``vectors``.  Sweeps stop once the
    off-diagonal Frobenius norm falls below ``JACOBI_TOL * ||a||_F``.

    Raises ``ValueError`` for non-symmetric input.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and float(np.max(np.abs(a - a.T))) > SYM_TOL * scale:
        raise ValueError("matrix is not symmetric to 1e-12")

    n = a.shape[0]
    w = 0.5 * (a + a.T)
    v = np.eye(n)
    norm = float(np.linalg.norm(w))
    if n == 1 or norm == 0.0:
        order = np.argsort(np.diag(w))
        return np.diag(w)[order].copy(), v[:, order].copy()

    target = JACOBI_TOL * norm
    converged = False
    for _ in range(100):
        off = float(np.linalg.norm(w - np.diag(np.diag(w))))
        if off <= target:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if abs(apq) <= 0.25 * target / max(1, n):
                    continue
                theta = 0.5 * (w[p, p] - w[q, q]) / apq
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                w[[p, q], :] = rot @ w[[p, q], :]
                w[:, [p, q]] = w[:, [p, q]] @ rot.T
                v[:, [p, q]] = v[:, [p, q]] @ rot.T
        # re-symmetrize accumulated rounding
        w = 0.5 * (w + w.T)
    if not converged:  # pragma: no cover - cyclic Jacobi converges quadratically
        raise NumericalError("jacobi eigensolver failed to converge")
    vals = np.diag(w).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], v[:, order]


class SymMatrix:
    """A symmetric matrix with a cached Jacobi eigendecomposition."""

    __slots__ = ("a", "_vals", "_vecs")

    def __init__(self, a) -> None:
        arr = np.asarray(a, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        scale = max(1.0, float(np.max(np.abs(arr)))) if arr.size else 1.0
        if arr.size and float(np.max(np.abs(arr - arr.T))) > SYM_TOL * scale:
            raise ValueError("matrix is not symmetric to 1e-12")
        self.a = 0.5 * (arr + arr.T)
        self._vals = None
        self._vecs = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.a, dtype=dtype)

    @property
    def d(self) -> int:
        return self.a.shape[0]

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        if self._vals is None:
            self._vals, self._vecs = sym_eig(self.a)
        return self._vals, self._vecs

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig()[0]

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])


def _as_sym(a) -> SymMatrix:
    return a if isinstance(a, SymMatrix) else SymMatrix(a)


def op_norm(a) -> float:
    """Operator norm of a symmetric matrix: the largest |eigenvalue|."""
    vals = _as_sym(a).eigenvalues
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def hs_norm(a) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.sqrt(np.sum(np.square(np.asarray(a, dtype=float)))))


def _psd_sqrt(sym: SymMatrix, name: str = "matrix") -> np.ndarray:
    vals, vecs = sym.eig()
    if vals.size and float(vals[0]) < PSD_CLAMP:
        raise ValueError(f"{name} is not positive semidefinite (min eig {vals[0]:.3e})")
    clipped = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(clipped)) @ vecs.T


def gaussian_sample(C, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` rows from N(0, C) via the eigendecomposition square root."""
    sym = _as_sym(C)
    root = _psd_sqrt(sym, "covariance")
    gen = philox_generator(seed, GAUSSIAN_SAMPLE_STREAM)
    z = gen.standard_normal((n, sym.d))
    return z @ root.T


def gaussian_w2(C1, C2) -> float:
    """Bures (2-Wasserstein) distance between N(0, C1) and N(0, C2)."""
    s1, s2 = _as_sym(C1), _as_sym(C2)
    root1 = _psd_sqrt(s1, "C1")
    inner = SymMatrix(root1 @ np.asarray(s2.a) @ root1)
    vals = np.clip(inner.eigenvalues, 0.0, None)
    cross = float(np.sum(np.sqrt(vals)))
    sq = float(np.trace(s1.a) + np.trace(s2.a)) - 2.0 * cross
    return float(np.sqrt(max(sq, 0.0)))


def w1_empirical(x: np.ndarray, y: np.ndarray) -> float:
    """1-d W1 between two equal-size empirical laws by quantile coupling."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("quantile coupling needs equal sample sizes")
    return float(np.mean(np.abs(x - y)))


def w1_to_gaussian(x: np.ndarray, std: float) -> float:
    """1-d W1 between the empirical law of ``x`` and N(0, std^2).

    Integrates |empirical CDF - Gaussian CDF| over ``W1_GRID`` points between
    the ``W1_TAIL`` and ``1 - W1_TAIL`` Gaussian quantiles.
    """
    x = np.sort(np.asarray(x, dtype=float))
    if std <= 0.0:
        return float(np.mean(np.abs(x)))
    zmax = float(special.ndtri(1.0 - W1_TAIL)) * std
    grid = np.linspace(-zmax, zmax, W1_GRID)
    femp = np.searchsorted(x, grid, side="right") / x.size
    fref = special.ndtr(grid / std)
    return float(np.trapezoid(np.abs(femp - fref), grid))


@dataclass(frozen=True)
class SlicedW1:
    mean: float
    max: float
    values: np.ndarray  # per-direction distances, for paired comparisons


def sliced_w1(samples: np.ndarray, C, nproj: int, seed: int) -> SlicedW1:
    """Sliced 1-Wasserstein lower bound against N(0, C).

    Draws ``nproj`` uniform unit directions from the seeded direction stream;
    for each direction the 1-d distance between the projected empirical law
    and the projected Gaussian is computed by CDF integration.  Each value
    lower-bounds the multivariate Wasserstein distance.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError("samples must be an (M, d) array")
    sym = _as_sym(C)
    if sym.min_eigenvalue < PSD_CLAMP:
        raise ValueError("reference covariance is not PSD")
    gen = philox_generator(seed, DIRECTION_STREAM)
    dirs = gen.standard_normal((nproj, x.shape[1]))
    norms = np.linalg.norm(dirs, axis=1)
    norms[norms == 0.0] = 1.0
    dirs /= norms[:, None]
    vals = np.empty(nproj)
    for k in range(nproj):
        theta = dirs[k]
        var = float(theta @ sym.a @ theta)
        vals[k] = w1_to_gaussian(x @ theta, np.sqrt(max(var, 0.0)))
    return SlicedW1(mean=float(vals.mean()), max=float(vals.max()), values=vals)


@dataclass(frozen=True)
class MardiaResult:
    skewness_stat: float   # Mardia's b_{1,d}
    kurtosis_stat: float   # Mardia's b_{2,d} (approx d(d+2) under normality)
    skew_pvalue: float
    kurt_pvalue: float


def mardia(samples: np.ndarray) -> MardiaResult:
    """Mardia's multivariate skewness/kurtosis tests after whitening.

    The skewness statistic M*b1/6 is referred to chi-square with
    d(d+1)(d+2)/6 degrees of freedom; the kurtosis statistic is standardized
    by its asymptotic variance 8 d(d+2)/M and referred to a two-sided normal.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[0] < 4:
        raise ValueError("need an (M, d) sample with M >= 4")
    n, d = x.shape
    xc = x - x.mean(axis=0)
    cov = (xc.T @ xc) / n
    vals, vecs = sym_eig(cov)
    if float(vals[0]) <= MIN_INVERTIBLE * max(1.0, float(vals[-1])):
        raise SingularMatrixError("sample covariance is numerically singular")
    white = (vecs / np.sqrt(vals)) @ vecs.T
    y = xc @ white

    b1 = 0.0
    chunk = max(1, (1 << 22) // max(1, n))
    for lo in range(0, n, chunk):
        g = y[lo : lo + chunk] @ y.T
        b1 += float(np.sum(g * g * g))
    b1 /= n * n
    q = np.sum(y * y, axis=1)
    b2 = float(np.mean(q * q))

    dof = d * (d + 1) * (d + 2) / 6.0
    skew_stat = n * b1 / 6.0
    skew_p = float(special.gammaincc(dof / 2.0, max(skew_stat, 0.0) / 2.0))
    z = (b2 - d * (d + 2)) / np.sqrt(8.0 * d * (d + 2) / n)
    kurt_p = float(2.0 * special.ndtr(-abs(z)))
    return MardiaResult(b1, b2, skew_p, kurt_p)


def _inv_op_norm(sym: SymMatrix, name: str) -> float:
    vals = sym.eigenvalues
    if float(vals[0]) <= MIN_INVERTIBLE:
        raise SingularMatrixError(
            f"{name} is numerically singular (min eigenvalue {vals[0]:.3e} <= 1e-12): "
            "the non-degeneracy condition may fail or R is below the resolvable scale"
        )
    return 1.0 / float(vals[0])


def gaussian_gap_bound(CR, C) -> float:
    """Wasserstein bound between N(0, CR) and N(0, C).

    Returns ``Q * ||CR - C||_HS`` with
    ``Q = sqrt(d) * min(||CR^-1||op ||CR||op^(1/2), ||C^-1||op ||C||op^(1/2))``.
    Both matrices must be invertible (min eigenvalue > 1e-12).
    """
    sr, sc = _as_sym(CR), _as_sym(C)
    if sr.d != sc.d:
        raise ValueError("matrices must have matching dimension")
    qr = _inv_op_norm(sr, "C^R") * np.sqrt(op_norm(sr))
    qc = _inv_op_norm(sc, "C") * np.sqrt(op_norm(sc))
    q = np.sqrt(sr.d) * min(qr, qc)
    return float(q * hs_norm(sr.a - sc.a))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float


def rate_fit(points) -> RateFit:
    """Least-squares fit of log(value) against log(R).

    ``points`` is a sequence of (R, value) with value > 0; needs >= 3 points.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 (R, value) points")
    if np.any(pts <= 0.0):
        raise ValueError("rate_fit needs positive R and values")
    lx = np.log(pts[:, 0])
    ly = np.log(pts[:, 1])
    lxc = lx - lx.mean()
    sxx = float(np.sum(lxc * lxc))
    if sxx == 0.0:
        raise ValueError("all R values coincide")
    slope = float(np.sum(lxc * ly) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    sst = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if sst == 0.0 else 1.0 - float(np.sum(resid * resid)) / sst
    return RateFit(slope, intercept, r2)


@dataclass(frozen=True)
class IncrementMoment:
    moment: float   # max over components of E|G_i(t) - G_i(s)|^p
    ratio: float    # moment / (R^(p/2) (t-s)^(p/2))


def increment_moment(g_s: np.ndarray, g_t: np.ndarray, s: float, t: float,
                     p: float, R: float) -> IncrementMoment:
    """Empirical p-th moment of the unnormalized-average increment."""
    gs = np.atleast_2d(np.asarray(g_s, dtype=float))
    gt = np.atleast_2d(np.asarray(g_t, dtype=float))
    if gs.shape != gt.shape:
        raise ValueError("samples at s and t must align")
    mom = float(np.max(np.mean(np.abs(gt - gs) ** p, axis=0)))
    if t == s:
        return IncrementMoment(mom, 0.0)
    return IncrementMoment(mom, mom / (R ** (p / 2.0) * abs(t - s) ** (p / 2.0)))


def increment_orthogonality(f_s: np.ndarray, f_t: np.ndarray):
    """Correlations of the increment F(t) - F(s) against F(s), with SEs.

    Returns ``(corr, se)``, both (d, d): ``corr[i, j]`` correlates component i
    of the increment with component j of F(s).  A zero-variance column (e.g.
    s = 0 where F vanishes) yields zero correlation by convention.
    """
    fs = np.atleast_2d(np.asarray(f_s, dtype=float))
    ft = np.atleast_2d(np.asarray(f_t, dtype=float))
    if fs.shape != ft.shape:
        raise ValueError("samples at s and t must align")
    n = fs.shape[0]
    inc = ft - fs
    inc_c = inc - inc.mean(axis=0)
    fs_c = fs - fs.mean(axis=0)
    si = np.sqrt(np.mean(inc_c**2, axis=0))
    sf = np.sqrt(np.mean(fs_c**2, axis=0))
    denom = np.outer(si, sf)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (inc_c.T @ fs_c) / (n * denom)
    corr = np.where(denom > 0.0, corr, 0.0)
    se = (1.0 - corr**2) / np.sqrt(max(n - 3, 1))
    return corr, se


def min_eigen_check(CR) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return _as_sym(CR).min_eigenvalue


@dataclass(frozen=True)
class SampleMatrix:
    """Replica-by-component sample block with its provenance metadata."""

    data: np.ndarray  # (M, d)
    t: float
    R: float
    seed: int

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise ValueError("need an (M, d) array with M >= 2")
        if not np.isfinite(arr).all():
            raise ValueError("sample rows must be finite")
        object.__setattr__(self, "data", arr)
