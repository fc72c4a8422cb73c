"""The three reconstruction layers and the kernel-MMSE machinery.

Layer summary:

* BRL fills the patch with the mean of its usable context.
* IDL is kernel regression with the scalar bandwidth ``sigma2 * N_y``:
  raw weight r_j = exp(-||y_j - y0||^2 / (2 sigma2 N_y)), estimate
  sum(w_j x_j) with w_j = r_j / nu, nu = sum(r_j).
* HQL scales the sample covariance blocks: weights use bandwidth
  beta * C_YY, the estimate adds the correction
  alpha * C_XY C_YY^-1 (y0 - y0_pred). beta comes from a fixed log2 grid
  search on the context prediction error; alpha from a closed-form least
  squares fit over the (N_y + 1) candidates nearest to y0, using
  leave-one-out predictions.

All weight computations shift exponents by their maximum before
exponentiation, so weights stay finite for arbitrarily large distances.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import EmptyContextError, InsufficientCandidatesError, WeightUnderflowError
from .framework import CandidateSet, TargetContext

DEFAULT_SIGMA2 = 10.0
BETA_GRID = 2.0 ** np.arange(-8, 13)
RIDGE_SCALE = 1e-6
ALPHA_MIN = 0.0
ALPHA_MAX = 4.0
_ALPHA_DENOM_FLOOR = 1e-12


class Layer(str, enum.Enum):
    BRL = "BRL"
    IDL = "IDL"
    HQL = "HQL"


@dataclass
class KernelWeights:
    w: np.ndarray  # normalized, sums to 1
    raw_sum: float  # nu: sum of unnormalized weights (may underflow to 0)


@dataclass
class CovarianceBlocks:
    """Sample covariance of stacked (x, y) candidates, C_YY ridge-regularized."""

    c_xx: np.ndarray  # (4, 4)
    c_xy: np.ndarray  # (4, N_y)
    c_yy: np.ndarray  # (N_y, N_y), includes the ridge
    ridge: float
    _cho: tuple | None = field(default=None, repr=False)

    def _factor(self):
        if self._cho is None:
            self._cho = scipy.linalg.cho_factor(self.c_yy, lower=True)
        return self._cho

    def solve_yy(self, rhs: np.ndarray) -> np.ndarray:
        """C_YY^-1 @ rhs via cached Cholesky."""
        return scipy.linalg.cho_solve(self._factor(), rhs)


@dataclass
class BandwidthParams:
    beta: float | None
    alpha: float | None
    sigma2: float | None


@dataclass
class EstimateDiagnostics:
    phi: float | None = None
    nu: float | None = None
    m_candidates: int | None = None
    rings_used: int | None = None
    bandwidth: BandwidthParams | None = None
    elapsed_s: float | None = None
    fallback: bool = False


@dataclass
class PatchEstimate:
    values: np.ndarray  # (4,), row-major patch cells
    layer: Layer
    diagnostics: EstimateDiagnostics


def brl_estimate(target: TargetContext) -> PatchEstimate:
    """Fill all four patch cells with the context mean."""
    if target.n_y < 1:
        raise EmptyContextError("BRL needs at least one context sample")
    mean = float(target.y0.mean())
    values = np.full(4, mean)
    return PatchEstimate(values, Layer.BRL, EstimateDiagnostics(m_candidates=0))


def raw_idl_weights(y0: np.ndarray, y: np.ndarray, sigma2: float) -> np.ndarray:
    """Unnormalized exponential weights with scalar bandwidth sigma2 * N_y."""
    n_y = y0.shape[0]
    d2 = ((y - y0[None, :]) ** 2).sum(axis=1)
    return np.exp(-d2 / (2.0 * sigma2 * n_y))


def idl_weights(target: TargetContext, cset: CandidateSet, sigma2: float = DEFAULT_SIGMA2) -> KernelWeights:
    if cset.m_current < 1:
        raise InsufficientCandidatesError("IDL needs at least one candidate")
    d2 = ((cset.y - target.y0[None, :]) ** 2).sum(axis=1)
    expo = -d2 / (2.0 * sigma2 * target.n_y)
    raw_sum = float(np.exp(expo).sum())
    shifted = np.exp(expo - expo.max())
    return KernelWeights(shifted / shifted.sum(), raw_sum)


def idl_estimate(target: TargetContext, cset: CandidateSet, sigma2: float = DEFAULT_SIGMA2) -> PatchEstimate:
    kw = idl_weights(target, cset, sigma2)
    if kw.raw_sum == 0.0:
        raise WeightUnderflowError("all IDL weights underflowed (nu = 0)")
    values = kw.w @ cset.x
    diag = EstimateDiagnostics(
        nu=kw.raw_sum,
        m_candidates=cset.m_current,
        bandwidth=BandwidthParams(beta=None, alpha=None, sigma2=sigma2),
    )
    return PatchEstimate(values, Layer.IDL, diag)


def sample_covariance(cset: CandidateSet) -> CovarianceBlocks:
    """Unbiased covariance blocks of the stacked candidates (divisor M'-1)."""
    m = cset.m_current
    if m < 2:
        raise InsufficientCandidatesError(f"insufficient candidates for covariance (M'={m})")
    z = np.hstack([cset.x, cset.y])
    centred = z - z.mean(axis=0)
    c = (centred.T @ centred) / (m - 1)
    n_x = cset.x.shape[1]
    c_xx = c[:n_x, :n_x]
    c_xy = c[:n_x, n_x:]
    c_yy = c[n_x:, n_x:]
    n_y = c_yy.shape[0]
    trace = float(np.trace(c_yy))
    ridge = RIDGE_SCALE * trace / n_y if trace > 0.0 else RIDGE_SCALE
    c_yy = c_yy + ridge * np.eye(n_y)
    return CovarianceBlocks(c_xx, c_xy, c_yy, ridge)


def _context_quadforms(cov: CovarianceBlocks, y: np.ndarray, y0: np.ndarray) -> np.ndarray:
    """d_j = (y0 - y_j)^T C_YY^-1 (y0 - y_j) for every candidate."""
    diff = y0[None, :] - y
    sol = cov.solve_yy(diff.T)
    return np.einsum("jn,nj->j", diff, sol)


def _weights_from_quadforms(d: np.ndarray, beta: float) -> np.ndarray:
    expo = -d / (2.0 * beta)
    shifted = np.exp(expo - expo.max())
    return shifted / shifted.sum()


def kernel_weights(
    target: TargetContext, cset: CandidateSet, beta: float, cov: CovarianceBlocks
) -> KernelWeights:
    """Gaussian kernel weights with bandwidth beta * C_YY (log-domain shift)."""
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if cset.m_current < 1:
        raise InsufficientCandidatesError("kernel weights need at least one candidate")
    d = _context_quadforms(cov, cset.y, target.y0)
    expo = -d / (2.0 * beta)
    shift = expo.max()
    shifted = np.exp(expo - shift)
    total = shifted.sum()
    raw_sum = float(np.exp(shift) * total)
    return KernelWeights(shifted / total, raw_sum)


def predict_xy(target: TargetContext, cset: CandidateSet, weights: KernelWeights):
    """Weighted prototype/context predictions (x0_pred, y0_pred)."""
    return weights.w @ cset.x, weights.w @ cset.y


def optimize_beta(target: TargetContext, cset: CandidateSet, cov: CovarianceBlocks) -> float:
    """Grid argmin of the context prediction error; ties go to the smaller beta."""
    if cset.m_current < 2:
        raise InsufficientCandidatesError("beta optimization needs at least two candidates")
    d = _context_quadforms(cov, cset.y, target.y0)
    return _beta_search(d, cset.y, target.y0)


def _beta_search(d: np.ndarray, y: np.ndarray, y0: np.ndarray) -> float:
    best_beta = BETA_GRID[0]
    best_eps = np.inf
    for beta in BETA_GRID:
        w = _weights_from_quadforms(d, beta)
        eps = float(((y0 - w @ y) ** 2).sum())
        if eps < best_eps:
            best_eps = eps
            best_beta = beta
    return float(best_beta)


def optimize_alpha(
    target: TargetContext, cset: CandidateSet, beta: float, cov: CovarianceBlocks
) -> float:
    """Closed-form least-squares scale of the correction direction.

    Uses the min(N_y + 1, M') candidates nearest to y0; each gets a
    leave-one-out prediction at the given beta. The fit is clamped to
    [0, 4] and collapses to 0 when the correction directions vanish.
    """
    m = cset.m_current
    if m < 2:
        return 0.0
    k = min(target.n_y + 1, m)
    dist2 = ((cset.y - target.y0[None, :]) ** 2).sum(axis=1)
    nearest = np.argsort(dist2, kind="stable")[:k]

    # pairwise quadratic forms (y_i - y_j)^T C_YY^-1 (y_i - y_j) via the
    # Gram identity q_ij = g_i + g_j - 2 y_i^T C_YY^-1 y_j
    sol = cov.solve_yy(cset.y.T)  # (N_y, M)
    g = np.einsum("jn,nj->j", cset.y, sol)
    q = g[nearest][:, None] + g[None, :] - 2.0 * (cset.y[nearest] @ sol)

    expo = -q / (2.0 * beta)
    expo[np.arange(k), nearest] = -np.inf  # leave one out
    expo -= expo.max(axis=1, keepdims=True)
    w = np.exp(expo)
    w /= w.sum(axis=1, keepdims=True)

    x_pred = w @ cset.x  # (k, 4)
    y_pred = w @ cset.y  # (k, N_y)
    corr = cov.solve_yy((cset.y[nearest] - y_pred).T)  # (N_y, k)
    c = cov.c_xy @ corr  # (4, k) correction direction per neighbour
    den = float((c * c).sum())
    if den < _ALPHA_DENOM_FLOOR:
        return 0.0
    num = float(((cset.x[nearest] - x_pred).T * c).sum())
    return float(np.clip(num / den, ALPHA_MIN, ALPHA_MAX))


def hql_estimate(
    target: TargetContext, cset: CandidateSet, sigma2: float = DEFAULT_SIGMA2
) -> PatchEstimate:
    """Full covariance-scaled pipeline, degrading to IDL then BRL when starved.

    The degradation ladder (M' < 2 -> IDL, M' = 0 or nu = 0 -> BRL) keeps
    every patch concealable; fallbacks are flagged in the diagnostics.
    """
    m = cset.m_current
    if m >= 2:
        try:
            cov = sample_covariance(cset)
            d = _context_quadforms(cov, cset.y, target.y0)
            beta = _beta_search(d, cset.y, target.y0)
            w = _weights_from_quadforms(d, beta)
            x_pred = w @ cset.x
            y_pred = w @ cset.y
            alpha = optimize_alpha(target, cset, beta, cov)
            values = x_pred + alpha * (cov.c_xy @ cov.solve_yy(target.y0 - y_pred))
            if not np.all(np.isfinite(values)):
                raise FloatingPointError("non-finite HQL estimate")
            diag = EstimateDiagnostics(
                m_candidates=m,
                bandwidth=BandwidthParams(beta=beta, alpha=alpha, sigma2=None),
            )
            return PatchEstimate(values, Layer.HQL, diag)
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError, FloatingPointError):
            pass  # fall through to the IDL ladder
    if m >= 1:
        try:
            est = idl_estimate(target, cset, sigma2)
            est.diagnostics.fallback = True
            return est
        except WeightUnderflowError:
            pass
    est = brl_estimate(target)
    est.diagnostics.fallback = True
    est.diagnostics.m_candidates = m
    return est
