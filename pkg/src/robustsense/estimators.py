"""Scatter-matrix estimation: the sample covariance matrix and robust
M-estimators computed by a weighted fixed-point iteration.

An M-estimate solves

    Sigma = (1/n) * sum_i u(x_i^H Sigma^{-1} x_i) x_i x_i^H

for a scalar weight function ``u``.  The iteration replaces the right-hand
side's argument with the previous iterate and stops once consecutive iterates
satisfy ``||I - Sigma_prev^{-1} Sigma_next|| < epsilon``.  The engine operates
on stacks of sample matrices; each stack member follows exactly the
trajectory it would follow alone, so batched and one-at-a-time results agree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .sampling import gg_scale

logger = logging.getLogger(__name__)

KINDS = ("scm", "tyler", "student_t", "gg_ml")

_COND_LIMIT = 1e14
_HERMITIAN_RTOL = 1e-12


class EstimationError(RuntimeError):
    """Raised when the fixed-point iteration hits a singular iterate."""


def is_hermitian(a: np.ndarray, rtol: float = _HERMITIAN_RTOL) -> bool:
    """Relative Frobenius test ||A - A^H|| / ||A|| <= rtol (zero matrix passes)."""
    a = np.asarray(a)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return True
    return np.linalg.norm(a - a.conj().T) <= rtol * scale


@dataclass(frozen=True)
class WeightFunction:
    """Scalar weight u(d) applied to squared Mahalanobis distances.

    Kinds
    -----
    scm        u(d) = 1                      (sample covariance matrix)
    tyler      u(d) = p / d                  (distribution-free scatter)
    student_t  u(d) = (2p + nu) / (nu + 2d)  (complex multivariate-t ML)
    gg_ml      u(d) = (s/b) d^(s-1)          (generalized Gaussian ML)

    ``nu = 0`` degenerates student_t to the Tyler weight.  The gg_ml scale
    ``b`` is derived from (p, s) so that the weight matches the density
    generator exp(-d^s / b) with unit-mean-per-dimension radius.
    """

    kind: str
    p: int
    nu: float | None = None
    shape_s: float | None = None
    scale_b: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}; expected one of {KINDS}")
        if self.p < 1:
            raise ValueError("dimension p must be at least 1")
        if self.kind == "student_t" and (self.nu is None or self.nu < 0):
            raise ValueError("student_t weight requires nu >= 0")
        if self.kind == "gg_ml" and (self.shape_s is None or self.shape_s <= 0):
            raise ValueError("gg_ml weight requires shape_s > 0")

    @classmethod
    def scm(cls, p: int) -> "WeightFunction":
        return cls("scm", p)

    @classmethod
    def tyler(cls, p: int) -> "WeightFunction":
        return cls("tyler", p)

    @classmethod
    def student_t(cls, p: int, nu: float) -> "WeightFunction":
        return cls("student_t", p, nu=float(nu))

    @classmethod
    def gg_ml(cls, p: int, shape_s: float) -> "WeightFunction":
        return cls("gg_ml", p, shape_s=float(shape_s), scale_b=gg_scale(p, shape_s))

    def __call__(self, d):
        d = np.asarray(d, dtype=np.float64)
        if self.kind == "scm":
            return np.ones_like(d)
        if self.kind == "tyler":
            return self.p / d
        if self.kind == "student_t":
            return (2.0 * self.p + self.nu) / (self.nu + 2.0 * d)
        return (self.shape_s / self.scale_b) * d ** (self.shape_s - 1.0)


@dataclass(frozen=True)
class FixedPointOptions:
    """Knobs of the fixed-point iteration.

    ``alpha`` is the trace target used to remove the Tyler scale ambiguity
    (``None`` means trace = p).  ``initial`` must be Hermitian positive
    definite; ``None`` means the identity.
    """

    epsilon: float = 1e-6
    max_iterations: int = 200
    norm: str = "fro"
    alpha: float | None = None
    initial: np.ndarray | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.norm not in ("fro", "spectral"):
            raise ValueError("norm must be 'fro' or 'spectral'")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    estimate: np.ndarray
    iterations: int
    final_residual: float
    converged: bool


@dataclass(frozen=True, eq=False)
class BatchFixedPointResult:
    """Per-member results over a stack of sample matrices.

    ``ok`` is False where the iteration hit a singular or indefinite iterate
    (those estimates are placeholders and must be discarded); ``converged``
    is False where the residual never dropped below epsilon.
    """

    estimates: np.ndarray  # (B, p, p)
    iterations: np.ndarray  # (B,)
    residuals: np.ndarray  # (B,)
    converged: np.ndarray  # (B,) bool
    ok: np.ndarray  # (B,) bool


def scm(x: np.ndarray) -> np.ndarray:
    """Sample covariance matrix (1/n) X X^H, symmetrized against rounding."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2:
        raise ValueError("X must be a p x n matrix")
    n = x.shape[1]
    if n < 1:
        raise ValueError("need at least one snapshot column")
    s = (x @ x.conj().T) / n
    return 0.5 * (s + s.conj().T)


def _check_initial(initial: np.ndarray | None, p: int) -> np.ndarray:
    if initial is None:
        return np.eye(p, dtype=np.complex128)
    initial = np.asarray(initial, dtype=np.complex128)
    if initial.shape != (p, p):
        raise ValueError(f"initial iterate must be {p} x {p}")
    if not is_hermitian(initial):
        raise ValueError("initial iterate must be Hermitian")
    if np.linalg.eigvalsh(initial)[0] <= 0:
        raise ValueError("initial iterate must be positive definite")
    return initial


def _residual_norm(r: np.ndarray, norm: str) -> np.ndarray:
    if norm == "fro":
        return np.linalg.norm(r, axis=(1, 2))
    return np.linalg.svd(r, compute_uv=False)[:, 0]


def m_estimate_batch(
    x: np.ndarray,
    weight: WeightFunction,
    opts: FixedPointOptions | None = None,
) -> BatchFixedPointResult:
    """Run the fixed-point iteration on a (B, p, n) stack of sample matrices.

    Tyler iterates are renormalized to trace alpha after every step.  A
    member is frozen the first time its residual drops below epsilon; the
    remaining members keep iterating.  Members whose iterate leaves the
    positive-definite cone (condition number above 1e14, non-positive or
    non-finite eigenvalues) are flagged ``ok = False``.
    """
    if opts is None:
        opts = FixedPointOptions()
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 3:
        raise ValueError("expected a (B, p, n) stack of sample matrices")
    n_batch, p, n = x.shape
    if weight.p != p:
        raise ValueError(f"weight function is for p={weight.p}, data has p={p}")
    alpha = float(p) if opts.alpha is None else float(opts.alpha)
    xh = np.ascontiguousarray(x.conj().transpose(0, 2, 1))

    iterations = np.zeros(n_batch, dtype=np.int64)
    residuals = np.full(n_batch, np.inf)
    converged = np.zeros(n_batch, dtype=bool)
    ok = np.ones(n_batch, dtype=bool)

    if weight.kind == "scm":
        # u == 1 makes the iteration map constant; one application is exact.
        estimates = np.matmul(x, xh) / n
        estimates = 0.5 * (estimates + estimates.conj().transpose(0, 2, 1))
        iterations[:] = 1
        residuals[:] = 0.0
        converged[:] = True
        return BatchFixedPointResult(estimates, iterations, residuals, converged, ok)

    if n <= p:
        raise ValueError(f"robust estimation requires n > p (got n={n}, p={p})")
    col_norms = np.linalg.norm(x, axis=1)
    bad_cols = np.any(col_norms == 0.0, axis=1)
    ok[bad_cols] = False

    initial = _check_initial(opts.initial, p)
    estimates = np.broadcast_to(initial, (n_batch, p, p)).astype(np.complex128)
    eye = np.eye(p, dtype=np.complex128)

    active = np.flatnonzero(~bad_cols)
    sigma = estimates[active]
    xa = x[active]
    xha = xh[active]

    for m in range(1, opts.max_iterations + 1):
        if active.size == 0:
            break
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            # rare: an iterate left the PD cone; identify and drop those members
            evals = np.linalg.eigvalsh(sigma)
            hard = (evals[:, 0] <= 0) | (evals[:, -1] > _COND_LIMIT * evals[:, 0])
            ok[active[hard]] = False
            keep = ~hard
            active, sigma, xa, xha = active[keep], sigma[keep], xa[keep], xha[keep]
            if active.size == 0:
                break
            chol = np.linalg.cholesky(sigma)
        chol_inv = np.linalg.inv(chol)
        v = chol_inv @ xa
        d = np.sum(np.abs(v) ** 2, axis=1)  # x^H Sigma^{-1} x per column
        w = weight(d) / n
        nxt = np.matmul(xa * w[:, None, :], xha)
        nxt = 0.5 * (nxt + nxt.conj().transpose(0, 2, 1))
        if weight.kind == "tyler":
            trace = np.einsum("kii->k", nxt).real
            nxt = nxt * (alpha / trace)[:, None, None]

        # cheap in-loop guards; the full eigenvalue vetting happens on exit
        diag = np.einsum("kii->ki", nxt).real
        bad = ~np.isfinite(nxt).all(axis=(1, 2)) | (diag.min(axis=1) <= 0)
        nxt[bad] = eye  # placeholder, flagged not-ok below

        resid = _residual_norm(eye - chol_inv.conj().transpose(0, 2, 1) @ (chol_inv @ nxt), opts.norm)
        done = ~bad & (resid < opts.epsilon)

        estimates[active] = nxt
        iterations[active] = m
        residuals[active] = resid
        ok[active[bad]] = False
        converged[active[done]] = True

        keep = ~(done | bad)
        if not keep.any():
            break
        active = active[keep]
        sigma = nxt[keep]
        xa = xa[keep]
        xha = xha[keep]

    surviving = np.flatnonzero(ok)
    if surviving.size:
        evals = np.linalg.eigvalsh(estimates[surviving])
        sound = (
            np.isfinite(evals).all(axis=1)
            & (evals[:, 0] > 0)
            & (evals[:, -1] <= _COND_LIMIT * evals[:, 0])
        )
        ok[surviving[~sound]] = False

    return BatchFixedPointResult(estimates, iterations, residuals, converged, ok)


def m_estimate(
    x: np.ndarray,
    weight: WeightFunction,
    opts: FixedPointOptions | None = None,
) -> FixedPointResult:
    """Compute one M-estimate of scatter from a p x n sample matrix.

    Parameters
    ----------
    x : ndarray of shape (p, n)
        Snapshot columns; every column must be nonzero.
    weight : WeightFunction
        Weight defining the estimator.  The scm kind returns the sample
        covariance directly (the iteration map is constant); the robust
        kinds additionally require n > p.
    opts : FixedPointOptions, optional
        Iteration controls; defaults to epsilon=1e-6, at most 200 steps,
        Frobenius stopping norm, identity start.

    Returns
    -------
    FixedPointResult
        Estimate (Hermitian positive definite), number of iterations, last
        stopping-rule residual and a convergence flag.

    Raises
    ------
    EstimationError
        If an iterate becomes numerically singular.
    ValueError
        On dimension or precondition violations.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 2:
        raise ValueError("X must be a p x n matrix")
    if np.any(np.linalg.norm(x, axis=0) == 0.0):
        raise ValueError("every snapshot column must be nonzero")
    res = m_estimate_batch(x[None], weight, opts)
    if not res.ok[0]:
        raise EstimationError(
            f"{weight.kind} iteration hit a singular iterate "
            f"(condition number above {_COND_LIMIT:g})"
        )
    logger.debug(
        "%s estimate: %d iterations, residual %.3e, converged=%s",
        weight.kind, res.iterations[0], res.residuals[0], res.converged[0],
    )
    return FixedPointResult(
        estimate=res.estimates[0],
        iterations=int(res.iterations[0]),
        final_residual=float(res.residuals[0]),
        converged=bool(res.converged[0]),
    )


def tyler_estimate(x: np.ndarray, opts: FixedPointOptions | None = None) -> FixedPointResult:
    """Tyler's M-estimate with the trace pinned to alpha (default p).

    Scale-free: rescaling X, globally or per column, leaves the estimate
    unchanged.  Requires n > p and nonzero columns.
    """
    x = np.asarray(x, dtype=np.complex128)
    return m_estimate(x, WeightFunction.tyler(x.shape[0]), opts)


def fixed_point_residual(
    sigma_hat: np.ndarray,
    x: np.ndarray,
    weight: WeightFunction,
) -> float:
    """Relative Frobenius gap between sigma_hat and the estimator map applied to it.

    For the Tyler weight the right-hand side is rescaled to the trace of
    ``sigma_hat`` before differencing, matching the trace-normalized
    iteration.
    """
    sigma_hat = np.asarray(sigma_hat, dtype=np.complex128)
    if not is_hermitian(sigma_hat):
        raise ValueError("sigma_hat must be Hermitian")
    if np.linalg.eigvalsh(sigma_hat)[0] <= 0:
        raise ValueError("sigma_hat must be positive definite")
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[1]
    chol_inv = np.linalg.inv(np.linalg.cholesky(sigma_hat))
    v = chol_inv @ x
    d = np.sum(v.real**2 + v.imag**2, axis=0)
    w = weight(d) / n
    rhs = (x * w[None, :]) @ x.conj().T
    rhs = 0.5 * (rhs + rhs.conj().T)
    if weight.kind == "tyler":
        rhs = rhs * (np.trace(sigma_hat).real / np.trace(rhs).real)
    return float(np.linalg.norm(sigma_hat - rhs) / np.linalg.norm(sigma_hat))
