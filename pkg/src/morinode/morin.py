"""Singularity functionals of the periodic ODE operator and their zero tests.

The linearization at u has a unique real eigenvalue, the mean of D2f along
u, with a strictly positive eigenfunction w given in closed form by the
sawtooth-kernel integral. Five scalar functionals built from w and nested
running integrals vanish exactly on the strata of critical points of
increasing order; together with a finite-dimensional surjectivity check
they decide the order of a singular point (fold, cusp, swallowtail,
butterfly).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import fibre as _fibre
from .core import (Nonlinearity, PeriodicFn, PreconditionError,
                   integral_weighted_t, integral_weighted_t2,
                   spectral_antiderivative)

SIGMA_COUNT = 5

ZERO_TOL_FACTOR = 1e-8   # relative zero test on the Sigma values
RANK_TOL_FACTOR = 1e-6   # relative smallest-singular-value threshold
FD_DIRECTION_STEP = 1e-6


@dataclass(frozen=True)
class EigenPair:
    """Positive eigenfunction and the unique real eigenvalue of DF(u)."""

    w: PeriodicFn
    lam: float

    def residual(self, f: Nonlinearity, u: PeriodicFn) -> float:
        """Sup-norm of w' + D2f(t,u) w - lam w."""
        r = (self.w.derivative().values
             + f.on_grid(u, 1) * self.w.values - self.lam * self.w.values)
        return float(np.max(np.abs(r)))


@dataclass(frozen=True)
class MorinOrder:
    """Outcome of the pointwise classification."""

    kind: str                 # "regular" | "morin" | "degenerate" | "exceeds"
    k: int | None = None
    reason: str | None = None

    def __str__(self):
        if self.kind == "morin":
            names = {1: "fold", 2: "cusp", 3: "swallowtail", 4: "butterfly"}
            return f"Morin({self.k}, {names.get(self.k, '?')})"
        return self.kind


@dataclass(frozen=True)
class SigmaReport:
    """Sigma_1..Sigma_5, the a/b/c variants, and (optionally) the order."""

    sigma: np.ndarray                 # shape (5,)
    sigma_abc: tuple[float, float, float]
    jacobian_svals: np.ndarray | None = None
    order: MorinOrder | None = None
    tol_zero: float | None = None
    tol_rank: float | None = None


def eigen_w(f: Nonlinearity, u: PeriodicFn) -> EigenPair:
    """Eigenpair of the linearization along u, kernel-formula normalization.

    w(t) = exp(-K(t)) where K is the zero-mean periodic antiderivative of
    D2f(t,u) - mean(D2f(t,u)); the eigenvalue is that mean.
    """
    g = f.on_grid(u, 1)
    lam = float(np.mean(g))
    w_vals = np.exp(-spectral_antiderivative(g))
    return EigenPair(PeriodicFn(u.grid, w_vals), lam)


def _sigma_values(f: Nonlinearity, u: PeriodicFn) -> tuple[np.ndarray, float]:
    """Sigma_1..Sigma_5 plus Sigma_b, without the W-field solve."""
    g = f.on_grid(u, 1)
    s1 = float(np.mean(g))
    w = np.exp(-spectral_antiderivative(g))
    d3 = f.on_grid(u, 3)
    d4 = f.on_grid(u, 4)
    d5 = f.on_grid(u, 5)

    q = f.on_grid(u, 2) * w
    qbar = float(np.mean(q))                  # = Sigma_2
    aq = spectral_antiderivative(q)
    P = aq - aq[0]                            # C(t) = qbar*t + P(t)

    psi3 = d3 * w ** 2
    psi4 = d4 * w ** 3
    psi5 = d5 * w ** 4

    s3 = float(np.mean(psi3))
    s4 = (float(np.mean(psi4))
          - 2.0 * (float(np.mean(psi3 * P)) + qbar * integral_weighted_t(psi3)))
    s5 = (float(np.mean(psi5))
          - 5.0 * (float(np.mean(psi4 * P)) + qbar * integral_weighted_t(psi4))
          + 5.0 * (float(np.mean(psi3 * P ** 2))
                   + 2.0 * qbar * integral_weighted_t(psi3 * P)
                   + qbar ** 2 * integral_weighted_t2(psi3)))
    sigma_b = float(np.mean(g * w))
    return np.array([s1, qbar, s3, s4, s5]), sigma_b


def sigma_vec(f: Nonlinearity, u: PeriodicFn) -> SigmaReport:
    """Evaluate Sigma_1..Sigma_5 and (Sigma_a, Sigma_b, Sigma_c) at u.

    The nested running integral C(t) = int_0^t D2^2f w splits into a linear
    part (its mean times t) and a periodic part; products against t and t^2
    are integrated by exact spectral formulas so the whole evaluation is
    spectrally accurate.
    """
    sigma, sigma_b = _sigma_values(f, u)
    sigma_c = _fibre.solve_w(f, u, 1.0).alpha
    return SigmaReport(sigma=sigma, sigma_abc=(float(sigma[0]), sigma_b, sigma_c))


def sigma_hat(f: Nonlinearity, u: PeriodicFn, k: int) -> np.ndarray:
    """Means of the first k x-derivatives of an autonomous f along u.

    These are the simplified functionals: their simultaneous vanishing cuts
    out the strata of the operator u -> u' + int f(u).
    """
    if not f.autonomous:
        raise PreconditionError("sigma_hat requires an autonomous nonlinearity")
    if not 1 <= k <= SIGMA_COUNT:
        raise PreconditionError("k must be in 1..5")
    return np.array([float(np.mean(f.on_grid(u, i))) for i in range(1, k + 1)])


def _exact_dsigma1_row(f: Nonlinearity, u: PeriodicFn,
                       directions: np.ndarray) -> np.ndarray:
    """D Sigma_1(u) . v = int D2^2f(t,u) v dt, exact on each direction."""
    d2 = f.on_grid(u, 2)
    return directions @ d2 / u.grid.n


def _fourier_directions(grid, M: int) -> np.ndarray:
    t = grid.nodes
    dirs = [np.ones_like(t)]
    for j in range(1, M + 1):
        dirs.append(np.cos(2 * np.pi * j * t))
        dirs.append(np.sin(2 * np.pi * j * t))
    return np.asarray(dirs)


def classify_point(f: Nonlinearity, u: PeriodicFn, basis_size: int = 8) -> SigmaReport:
    """Decide the singularity order of u with the transversality check.

    The order is the largest k <= 4 with |Sigma_i| below the relative zero
    tolerance for i <= k, Sigma_(k+1) above it, and the Jacobian of
    (Sigma_1..Sigma_(k-1)) restricted to ``2*basis_size + 1`` Fourier
    directions of full rank (smallest singular value above the relative
    rank tolerance). Only Sigma_1 has an exact derivative row; higher rows
    use central differences.
    """
    report = sigma_vec(f, u)
    s = report.sigma
    tol_zero = ZERO_TOL_FACTOR * (1.0 + float(np.max(np.abs(s))))
    zeros = np.abs(s) <= tol_zero

    if not zeros[0]:
        order = MorinOrder("regular")
        return replace(report, order=order, tol_zero=tol_zero)

    k = 1
    while k < SIGMA_COUNT and zeros[k]:
        k += 1
    if k >= SIGMA_COUNT:
        order = MorinOrder("exceeds", reason="all five functionals vanish")
        return replace(report, order=order, tol_zero=tol_zero)
    if basis_size < k + 2:
        raise PreconditionError(f"basis_size must be at least k+2 = {k + 2}")

    svals = None
    tol_rank = None
    if k >= 2:
        dirs = _fourier_directions(u.grid, basis_size)
        rows = [_exact_dsigma1_row(f, u, dirs)]
        for i in range(2, k):
            rows.append(_fd_sigma_row(f, u, i, dirs))
        jac = np.asarray(rows)
        svals = np.linalg.svd(jac, compute_uv=False)
        tol_rank = RANK_TOL_FACTOR * svals[0]
        if svals[-1] <= tol_rank:
            order = MorinOrder("degenerate",
                               reason=f"rank test failed at k={k}: "
                                      f"smin={svals[-1]:.3e} <= {tol_rank:.3e}")
            return replace(report, order=order, jacobian_svals=svals,
                           tol_zero=tol_zero, tol_rank=tol_rank)
    order = MorinOrder("morin", k=k)
    return replace(report, order=order, jacobian_svals=svals,
                   tol_zero=tol_zero, tol_rank=tol_rank)


def _fd_sigma_row(f: Nonlinearity, u: PeriodicFn, i: int,
                  directions: np.ndarray) -> np.ndarray:
    """Central-difference row of D Sigma_i(u) on the given directions."""
    eps = FD_DIRECTION_STEP
    row = np.zeros(len(directions))
    for j, d in enumerate(directions):
        up = PeriodicFn(u.grid, u.values + eps * d)
        um = PeriodicFn(u.grid, u.values - eps * d)
        sp = _sigma_values(f, up)[0][i - 1]
        sm = _sigma_values(f, um)[0][i - 1]
        row[j] = (sp - sm) / (2 * eps)
    return row
