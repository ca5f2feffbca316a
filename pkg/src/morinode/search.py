"""Singularity search and periodic-solution counting.

A search problem pairs a nonlinearity family with free scalar parameters,
a Fourier ansatz with a free/frozen coefficient mask, and a target for the
leading singularity functionals. Gauss-Newton iterations use the
minimum-norm pseudoinverse step (truncated SVD), reporting the smallest
retained singular value as the surjectivity check. The census scans the
return map for fixed points, brackets sign changes, refines by bisection,
and re-verifies the count at half the integration step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (Grid, Nonlinearity, PreconditionError,
                   Term, TrigPoly, FourierAnsatz)
from .morin import _sigma_values
from .odeint import _flow_scalar, _flow_with_variation, _flow_vector

SIGMA_GRID_N = 2048
SCAN_POINTS = 801
ROOT_REFINE_TOL = 1e-12
ROOT_DEDUP_TOL = 1e-9
PINV_TRUNCATION = 1e-10


@dataclass(frozen=True)
class ParamFamily:
    """Nonlinearity family with named free scalar parameters.

    ``entries`` lists (power, coefficient) pairs where a coefficient is a
    float or a (name, scale) reference into the parameter vector.
    """

    entries: tuple
    names: tuple[str, ...]

    def build(self, params: np.ndarray) -> Nonlinearity:
        lookup = dict(zip(self.names, params))
        terms = []
        for power, coeff in self.entries:
            if isinstance(coeff, tuple):
                name, scale = coeff
                value = scale * lookup[name]
            else:
                value = float(coeff)
            if value != 0.0:
                terms.append(Term(power, TrigPoly(a0=value)))
        return Nonlinearity(terms)

    @classmethod
    def fixed(cls, f: Nonlinearity) -> "ParamFamily":
        if not f.autonomous:
            raise PreconditionError("families require autonomous nonlinearities")
        entries = tuple((t.power, t.coeff.a0) for t in f.terms)
        return cls(entries, ())

    @classmethod
    def quartic_bc(cls) -> "ParamFamily":
        """x^4 - b x^2 + c x with free (b, c)."""
        return cls(((4, 1.0), (2, ("b", -1.0)), (1, ("c", 1.0))), ("b", "c"))


@dataclass
class SearchProblem:
    """Free coordinates = family parameters followed by unfrozen ansatz
    coefficients (a0, a1.., b1..); the b1 gauge is frozen automatically for
    autonomous families."""

    family: ParamFamily
    ansatz: FourierAnsatz
    target: np.ndarray
    family_params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    frozen: tuple[str, ...] = ()        # e.g. ("b", "c", "b1")
    max_iterations: int = 100
    residual_tol: float = 1e-10
    fd_step: float = 1e-6
    damping: float = 0.5
    grid_n: int = SIGMA_GRID_N

    def __post_init__(self):
        self.target = np.atleast_1d(np.asarray(self.target, dtype=float))
        self.family_params = np.atleast_1d(np.asarray(self.family_params,
                                                      dtype=float))
        if len(self.target) > 4:
            raise PreconditionError("target dimension must be at most 4")

    # -- coordinate packing -------------------------------------------------

    def _coordinate_names(self) -> list[str]:
        names = list(self.family.names)
        names.append("a0")
        for j in range(1, self.ansatz.harmonics + 1):
            names.append(f"a{j}")
            names.append(f"b{j}")
        return names

    def free_mask(self) -> np.ndarray:
        names = self._coordinate_names()
        frozen = set(self.frozen)
        frozen.add("b1")  # time-translation gauge for autonomous families
        return np.array([nm not in frozen for nm in names])

    def pack(self) -> np.ndarray:
        coeffs = [self.ansatz.a0]
        for j in range(self.ansatz.harmonics):
            coeffs += [self.ansatz.a[j], self.ansatz.b[j]]
        return np.concatenate([self.family_params, coeffs])

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, FourierAnsatz]:
        nf = len(self.family.names)
        fam = x[:nf]
        rest = x[nf:]
        M = self.ansatz.harmonics
        a = rest[1::2][:M]
        b = rest[2::2][:M]
        return fam, FourierAnsatz(float(rest[0]), a.copy(), b.copy())

    def sigma_at(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        """First len(target) functionals and the order-5 monitor."""
        fam, ans = self.unpack(x)
        f = self.family.build(fam)
        u = ans.sample(Grid(self.grid_n))
        sigma, _ = _sigma_values(f, u)
        return sigma[:len(self.target)], float(sigma[4])


@dataclass(frozen=True)
class GaussNewtonResult:
    params: np.ndarray
    names: tuple[str, ...]
    residual_history: list[float]
    jacobian_svals: np.ndarray
    smallest_retained_sval: float
    sigma5: float
    converged: bool
    message: str

    def coefficient(self, name: str) -> float:
        return float(self.params[self.names.index(name)])


def gauss_newton(problem: SearchProblem) -> GaussNewtonResult:
    """Minimum-norm Gauss-Newton on the free coordinates.

    Steps are x <- x - J^+ (sigma(x) - target) with J by central differences
    and J^+ the truncated-SVD pseudoinverse; a halving line search keeps the
    residual from increasing. Stops on the residual tolerance, stagnation
    (relative decrease under 1e-3 over 10 steps), or the iteration cap.
    """
    x = problem.pack()
    mask = problem.free_mask()
    if mask.sum() < len(problem.target):
        raise PreconditionError("fewer free coordinates than target equations")
    names = tuple(problem._coordinate_names())
    history: list[float] = []
    svals = np.zeros(len(problem.target))
    smallest = math.inf
    best_x, best_norm = x.copy(), math.inf
    message = "iteration cap reached"
    converged = False
    for it in range(problem.max_iterations):
        r, s5 = problem.sigma_at(x)
        r = r - problem.target
        rnorm = float(np.linalg.norm(r))
        history.append(rnorm)
        if rnorm < best_norm:
            best_x, best_norm = x.copy(), rnorm
        if rnorm <= problem.residual_tol:
            converged = True
            message = f"residual tolerance reached in {it} iterations"
            break
        if len(history) > 10 and history[-11] > 0 and \
                (history[-11] - rnorm) / history[-11] < 1e-3:
            message = "residual stagnated; best iterate returned"
            break
        J = _jacobian(problem, x, mask)
        U, s, Vt = np.linalg.svd(J, full_matrices=False)
        keep = s > PINV_TRUNCATION * s[0]
        svals = s
        smallest = float(s[keep][-1])
        step_free = Vt[keep].T @ ((U[:, keep].T @ r) / s[keep])
        step = np.zeros_like(x)
        step[mask] = step_free
        # halving line search: never accept a residual increase
        lam = 1.0
        for _ in range(12):
            r_try, _ = problem.sigma_at(x - lam * step)
            if np.linalg.norm(r_try - problem.target) <= rnorm:
                break
            lam *= problem.damping
        x = x - lam * step
    else:
        r, s5 = problem.sigma_at(x)
        rnorm = float(np.linalg.norm(r - problem.target))
        history.append(rnorm)
        if rnorm <= problem.residual_tol:
            converged = True
            message = "residual tolerance reached at the iteration cap"
    if not converged:
        x = best_x
    r, s5 = problem.sigma_at(x)
    return GaussNewtonResult(params=x, names=names, residual_history=history,
                             jacobian_svals=svals,
                             smallest_retained_sval=smallest,
                             sigma5=s5, converged=converged, message=message)


def _jacobian(problem: SearchProblem, x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    eps = problem.fd_step
    cols = []
    for idx in np.nonzero(mask)[0]:
        xp = x.copy()
        xm = x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        sp, _ = problem.sigma_at(xp)
        sm, _ = problem.sigma_at(xm)
        cols.append((sp - sm) / (2 * eps))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# solution census
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CensusRoot:
    x: float
    rho_prime: float
    bracket_width: float


@dataclass(frozen=True)
class SolutionCensus:
    x_lo: float
    x_hi: float
    h: float
    roots: tuple[CensusRoot, ...]
    count: int | None
    degenerate_continuum: bool
    unresolved_brackets: tuple[tuple[float, float], ...]
    count_at_half_step: int | None
    scan_xs: np.ndarray
    scan_g: np.ndarray

    @property
    def stable_under_halving(self) -> bool:
        return self.count is not None and self.count == self.count_at_half_step


def count_solutions(f: Nonlinearity, v, x_lo: float, x_hi: float,
                    scan_n: int = SCAN_POINTS, h: float = 2e-4,
                    check_half_step: bool = True) -> SolutionCensus:
    """Count fixed points of the return map on [x_lo, x_hi].

    The scan evaluates g(x) = rho_v(x) - x at ``scan_n`` points with the
    compensated vector integrator, brackets sign changes between surviving
    neighbours, refines each bracket by bisection to 1e-12, and deduplicates
    within 1e-9. Brackets touching a blow-up boundary are reported
    unresolved and never counted. The count is re-derived at h/2.
    """
    if not x_lo < x_hi:
        raise PreconditionError("need x_lo < x_hi")
    xs = np.linspace(x_lo, x_hi, scan_n)
    roots, unresolved, degenerate, g, alive = _census_pass(f, v, xs, h)
    count = None if degenerate else len(roots)
    half_count = None
    if check_half_step and not degenerate:
        roots_half, _, degen_half, _, _ = _census_pass(f, v, xs, h / 2)
        half_count = None if degen_half else len(roots_half)
    return SolutionCensus(x_lo=x_lo, x_hi=x_hi, h=h, roots=tuple(roots),
                          count=count, degenerate_continuum=degenerate,
                          unresolved_brackets=tuple(unresolved),
                          count_at_half_step=half_count,
                          scan_xs=xs, scan_g=g)


def _census_pass(f: Nonlinearity, v, xs: np.ndarray, h: float):
    u_end, alive, _, _ = _flow_vector(f, v, xs, h)
    g = u_end - xs
    finite = alive & np.isfinite(g)
    scale = float(np.max(np.abs(g[finite]))) if finite.any() else 0.0
    if finite.sum() >= 2 and scale <= 1e-12 * max(1.0, np.max(np.abs(xs))):
        return [], [], True, g, alive

    brackets = []
    unresolved = []
    for i in range(len(xs) - 1):
        if finite[i] and finite[i + 1]:
            if g[i] == 0.0:
                brackets.append((xs[i], xs[i], g[i], g[i]))
            elif g[i] * g[i + 1] < 0:
                brackets.append((xs[i], xs[i + 1], g[i], g[i + 1]))
        elif finite[i] != finite[i + 1]:
            unresolved.append((float(xs[i]), float(xs[i + 1])))
    if finite[-1] and g[-1] == 0.0:
        brackets.append((xs[-1], xs[-1], 0.0, 0.0))

    roots = []
    for lo, hi, glo, ghi in brackets:
        root, width, ok = _refine_root(f, v, lo, hi, glo, ghi, h)
        if ok:
            roots.append((root, width))
        else:
            unresolved.append((float(lo), float(hi)))
    roots.sort()
    dedup: list[tuple[float, float]] = []
    for root, width in roots:
        if dedup and abs(root - dedup[-1][0]) <= ROOT_DEDUP_TOL:
            continue
        dedup.append((root, width))
    out = []
    for root, width in dedup:
        val, der, blew, _, _ = _flow_with_variation(f, v, root, h)
        if blew:
            continue
        out.append(CensusRoot(x=float(root), rho_prime=float(der),
                              bracket_width=float(width)))
    return out, unresolved, False, g, alive


def _refine_root(f, v, lo, hi, glo, ghi, h):
    """Bisection to ROOT_REFINE_TOL; False when blow-up interrupts."""
    if lo == hi:
        return lo, 0.0, True
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        u_end, _, blew, _, _ = _flow_scalar(f, v, mid, 0.0, 1.0, h)
        if blew:
            return mid, hi - lo, False
        gm = u_end - mid
        if gm == 0.0:
            return mid, 0.0, True
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
        if hi - lo <= ROOT_REFINE_TOL:
            break
    return 0.5 * (lo + hi), hi - lo, True


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    params: dict
    result: dict | None
    error: str | None = None


def sweep(family: ParamFamily, grid_values: dict[str, list[float]],
          analysis, existing: dict[str, SweepCell] | None = None) -> dict[str, SweepCell]:
    """Run ``analysis(f, params)`` on the cartesian parameter grid.

    Per-cell failures are recorded as error strings and never abort the
    sweep; ``existing`` cells (from a previous run) are reused untouched,
    making sweeps resumable.
    """
    names = list(grid_values.keys())
    missing = [n for n in names if n not in family.names]
    if missing:
        raise PreconditionError(f"grid names {missing} not in family parameters")
    table: dict[str, SweepCell] = dict(existing or {})
    grids = [grid_values[n] for n in names]
    if any(len(g) == 0 for g in grids):
        return table
    index = [0] * len(names)
    while True:
        point = {n: float(grids[i][index[i]]) for i, n in enumerate(names)}
        key = ",".join(f"{n}={point[n]:.12g}" for n in names)
        if key not in table:
            params = np.array([point.get(n, 0.0) for n in family.names])
            try:
                f = family.build(params)
                table[key] = SweepCell(params=point, result=analysis(f, point))
            except Exception as exc:  # per-cell isolation is the contract
                table[key] = SweepCell(params=point, result=None, error=str(exc))
        for pos in range(len(names) - 1, -1, -1):
            index[pos] += 1
            if index[pos] < len(grids[pos]):
                break
            index[pos] = 0
        else:
            break
    return table
