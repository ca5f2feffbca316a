"""Grids, periodic functions, spectral quadrature, and the nonlinearity model.

Everything here works on the unit-period circle. Functions are represented
by their samples on a uniform grid; off-node values, derivatives and
antiderivatives come from the trigonometric interpolant, which is exact for
band-limited data and spectrally accurate for smooth periodic data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

DEFAULT_GRID_N = 1024
MAX_X_DERIVATIVE = 5


class MorinodeError(Exception):
    """Base class for library errors."""


class PreconditionError(MorinodeError):
    """An operation was called outside its stated domain."""


class UnsupportedOrderError(PreconditionError):
    """A partial derivative beyond the supported order was requested."""


class BracketError(MorinodeError):
    """A root bracket could not be established or refined."""


class TamenessViolationError(BracketError):
    """No periodic solution bracket was found; the nonlinearity looks wild."""


class InternalConsistencyError(MorinodeError):
    """A quantity that is provably monotone came back non-monotone."""


# ---------------------------------------------------------------------------
# grid and periodic functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform sampling of the unit-period circle at nodes i/n."""

    n: int = DEFAULT_GRID_N

    def __post_init__(self):
        if self.n < 16:
            raise PreconditionError(f"grid size {self.n} < 16")
        if self.n & (self.n - 1) != 0:
            raise PreconditionError(f"grid size {self.n} is not a power of two")

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) / self.n


class PeriodicFn:
    """A real function on the circle, stored as samples at grid nodes."""

    __slots__ = ("grid", "values", "_coeffs")

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.array(values, dtype=float)
        if values.shape != (grid.n,):
            raise PreconditionError(
                f"expected {grid.n} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise PreconditionError("periodic function samples must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_coeffs", None)
        values.setflags(write=False)

    def __setattr__(self, name, value):
        if name == "_coeffs":
            object.__setattr__(self, name, value)
        else:
            raise AttributeError("PeriodicFn is immutable")

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray],
                      grid: Grid | None = None) -> "PeriodicFn":
        grid = grid or Grid()
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))

    @classmethod
    def constant(cls, value: float, grid: Grid | None = None) -> "PeriodicFn":
        grid = grid or Grid()
        return cls(grid, np.full(grid.n, float(value)))

    def _fourier(self) -> tuple[np.ndarray, np.ndarray]:
        """Significant one-sided Fourier coefficients (harmonics, coeffs)."""
        if self._coeffs is None:
            c = np.fft.rfft(self.values) / self.grid.n
            keep = np.abs(c) > 1e-15 * (np.max(np.abs(c)) + 1e-300)
            keep[0] = True
            self._coeffs = (np.nonzero(keep)[0], c[keep])
        return self._coeffs

    def eval(self, t: np.ndarray | float) -> np.ndarray | float:
        """Trigonometric-interpolant value at arbitrary circle points."""
        t = np.asarray(t, dtype=float)
        harm, c = self._fourier()
        phase = np.exp(2j * np.pi * np.outer(t, harm))
        # one-sided sum: double every positive harmonic, Nyquist included once
        scale = np.where(harm == 0, 1.0, 2.0)
        if 2 * harm[-1] == self.grid.n:
            scale[-1] = 1.0
        vals = (phase * (scale * c)).sum(axis=1).real
        return vals.reshape(t.shape) if t.shape else float(vals[0])

    def __call__(self, t):
        return self.eval(t)

    def derivative(self) -> "PeriodicFn":
        """Spectral derivative on the same grid."""
        n = self.grid.n
        c = np.fft.rfft(self.values)
        m = np.arange(len(c))
        c = c * (2j * np.pi * m)
        if n % 2 == 0:
            c[-1] = 0.0  # Nyquist mode has no well-defined derivative sign
        return PeriodicFn(self.grid, np.fft.irfft(c, n=n))

    def __repr__(self):
        return f"PeriodicFn(n={self.grid.n}, mean={mean(self):.6g})"


def mean(u: PeriodicFn) -> float:
    """Trapezoidal mean over one period (plain sample average on the grid)."""
    return float(np.mean(u.values))


def spectral_antiderivative(values: np.ndarray) -> np.ndarray:
    """Zero-mean periodic A with A' = values - mean(values), on the grid."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    c = np.fft.rfft(values)
    m = np.arange(len(c))
    out = np.zeros_like(c)
    out[1:] = c[1:] / (2j * np.pi * m[1:])
    return np.fft.irfft(out, n=n)


def integral_weighted_t(values: np.ndarray) -> float:
    """Exact spectral value of ``int_0^1 phi(t) * t dt`` for periodic phi."""
    return float(np.mean(values)) / 2.0 + float(spectral_antiderivative(values)[0])


def integral_weighted_t2(values: np.ndarray) -> float:
    """Exact spectral value of ``int_0^1 phi(t) * t^2 dt`` for periodic phi."""
    a = spectral_antiderivative(values)
    b = spectral_antiderivative(a)
    return float(np.mean(values)) / 3.0 + float(a[0]) - 2.0 * float(b[0])


class Cumulative:
    """The running integral t -> int_0^t u(s) ds of a periodic function."""

    def __init__(self, u: PeriodicFn):
        self._mean = mean(u)
        a = spectral_antiderivative(u.values)
        self._osc = PeriodicFn(u.grid, a)
        self._a0 = float(a[0])
        self.grid = u.grid

    @property
    def at_nodes(self) -> np.ndarray:
        return self._mean * self.grid.nodes + self._osc.values - self._a0

    def __call__(self, t: np.ndarray | float) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        out = self._mean * t + self._osc.eval(t) - self._a0
        return out if t.shape else float(out)


def cumulative(u: PeriodicFn) -> Cumulative:
    """Running integral of ``u``; its value at t=1 equals mean(u) exactly."""
    return Cumulative(u)


def green_kernel(x: np.ndarray | float) -> np.ndarray | float:
    """Sawtooth kernel x - floor(x) - 1/2, with value 0 at the jump points.

    The midpoint convention at integers matches the Fourier-series limit and
    makes the periodic-trapezoid identity ``int k(s-t) ds = 0`` exact on the
    sampling grid.
    """
    x = np.asarray(x, dtype=float)
    frac = x - np.floor(x)
    out = np.where(frac == 0.0, 0.0, frac - 0.5)
    return out if out.shape else float(out)


# ---------------------------------------------------------------------------
# trigonometric polynomials and the nonlinearity model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrigPoly:
    """c(t) = a0 + sum_m cos_m cos(2 pi m t) + sin_m sin(2 pi m t)."""

    a0: float = 0.0
    cos: tuple[float, ...] = ()
    sin: tuple[float, ...] = ()

    def __call__(self, t: np.ndarray | float) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape or (1,), self.a0)
        for m, c in enumerate(self.cos, start=1):
            if c:
                out = out + c * np.cos(TWO_PI * m * t)
        for m, s in enumerate(self.sin, start=1):
            if s:
                out = out + s * np.sin(TWO_PI * m * t)
        return out.reshape(t.shape) if t.shape else float(out[0])

    @property
    def is_constant(self) -> bool:
        return not any(self.cos) and not any(self.sin)

    def abs_bound(self) -> float:
        return abs(self.a0) + sum(map(abs, self.cos)) + sum(map(abs, self.sin))


@dataclass(frozen=True)
class Term:
    """One monomial c_j(t) * x^j of the nonlinearity."""

    power: int
    coeff: TrigPoly

    def __post_init__(self):
        if self.power < 0:
            raise PreconditionError("polynomial powers must be non-negative")


def _falling(j: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= (j - i)
    return out


# builtin nonlinearities: name -> (pairs of x-derivative tables, description)
def _cosh2_cos(t, x, order):
    # d^k/dx^k of cosh^2(x): [cosh^2, sinh 2x, 2 cosh 2x, 4 sinh 2x, ...]
    x = np.asarray(x, dtype=float)
    if order == 0:
        xpart = np.cosh(x) ** 2
    elif order % 2 == 1:
        xpart = 2.0 ** (order - 1) * np.sinh(2.0 * x)
    else:
        xpart = 2.0 ** (order - 1) * np.cosh(2.0 * x)
    return TWO_PI * np.cos(TWO_PI * np.asarray(t, dtype=float)) * xpart


BUILTINS: dict[str, Callable] = {"cosh2_cos": _cosh2_cos}


class Nonlinearity:
    """f(t, x): polynomial in x with trigonometric-polynomial coefficients.

    Partial x-derivatives up to order 5 are exact (power rule). A named
    builtin replaces the polynomial form entirely.
    """

    def __init__(self, terms: Sequence[Term] = (), builtin: str | None = None):
        if builtin is not None and builtin not in BUILTINS:
            raise PreconditionError(f"unknown builtin nonlinearity {builtin!r}")
        self.terms = tuple(terms)
        self.builtin = builtin
        if builtin is not None:
            self.autonomous = False
        else:
            self.autonomous = all(t.coeff.is_constant for t in self.terms)

    # -- constructors -------------------------------------------------------

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "Nonlinearity":
        """Autonomous polynomial sum_j coeffs[j] * x^j."""
        terms = [Term(j, TrigPoly(a0=float(c)))
                 for j, c in enumerate(coeffs) if c != 0.0]
        return cls(terms)

    @classmethod
    def from_builtin(cls, name: str) -> "Nonlinearity":
        return cls((), builtin=name)

    @classmethod
    def quartic(cls, b: float, c: float) -> "Nonlinearity":
        """x^4 - b x^2 + c x."""
        return cls.polynomial([0.0, c, -b, 0.0, 1.0])

    # -- evaluation ---------------------------------------------------------

    def eval(self, t, x, order: int = 0):
        """d^order f / dx^order at (t, x); exact for polynomial terms."""
        if not 0 <= order <= MAX_X_DERIVATIVE:
            raise UnsupportedOrderError(
                f"x-derivative order {order} not in 0..{MAX_X_DERIVATIVE}")
        if self.builtin is not None:
            return BUILTINS[self.builtin](t, x, order)
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(np.asarray(t, dtype=float), x).shape)
        for term in self.terms:
            j = term.power
            if j < order:
                continue
            fac = _falling(j, order)
            out = out + term.coeff(t) * fac * x ** (j - order)
        return out if out.shape else float(out)

    def poly_coeffs(self, order: int = 0) -> np.ndarray:
        """Autonomous-only: coefficients of d^order f/dx^order in x."""
        if not self.autonomous or self.builtin is not None:
            raise PreconditionError("poly_coeffs requires an autonomous polynomial")
        deg = max((t.power for t in self.terms), default=0)
        c = np.zeros(deg + 1)
        for term in self.terms:
            c[term.power] += term.coeff.a0
        if order == 0:
            return c
        for _ in range(order):
            c = c[1:] * np.arange(1, len(c))
            if len(c) == 0:
                return np.zeros(1)
        return c if len(c) else np.zeros(1)

    def coeff_rows(self, times: np.ndarray, order: int = 0) -> np.ndarray:
        """Coefficient table C with f^(order)(t_i, x) = sum_m C[i, m] x^m."""
        if self.builtin is not None:
            raise PreconditionError("builtin nonlinearities have no coefficient table")
        times = np.asarray(times, dtype=float)
        deg = max((t.power for t in self.terms), default=0)
        width = max(deg - order + 1, 1)
        rows = np.zeros((len(times), width))
        for term in self.terms:
            j = term.power
            if j < order:
                continue
            rows[:, j - order] += term.coeff(times) * _falling(j, order)
        return rows

    def abs_bound(self, x_bound: float) -> float:
        """Upper bound for |f(t,x)| over the circle and |x| <= x_bound."""
        if self.builtin is not None:
            return float(np.max(np.abs(
                self.eval(np.linspace(0, 1, 64), x_bound, 0))) + 1.0)
        return sum(t.coeff.abs_bound() * x_bound ** t.power for t in self.terms)

    def on_grid(self, u: PeriodicFn, order: int = 0) -> np.ndarray:
        """Samples of d^order f/dx^order along (t, u(t)) at the grid nodes."""
        return np.asarray(self.eval(u.grid.nodes, u.values, order), dtype=float)

    def __repr__(self):
        if self.builtin:
            return f"Nonlinearity(builtin={self.builtin!r})"
        return f"Nonlinearity({len(self.terms)} terms, autonomous={self.autonomous})"


def eval_f(f: Nonlinearity, t, x, order: int = 0):
    """Module-level alias for ``Nonlinearity.eval``."""
    return f.eval(t, x, order)


# ---------------------------------------------------------------------------
# finite Fourier ansatz
# ---------------------------------------------------------------------------


@dataclass
class FourierAnsatz:
    """u(t) = a0 + sum_j a[j-1] cos(2 pi j t) + b[j-1] sin(2 pi j t)."""

    a0: float
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if len(self.a) != len(self.b) or len(self.a) < 1:
            raise PreconditionError("cosine/sine coefficient lists must match, M >= 1")

    @property
    def harmonics(self) -> int:
        return len(self.a)

    def eval(self, t: np.ndarray | float) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape or (1,), self.a0)
        for j in range(1, self.harmonics + 1):
            out = out + (self.a[j - 1] * np.cos(TWO_PI * j * t)
                         + self.b[j - 1] * np.sin(TWO_PI * j * t))
        return out.reshape(t.shape) if t.shape else float(out[0])

    def derivative_eval(self, t: np.ndarray | float) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape or (1,))
        for j in range(1, self.harmonics + 1):
            w = TWO_PI * j
            out = out + w * (-self.a[j - 1] * np.sin(w * t)
                             + self.b[j - 1] * np.cos(w * t))
        return out.reshape(t.shape) if t.shape else float(out[0])

    def sample(self, grid: Grid | None = None) -> PeriodicFn:
        grid = grid or Grid()
        return PeriodicFn(grid, self.eval(grid.nodes))

    @classmethod
    def from_periodic(cls, u: PeriodicFn, harmonics: int) -> "FourierAnsatz":
        """Read coefficients back by discrete transform (exact for M < n/2)."""
        n = u.grid.n
        if harmonics >= n // 2:
            raise PreconditionError("requested harmonics not resolved by the grid")
        c = np.fft.rfft(u.values) / n
        a0 = float(c[0].real)
        a = 2.0 * c[1:harmonics + 1].real
        b = -2.0 * c[1:harmonics + 1].imag
        return cls(a0, a, b)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------


def nonlinearity_to_json(f: Nonlinearity) -> dict:
    doc: dict = {"terms": [
        {"power": t.power, "a0": t.coeff.a0,
         "cos": list(t.coeff.cos), "sin": list(t.coeff.sin)}
        for t in f.terms]}
    if f.builtin is not None:
        doc["builtin"] = f.builtin
    return doc


def nonlinearity_from_json(doc: dict) -> Nonlinearity:
    try:
        terms = [Term(int(td["power"]),
                      TrigPoly(float(td.get("a0", 0.0)),
                               tuple(map(float, td.get("cos", []))),
                               tuple(map(float, td.get("sin", [])))))
                 for td in doc.get("terms", [])]
        return Nonlinearity(terms, builtin=doc.get("builtin"))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"bad nonlinearity document: {exc}") from exc


def ansatz_to_json(u: FourierAnsatz) -> dict:
    return {"a0": u.a0, "cos": list(map(float, u.a)), "sin": list(map(float, u.b))}


def ansatz_from_json(doc: dict) -> FourierAnsatz:
    try:
        return FourierAnsatz(float(doc["a0"]),
                             np.asarray(doc["cos"], dtype=float),
                             np.asarray(doc["sin"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"bad ansatz document: {exc}") from exc


class MalformedFileError(MorinodeError):
    """A problem/ansatz document failed to parse or validate."""


def load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFileError(f"{path}: {exc}") from exc
