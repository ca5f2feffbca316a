import numpy as np
import pytest

from morinode import (FourierAnsatz, Grid, Nonlinearity, ParamFamily,
                      PeriodicFn, SearchProblem, count_solutions, degree,
                      gauss_newton, sweep)
from morinode.core import PreconditionError
from tests.conftest import (BUTTERFLY_B, BUTTERFLY_C, BUTTERFLY_COEFFS,
                            SIX_ROOT_COEFFS, ansatz_from)

SQUARE = Nonlinearity.polynomial([0, 0, 1])
ZERO = Nonlinearity.polynomial([])


def rhs_from_ansatz(f, ans, n=1024):
    grid = Grid(n)
    t = grid.nodes
    return PeriodicFn(grid, ans.derivative_eval(t)
                      + np.asarray(f.eval(t, ans.eval(t), 0)))


class TestGaussNewton:
    def test_constant_root_of_squares(self):
        # one harmonic present but frozen: effectively the constants search
        problem = SearchProblem(
            family=ParamFamily.fixed(SQUARE),
            ansatz=FourierAnsatz(0.4, np.zeros(1), np.zeros(1)),
            target=np.array([0.0]), frozen=("a1", "b1"))
        res = gauss_newton(problem)
        assert res.converged
        assert res.coefficient("a0") == pytest.approx(0.0, abs=1e-10)

    def test_butterfly_reconvergence(self, butterfly_ansatz):
        seed = FourierAnsatz(butterfly_ansatz.a0 + 1e-3,
                             butterfly_ansatz.a + 1e-3,
                             butterfly_ansatz.b + 1e-3)
        seed.b[0] = 0.0  # gauge coordinate stays frozen at zero
        problem = SearchProblem(
            family=ParamFamily.quartic_bc(), ansatz=seed, target=np.zeros(4),
            family_params=np.array([BUTTERFLY_B + 1e-3, BUTTERFLY_C + 1e-3]))
        res = gauss_newton(problem)
        assert res.converged
        assert res.residual_history[-1] < 1e-10
        assert len(res.residual_history) <= 100
        assert res.smallest_retained_sval > 1e-6
        assert abs(res.sigma5) > 1.0
        # minimum-norm steps keep the solution near the published point;
        # the perturbation's tangent component survives (about 1.4e-3)
        printed = np.concatenate([[BUTTERFLY_B, BUTTERFLY_C],
                                  [BUTTERFLY_COEFFS["a0"]],
                                  [BUTTERFLY_COEFFS["a1"], 0.0],
                                  [BUTTERFLY_COEFFS["a2"], BUTTERFLY_COEFFS["b2"]],
                                  [BUTTERFLY_COEFFS["a3"], BUTTERFLY_COEFFS["b3"]],
                                  [BUTTERFLY_COEFFS["a4"], BUTTERFLY_COEFFS["b4"]]])
        assert np.max(np.abs(res.params - printed)) < 5e-3

    def test_nearby_six_root_point(self, butterfly_ansatz):
        # frozen family, perturbed leading-functional targets: converges to
        # a nearby point on the same solution manifold
        problem = SearchProblem(
            family=ParamFamily.quartic_bc(), ansatz=butterfly_ansatz,
            target=np.array([-5e-7, 0.0, 8e-5, 0.0]),
            family_params=np.array([BUTTERFLY_B, BUTTERFLY_C]),
            frozen=("b", "c"), residual_tol=1e-12)
        res = gauss_newton(problem)
        assert res.converged
        assert res.residual_history[-1] < 1e-12
        published = ansatz_from(SIX_ROOT_COEFFS)
        got = np.concatenate([[res.coefficient("a0")],
                              res.params[3::2][:4], res.params[4::2][:4]])
        ref = np.concatenate([[published.a0], published.a, published.b])
        assert np.max(np.abs(got - ref)) < 1e-3

    def test_monotone_residuals(self, butterfly_ansatz):
        seed = FourierAnsatz(butterfly_ansatz.a0 + 1e-3,
                             butterfly_ansatz.a + 1e-3,
                             butterfly_ansatz.b + 1e-3)
        problem = SearchProblem(
            family=ParamFamily.quartic_bc(), ansatz=seed, target=np.zeros(4),
            family_params=np.array([BUTTERFLY_B, BUTTERFLY_C]))
        res = gauss_newton(problem)
        hist = res.residual_history
        assert all(b <= a * (1 + 1e-12) for a, b in zip(hist[3:], hist[4:]))

    def test_too_few_free_coordinates(self):
        problem = SearchProblem(
            family=ParamFamily.fixed(SQUARE),
            ansatz=FourierAnsatz(0.0, np.zeros(1), np.zeros(1)),
            target=np.zeros(3), frozen=("a0", "a1", "b1"))
        with pytest.raises(PreconditionError):
            gauss_newton(problem)


class TestCountSolutions:
    def test_degenerate_continuum(self):
        census = count_solutions(ZERO, PeriodicFn.constant(0.0),
                                 -1.0, 1.0, scan_n=101, h=1e-2,
                                 check_half_step=False)
        assert census.degenerate_continuum
        assert census.count is None

    def test_two_constant_orbits(self):
        # u' = 1 - u^2 has exactly the two equilibria u = +-1
        census = count_solutions(SQUARE, PeriodicFn.constant(1.0),
                                 -2.0, 2.0, scan_n=201, h=1e-3)
        assert census.count == 2
        xs = sorted(r.x for r in census.roots)
        assert xs[0] == pytest.approx(-1.0, abs=1e-8)
        assert xs[1] == pytest.approx(1.0, abs=1e-8)
        assert census.stable_under_halving

    def test_roots_reclose(self):
        census = count_solutions(SQUARE, PeriodicFn.constant(1.0),
                                 -2.0, 2.0, scan_n=201, h=1e-3,
                                 check_half_step=False)
        from morinode import return_map
        for r in census.roots:
            rv = return_map(SQUARE, PeriodicFn.constant(1.0), r.x, h=1e-3)
            assert abs(rv.value - r.x) <= 1e-8

    def test_census_sensitivity_near_order_four_point(self, quartic):
        # the six-root structure lives on a quintic-degenerate scale: moving
        # the generator's mean coefficient by 1e-6 destroys four solutions
        import numpy as np

        def census_for(da):
            coeffs = dict(SIX_ROOT_COEFFS)
            coeffs["a0"] += da
            ans = ansatz_from(coeffs)
            v = lambda t: ans.derivative_eval(t) + np.asarray(
                quartic.eval(t, ans.eval(t), 0))
            return count_solutions(quartic, v, -0.4, 0.4, scan_n=801,
                                   h=2e-4, check_half_step=False)

        assert census_for(0.0).count == 6
        assert census_for(-1e-6).count == 2

    def test_parity_matches_degree(self):
        # signed fixed-point count sum(sgn(1 - rho')) equals the degree
        cases = [
            (SQUARE, 1.0, (-3.0, 3.0)),
            (Nonlinearity.polynomial([0, 1, 0, 1]), 0.5, (-3.0, 3.0)),
            (Nonlinearity.polynomial([0, 0, 0, -1]), 0.4, (-3.0, 3.0)),
            (Nonlinearity.polynomial([0, -1, 0, 1]), 0.05, (-2.0, 2.0)),
        ]
        for f, const, (lo, hi) in cases:
            census = count_solutions(f, PeriodicFn.constant(const), lo, hi,
                                     scan_n=401, h=1e-3, check_half_step=False)
            signed = sum(int(np.sign(1.0 - r.rho_prime)) for r in census.roots)
            assert signed == degree(f)
            parity_even = degree(f) % 2 == 0
            assert (census.count % 2 == 0) == parity_even


class TestSweep:
    def test_empty_grid(self):
        table = sweep(ParamFamily.quartic_bc(), {"b": [], "c": []},
                      lambda f, p: {"ok": True})
        assert table == {}

    def test_single_cell_classification(self):
        from morinode import classify_operator
        table = sweep(ParamFamily.quartic_bc(),
                      {"b": [BUTTERFLY_B], "c": [BUTTERFLY_C]},
                      lambda f, p: {"verdict": classify_operator(f).verdict})
        assert len(table) == 1
        cell = next(iter(table.values()))
        assert cell.result["verdict"] == "has_higher_singularities"

    def test_convex_dominant_cells_fold(self):
        # b = 0: the second derivative 12x^2 vanishes only at one point and
        # the hull test certifies the fold for every c != 0
        from morinode import classify_operator
        table = sweep(ParamFamily.quartic_bc(),
                      {"b": [0.0], "c": [-0.5, -0.1, 0.4]},
                      lambda f, p: {"verdict": classify_operator(f).verdict})
        for cell in table.values():
            assert cell.result["verdict"] == "global_fold"

    def test_errors_recorded_not_raised(self):
        def analysis(f, p):
            raise ValueError("boom")
        table = sweep(ParamFamily.quartic_bc(), {"b": [1.0], "c": [0.0]},
                      analysis)
        cell = next(iter(table.values()))
        assert cell.error == "boom"
        assert cell.result is None

    def test_resume_skips_existing(self):
        calls = []

        def analysis(f, p):
            calls.append(p)
            return {"n": len(calls)}
        t1 = sweep(ParamFamily.quartic_bc(), {"b": [1.0, 2.0], "c": [0.0]},
                   analysis)
        assert len(calls) == 2
        t2 = sweep(ParamFamily.quartic_bc(), {"b": [1.0, 2.0], "c": [0.0]},
                   analysis, existing=t1)
        assert len(calls) == 2
        assert t2 == t1
