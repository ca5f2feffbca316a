"""Cross-validate the six-root census with an independent integrator stack.

The library counts fixed points of the return map with its own fixed-step
RK4; here the same count is reproduced from scratch with scipy's adaptive
RK45 and brentq root refinement, sharing no integration code with the
library path.
"""

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from morinode.odeint import _flow_scalar, _flow_vector


@pytest.fixture(scope="module")
def rhs(quartic, six_root_ansatz):
    ans = six_root_ansatz

    def v(t):
        return ans.derivative_eval(t) + np.asarray(
            quartic.eval(t, ans.eval(t), 0))
    return v


def test_six_roots_via_scipy(quartic, rhs):
    def field(t, y):
        return rhs(t) - quartic.eval(t, y, 0)

    def g(x0):
        sol = solve_ivp(field, (0.0, 1.0), [x0], method="RK45",
                        rtol=1e-12, atol=1e-13, dense_output=False)
        assert sol.success
        return float(sol.y[0, -1]) - x0

    xs = np.linspace(-0.35, 0.15, 51)
    vals = np.array([g(x) for x in xs])
    brackets = [(xs[i], xs[i + 1]) for i in range(len(xs) - 1)
                if vals[i] * vals[i + 1] < 0]
    roots = sorted(brentq(g, lo, hi, xtol=1e-10) for lo, hi in brackets)
    assert len(roots) == 6

    expected = [-0.285774, -0.249993, -0.224023, -0.197058, -0.121017,
                0.118933]
    assert np.allclose(roots, expected, atol=2e-5)


def test_vector_and_scalar_flows_agree(quartic, rhs):
    xs = np.array([-0.3, -0.1, 0.0, 0.2])
    vec, alive, _, _ = _flow_vector(quartic, rhs, xs, 1e-3)
    assert alive.all()
    for x, expect in zip(xs, vec):
        u_end, _, blew, _, _ = _flow_scalar(quartic, rhs, float(x),
                                            0.0, 1.0, 1e-3)
        assert not blew
        assert u_end == pytest.approx(expect, abs=1e-13)
