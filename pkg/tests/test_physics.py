import numpy as np
import pytest
from hypothesis import given, strategies as st

from romdd import physics


def test_streams_are_reproducible_and_distinct():
    a = physics.stream(7, "poisson-train", 3).random(4)
    np.testing.assert_array_equal(a, physics.stream(7, "poisson-train", 3).random(4))
    assert not np.array_equal(a, physics.stream(7, "poisson-test", 3).random(4))
    assert not np.array_equal(a, physics.stream(7, "poisson-train", 4).random(4))
    with pytest.raises(KeyError):
        physics.stream(0, "unknown")


@given(seed=st.integers(0, 2**32 - 1), test=st.booleans())
def test_poisson_parameter_ranges(seed, test):
    p = physics.sample_poisson_params(np.random.default_rng(seed), test)
    a = 0.7 if test else 0.5
    assert all(abs(k) <= a for k in p.k + p.kb)
    assert 0 <= p.theta <= 1 and 0 <= p.thetab <= 1


@given(seed=st.integers(0, 2**32 - 1), test=st.booleans())
def test_stokes_parameter_ranges(seed, test):
    p = physics.sample_stokes_params(np.random.default_rng(seed), test)
    a = 1.5 if test else 1.0
    assert all(abs(g) <= a for g in p.g)
    assert all(abs(d) <= 0.1 for d in p.dg)
    bc = p.boundary_conditions()
    assert sum(v == "dirichlet" for v in bc.values()) == 2


@pytest.mark.parametrize("g,dirichlet", [((1, 1), {"left", "bottom"}), ((-1, 0.5), {"right", "bottom"}),
                                         ((0.3, -2), {"left", "top"}), ((0, 0), {"left", "bottom"})])
def test_upwind_sides(g, dirichlet):
    bc = physics.assign_upwind_sides(*g)
    assert {s for s, v in bc.items() if v == "dirichlet"} == dirichlet


def test_mms_solution_satisfies_equations():
    p = physics.stokes_mms(1.3)
    x1, x2 = np.random.default_rng(0).random((2, 50))
    h = 1e-4

    def lap(f, k):
        c = f(x1, x2)[k]
        return (f(x1 + h, x2)[k] + f(x1 - h, x2)[k] + f(x1, x2 + h)[k] + f(x1, x2 - h)[k] - 4 * c) / h**2

    u = p.velocity
    div = (u(x1 + h, x2)[0] - u(x1 - h, x2)[0] + u(x1, x2 + h)[1] - u(x1, x2 - h)[1]) / (2 * h)
    np.testing.assert_allclose(div, 0, atol=1e-7)
    dp = ((p.pressure(x1 + h, x2) - p.pressure(x1 - h, x2)) / (2 * h), (p.pressure(x1, x2 + h) - p.pressure(x1, x2 - h)) / (2 * h))
    f = p.forcing(x1, x2)
    for k in range(2):
        np.testing.assert_allclose(-p.nu * lap(u, k) + dp[k], f[k], atol=1e-5)
    # mean pressure by quadrature
    g, w = np.polynomial.legendre.leggauss(12)
    g, w = 0.5 * (g + 1), 0.5 * w
    X, Y = np.meshgrid(g, g)
    assert np.sum(np.outer(w, w) * p.pressure(Y, X)) == pytest.approx(p.pressure_mean(), rel=1e-12)


def test_channel_profile():
    c = physics.ChannelFlow(4)
    y = np.linspace(0, 4, 9)
    u, v = c.dirichlet(0 * y, y, "left")
    assert u[0] == pytest.approx(0) and u[-1] == pytest.approx(0) and u[4] == pytest.approx(1)
    assert not np.any(v)
    assert not np.any(c.dirichlet(y, 0 * y, "bottom")[0])
    assert c.boundary_conditions()["right"] == "neumann"
    with pytest.raises(ValueError):
        physics.ChannelFlow(0)


@given(s=st.floats(0, 0.7), k=st.floats(0, 0.7), L=st.integers(1, 16))
def test_spiral_bounded(s, k, L):
    p = physics.SpiralProblem(s, k, L)
    x1, x2 = np.meshgrid(np.linspace(0, L, 11), np.linspace(0, L, 11))
    f = p.forcing(x1, x2)
    assert np.all(np.abs(f) <= 1 + 1e-15)
    assert not np.any(p.dirichlet(x1, x2))


def test_spiral_ridge_has_unit_forcing():
    p = physics.SpiralProblem(0.5, 0.3, 8.0)
    th = 1.0
    r = p.s * th * p.L / (4 * np.pi)
    assert p.forcing(4 + r * np.cos(th), 4 + r * np.sin(th)) == pytest.approx(1.0)


def test_flow_past_array_obstacle_no_slip():
    p = physics.FlowPastArray((1.0, 0.5), (0.1, 0.0), (0.2, 0.1))
    x = np.linspace(0, 1, 5)
    assert not np.any(p.dirichlet(x, x, "obstacle")[0])
    u, v = p.dirichlet(x, x, "left")
    np.testing.assert_allclose(v, 0.5)
    assert np.all(np.abs(u - 1.0) <= 0.1)
