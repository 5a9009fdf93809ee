import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from conftest import bar, plate
from ihcp.direct import (FluxSchedule, IntegratorConfig, build_propagator,
                         simulate, step)
from ihcp.errors import InvalidArgumentError
from ihcp.fem import MATERIALS, MaterialProperties, ThermalSystem
from ihcp.stability import spectral_radius


def scalar_system(c=2.0, k=0.5, f=1.0, q=1.0):
    one = lambda v: np.array([[v]])  # noqa: E731
    return ThermalSystem(capacity=one(c), conductance=one(k),
                         convection_load=np.array([f]), unit_flux=one(q),
                         mesh=None, material=MATERIALS["silicon"])


@pytest.mark.parametrize("beta", [0.0, 0.3, 0.5, 1.0])
def test_scalar_closed_form(beta):
    c, k, dt = 2.0, 0.5, 0.1
    prop = build_propagator(scalar_system(c, k), IntegratorConfig(beta, dt))
    u = 1.0 / (c / dt + beta * k)
    assert prop.U[0, 0] == pytest.approx(u, rel=1e-14)
    assert prop.A[0, 0] == pytest.approx(u * (c / dt - (1 - beta) * k),
                                         rel=1e-14)
    T1 = step(prop, [3.0], [1.0], [5.0])
    expected = prop.A[0, 0] * 3.0 + u * ((1 - beta) * 1.0 + beta * 5.0)
    assert T1[0] == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("dt", [0.01, 0.05, 0.1])
@pytest.mark.parametrize("material", sorted(MATERIALS))
@pytest.mark.parametrize("lumped", [False, True])
def test_propagator_stable_for_beta_at_least_half(material, dt, lumped):
    s = plate(nx=5, ny=5, lumped=lumped) if material == "plate" \
        else bar(material, lumped=lumped)
    for beta in (0.5, 0.75, 1.0):
        A = build_propagator(s, IntegratorConfig(beta, dt)).A
        assert spectral_radius(A) < 1.0


def test_crank_nicolson_is_second_order():
    s = bar("silicon", num_elements=8)
    C, K = s.capacity, s.conductance
    T0 = np.zeros(s.num_dofs)
    f = s.load([1.0])
    t_end = 0.8
    # exact solution of C T' + K T = f from T0 = 0
    Tss = np.linalg.solve(K, f)
    exact = Tss - expm(-np.linalg.solve(C, K) * t_end) @ Tss

    def err(beta, dt):
        M = int(round(t_end / dt))
        T = simulate(s, IntegratorConfig(beta, dt), np.ones((M + 1, 1)), T0,
                     M)
        return np.abs(T[-1] - exact).max()

    order_cn = np.log2(err(0.5, 0.02) / err(0.5, 0.01))
    order_be = np.log2(err(1.0, 0.02) / err(1.0, 0.01))
    assert order_cn == pytest.approx(2.0, abs=0.1)
    assert order_be == pytest.approx(1.0, abs=0.1)


def test_zero_flux_decays_monotonically_to_ambient():
    mat = MaterialProperties(2.33, 0.7, 1.3, 0.05, ambient_temp=20.0)
    s = bar(mat, num_elements=10)
    T0 = 20.0 + 30.0 * np.linspace(1.0, 0.0, s.num_dofs)
    T = simulate(s, IntegratorConfig(1.0, 0.5), np.zeros((2001, 1)), T0,
                 2000)
    dev = np.abs(T - 20.0).max(axis=1)
    assert np.all(np.diff(dev) <= 1e-12)
    assert dev[-1] < 1e-3 * dev[0]


@pytest.mark.parametrize("system", ["bar", "plate"])
def test_steady_state_energy_balance(system):
    s = bar("silicon", num_elements=10) if system == "bar" else plate(4, 4)
    q = np.full(s.num_flux_regions, 0.7)
    T = simulate(s, IntegratorConfig(1.0, 50.0), np.tile(q, (801, 1)), 40.0,
                 800)
    rhs = s.unit_flux @ q + s.convection_load
    res = s.conductance @ T[-1] - rhs
    assert np.linalg.norm(res) < 1e-8 * np.linalg.norm(rhs)


@settings(max_examples=20, deadline=None)
@given(beta=st.floats(0.0, 1.0), a=st.floats(-3, 3), b=st.floats(-3, 3),
       seed=st.integers(0, 2**16))
def test_step_superposition(beta, a, b, seed):
    s = bar("carbon_carbon", num_elements=6)
    prop = build_propagator(s, IntegratorConfig(beta, 0.1))
    r = np.random.default_rng(seed)
    x1, x2 = r.normal(size=(2, 3, s.num_dofs))
    lhs = step(prop, *(a * u + b * v for u, v in zip(x1, x2)))
    rhs = a * step(prop, *x1) + b * step(prop, *x2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_simulate_matches_manual_steps(silicon_bar):
    cfg = IntegratorConfig(0.6, 0.1)
    q = np.linspace(0, 2, 6)[:, None]
    T = simulate(silicon_bar, cfg, q, 40.0, 5)
    prop = build_propagator(silicon_bar, cfg)
    Tm = np.full(silicon_bar.num_dofs, 40.0)
    for m in range(5):
        Tm = step(prop, Tm, silicon_bar.load(q[m]), silicon_bar.load(q[m + 1]))
    np.testing.assert_allclose(T[-1], Tm, rtol=1e-14)


def test_validation(silicon_bar):
    for beta, dt in ((-0.1, 0.1), (1.1, 0.1), (0.5, 0.0)):
        with pytest.raises(InvalidArgumentError):
            IntegratorConfig(beta, dt)
    with pytest.raises(InvalidArgumentError):
        FluxSchedule(np.array([[0.0], [np.nan]]))
    with pytest.raises(InvalidArgumentError):
        simulate(silicon_bar, IntegratorConfig(), np.zeros((3, 1)), 0.0, 5)
    with pytest.raises(InvalidArgumentError):
        simulate(silicon_bar, IntegratorConfig(), np.zeros((6, 2)), 0.0, 5)
    prop = build_propagator(silicon_bar, IntegratorConfig())
    with pytest.raises(InvalidArgumentError):
        step(prop, np.zeros(3), np.zeros(3), np.zeros(3))


def test_propagator_is_read_only(silicon_bar):
    prop = build_propagator(silicon_bar, IntegratorConfig())
    with pytest.raises(ValueError):
        prop.A[0, 0] = 1.0
