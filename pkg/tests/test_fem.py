import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bar, plate
from ihcp.direct import IntegratorConfig, simulate
from ihcp.errors import InvalidArgumentError
from ihcp.fem import (MATERIALS, EdgeRegion, MaterialProperties, assemble,
                      build_mesh_1d, build_mesh_2d, build_sensor_selector,
                      penetration_depth)


def test_bar_element_matches_quadrature():
    mat = MaterialProperties(2.0, 0.5, 1.3, 0.02, ambient_temp=25.0)
    L, P, A = 0.7, 0.9, 0.05
    sys1 = assemble(build_mesh_1d(L, P, A, 1), mat)
    # independent oracle: 3-point Gauss-Legendre on the reference element
    xg, wg = np.polynomial.legendre.leggauss(3)
    N = np.stack([(1 - xg) / 2, (1 + xg) / 2])
    jac = L / 2
    mass = (N * wg) @ N.T * jac
    dN = np.array([-1.0, 1.0]) / L
    C = mat.density * mat.specific_heat * A * mass
    K = mat.conductivity * A * L * np.outer(dN, dN) \
        + mat.convection_coeff * P * mass
    f = mat.convection_coeff * P * mat.ambient_temp * (N @ wg) * jac
    np.testing.assert_allclose(sys1.capacity, C, rtol=1e-14)
    np.testing.assert_allclose(sys1.conductance, K, rtol=1e-14)
    np.testing.assert_allclose(sys1.convection_load, f, rtol=1e-14)
    np.testing.assert_array_equal(sys1.unit_flux, [[A], [0.0]])


def test_quad_element_matches_symbolic_integration():
    a, b, t = 0.5, 0.25, 0.1
    mat = MaterialProperties(1.5, 0.8, 2.0, 0.01, ambient_temp=30.0)
    mesh = build_mesh_2d(a, b, t, 1, 1, [EdgeRegion("left")])
    sys1 = assemble(mesh, mat)
    x, y = sp.symbols("x y")
    # global order of a 1x1 mesh: (0,0), (a,0), (0,b), (a,b)
    N = [(1 - x / a) * (1 - y / b), x / a * (1 - y / b),
         (1 - x / a) * y / b, x / a * y / b]

    def integ(e):
        return float(sp.integrate(sp.integrate(e, (x, 0, a)), (y, 0, b)))

    M = np.array([[integ(Ni * Nj) for Nj in N] for Ni in N])
    S = np.array([[integ(sp.diff(Ni, x) * sp.diff(Nj, x)
                         + sp.diff(Ni, y) * sp.diff(Nj, y)) for Nj in N]
                  for Ni in N])
    V = np.array([integ(Ni) for Ni in N])
    h2 = 2 * mat.convection_coeff
    np.testing.assert_allclose(
        sys1.capacity, mat.density * mat.specific_heat * t * M, rtol=1e-12)
    np.testing.assert_allclose(
        sys1.conductance, mat.conductivity * t * S + h2 * M, rtol=1e-12)
    np.testing.assert_allclose(
        sys1.convection_load, h2 * mat.ambient_temp * V, rtol=1e-12)
    # left edge: nodes 0 and 2, length b
    np.testing.assert_allclose(sys1.unit_flux[:, 0],
                               [b * t / 2, 0, b * t / 2, 0])


@pytest.mark.parametrize("lumped", [False, True])
@pytest.mark.parametrize("system", ["bar", "plate"])
def test_capacity_and_conductance_spd(system, lumped):
    s = bar(lumped=lumped) if system == "bar" else plate(lumped=lumped)
    for M in (s.capacity, s.conductance):
        np.testing.assert_array_equal(M, M.T)
        assert np.linalg.eigvalsh(M).min() > 0


def test_lumped_capacity_is_row_sum_diagonal():
    c = bar(lumped=False).capacity
    lc = bar(lumped=True).capacity
    np.testing.assert_allclose(np.diag(lc), c.sum(axis=1))
    assert np.count_nonzero(lc - np.diag(np.diag(lc))) == 0


@pytest.mark.parametrize("system", ["bar", "plate"])
def test_no_convection_leaves_constants_in_null_space(system):
    mat = MaterialProperties(1.0, 1.0, 1.0, 0.0)
    if system == "bar":
        s = assemble(build_mesh_1d(1.0, 1.0, 1.0, 8), mat)
    else:
        s = assemble(build_mesh_2d(1.0, 1.0, 0.1, 4, 4,
                                   [EdgeRegion("left")]), mat)
    np.testing.assert_allclose(s.conductance @ np.ones(s.num_dofs), 0.0,
                               atol=1e-12)
    assert np.linalg.eigvalsh(s.conductance).min() > -1e-12


@pytest.mark.parametrize("system", ["bar", "plate"])
def test_convection_assembly_is_additive(system):
    def K(h):
        mat = MaterialProperties(1.0, 1.0, 1.0, h)
        if system == "bar":
            return assemble(build_mesh_1d(1.0, 1.0, 1.0, 5), mat).conductance
        return assemble(build_mesh_2d(1.0, 1.0, 0.1, 3, 3,
                                      [EdgeRegion("left")]), mat).conductance

    np.testing.assert_allclose(K(0.4) - K(0.0), 2 * (K(0.2) - K(0.0)),
                               atol=1e-14)


def test_unit_flux_columns_sum_to_region_measure():
    regions = [EdgeRegion("left", 1.5, 3.5), EdgeRegion("bottom"),
               EdgeRegion("top", 0.0, 2.0)]
    mesh = build_mesh_2d(4.0, 4.0, 0.1, 8, 8, regions)
    Q = assemble(mesh, MATERIALS["plate"]).unit_flux
    np.testing.assert_allclose(Q.sum(axis=0), [2.0 * 0.1, 4.0 * 0.1,
                                               2.0 * 0.1])
    assert bar().unit_flux.sum() == pytest.approx(0.04)


def test_plate_node_numbering_is_x_fastest():
    mesh = build_mesh_2d(4.0, 2.0, 0.1, 4, 2, [EdgeRegion("left")])
    j, i = 2, 3
    np.testing.assert_allclose(mesh.coords[j * 5 + i], [3.0, 2.0])
    assert mesh.nearest_node([3.1, 1.9]) == 13


def test_mesh_refinement_converges():
    # stainless bar, kappa ~ 0.041 cm^2/s, dt = 0.1, backward Euler;
    # heated-end temperature at t = 1 s under a unit step flux
    def surface(ne):
        s = bar("stainless_steel", num_elements=ne)
        T = simulate(s, IntegratorConfig(1.0, 0.1), np.ones((11, 1)), 40.0,
                     10)
        return T[-1, 0]

    t20, t40 = surface(20), surface(40)
    assert abs(t20 - t40) / abs(t40) < 0.005
    # coarse meshes inside the penetration depth are visibly worse
    assert abs(surface(2) - t40) > 10 * abs(t20 - t40)


def test_penetration_depth():
    assert penetration_depth(0.041, 1.0) == pytest.approx(4 * 0.041 ** 0.5)
    assert penetration_depth(0.5, 2.0, gamma=2.0) == pytest.approx(2.0)
    with pytest.raises(InvalidArgumentError):
        penetration_depth(-1.0, 1.0)


def test_sensor_selector():
    L = build_sensor_selector(6, [4, 1])
    np.testing.assert_array_equal(L.matrix @ np.arange(6.0), [4.0, 1.0])
    np.testing.assert_array_equal(L.extract(np.arange(12.0).reshape(2, 6)),
                                  [[4, 1], [10, 7]])
    for bad in ([], [1, 1], [6], [-1]):
        with pytest.raises(InvalidArgumentError):
            build_sensor_selector(6, bad)


@pytest.mark.parametrize("kwargs", [
    dict(density=0.0, specific_heat=1, conductivity=1, convection_coeff=0),
    dict(density=1, specific_heat=1, conductivity=-1, convection_coeff=0),
    dict(density=1, specific_heat=1, conductivity=1, convection_coeff=-0.1),
])
def test_material_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        MaterialProperties(**kwargs)


def test_mesh_validation():
    with pytest.raises(InvalidArgumentError):
        build_mesh_1d(1.0, 1.0, 1.0, 0)
    with pytest.raises(InvalidArgumentError):
        build_mesh_2d(1.0, 1.0, 0.1, 2, 2, [])
    with pytest.raises(InvalidArgumentError):
        build_mesh_2d(1.0, 1.0, 0.1, 2, 2, [EdgeRegion("left", 5.0, 6.0)])
    with pytest.raises(InvalidArgumentError):
        build_mesh_2d(1.0, 1.0, 0.1, 2, 2,
                      [EdgeRegion("left"), EdgeRegion("left", 0.0, 0.5)])


@settings(max_examples=25, deadline=None)
@given(rho=st.floats(0.1, 10), c=st.floats(0.1, 2), k=st.floats(0.01, 5),
       h=st.one_of(st.just(0.0), st.floats(1e-3, 0.1)), ne=st.integers(1, 30),
       lumped=st.booleans())
def test_bar_assembly_spd_property(rho, c, k, h, ne, lumped):
    s = assemble(build_mesh_1d(2.0, 0.8, 0.04, ne),
                 MaterialProperties(rho, c, k, h), lumped=lumped)
    assert np.linalg.eigvalsh(s.capacity).min() > 0
    K = s.conductance
    assert np.allclose(K, K.T)
    if h > 0:
        assert np.linalg.eigvalsh(K).min() > 0
