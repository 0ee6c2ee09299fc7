import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lnksopt.euler import jet as J
from lnksopt.euler.basis import gauss_legendre, gauss_lobatto, lagrange
from lnksopt.euler.flux import roe_flux_array
from lnksopt.euler.gas import FreeStream, NonPhysicalStateError, conservative, normal_flux, primitive
from lnksopt.euler.mesh import InvalidMeshError, bump_height, bump_mesh
from lnksopt.euler.objective import BoundaryTrace, TargetRangeError, WallObjective
from lnksopt.euler.residual import EulerDG
from lnksopt.euler.solver import PtcConfig, solve_flow

FS = FreeStream()


# -- quadrature and bases ------------------------------------------------------------
@given(st.integers(1, 8))
def test_gauss_legendre_exact_to_degree_2n_minus_1(n):
    x, w = gauss_legendre(n)
    for k in range(2 * n):
        assert w @ x ** k == pytest.approx((1 - (-1) ** (k + 1)) / (k + 1), abs=1e-13)


@given(st.integers(2, 8))
def test_gauss_lobatto_exact_to_degree_2n_minus_3(n):
    x, w = gauss_lobatto(n)
    assert x[0] == -1.0 and x[-1] == 1.0
    for k in range(2 * n - 2):
        assert w @ x ** k == pytest.approx((1 - (-1) ** (k + 1)) / (k + 1), abs=1e-13)


@given(st.integers(1, 6))
def test_lagrange_cardinal_and_derivative(n):
    nodes = gauss_legendre(n + 1)[0]
    V, _ = lagrange(nodes, nodes)
    np.testing.assert_allclose(V, np.eye(n + 1), atol=1e-12)
    x = np.linspace(-1, 1, 7)
    V, D = lagrange(nodes, x)
    np.testing.assert_allclose(V.sum(1), 1.0, atol=1e-12)
    np.testing.assert_allclose(D.sum(1), 0.0, atol=1e-10)
    # reproduces x^n and its derivative
    np.testing.assert_allclose(V @ nodes ** n, x ** n, atol=1e-12)
    np.testing.assert_allclose(D @ nodes ** n, n * x ** (n - 1), atol=1e-10)


# -- jets ------------------------------------------------------------------------------
@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0.5, 2.0))
def test_jet_matches_analytic_derivatives(a0, b0):
    a, b = J.Jet.seed(np.array([[a0, b0]]))
    f = J.sqrt(a * b + a ** 2) / b
    g = lambda a, b: np.sqrt(a * b + a * a) / b
    e = 1e-5
    fd = np.array([(g(a0 + e, b0) - g(a0 - e, b0)) / (2 * e), (g(a0, b0 + e) - g(a0, b0 - e)) / (2 * e)])
    assert f.v[0] == pytest.approx(g(a0, b0), rel=1e-14)
    np.testing.assert_allclose(f.g[0], fd, rtol=1e-8)
    # Hessian oracle: central differences of the hand-derived gradient
    def grad(a, b):
        q = np.sqrt(a * b + a * a)
        return np.array([(b + 2 * a) / (2 * b * q), a / (2 * b * q) - q / (b * b)])

    np.testing.assert_allclose(grad(a0, b0), fd, rtol=1e-8)
    H = np.stack([(grad(a0 + e, b0) - grad(a0 - e, b0)) / (2 * e),
                  (grad(a0, b0 + e) - grad(a0, b0 - e)) / (2 * e)], axis=1)
    np.testing.assert_allclose(f.h[0], H, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(f.h[0], f.h[0].T, atol=1e-14)


def test_jet_absolute_and_where():
    a, = J.Jet.seed(np.array([[-2.0], [3.0]]))
    r = J.absolute(a)
    np.testing.assert_array_equal(r.v, [2.0, 3.0])
    np.testing.assert_array_equal(r.g[:, 0], [-1.0, 1.0])
    w = J.where(a.v > 0, a, -a)
    np.testing.assert_array_equal(w.v, [2.0, 3.0])


# -- gas and flux ----------------------------------------------------------------------
def random_states(rng, k):
    rho = rng.uniform(0.5, 1.5, k)
    v = rng.uniform(-0.5, 0.5, (k, 2))
    p = rng.uniform(0.4, 1.2, k)
    return np.stack(conservative(rho, v[:, 0], v[:, 1], p), axis=1)


def test_freestream():
    assert FS.rho == pytest.approx(1.0) and FS.c == pytest.approx(1.0)
    assert np.linalg.norm(FS.velocity) == pytest.approx(0.3)
    r, vx, vy, p = primitive(list(FS.conservative()))
    assert (r, vx, vy, p) == pytest.approx((1.0, 0.3, 0.0, 1 / 1.4))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_primitive_round_trip(seed):
    U = random_states(np.random.default_rng(seed), 10)
    back = np.stack(conservative(*primitive(list(U.T))), axis=1)
    np.testing.assert_allclose(back, U, rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_roe_flux_consistency_and_conservation(seed):
    rng = np.random.default_rng(seed)
    uL, uR = random_states(rng, 20), random_states(rng, 20)
    n = rng.standard_normal((20, 2))
    exact = np.stack(normal_flux(list(uL.T), list(n.T)), axis=1)
    np.testing.assert_allclose(roe_flux_array(uL, uL, n), exact, atol=1e-12)
    np.testing.assert_allclose(roe_flux_array(uL, uR, n), -roe_flux_array(uR, uL, -n), atol=1e-12)


def test_roe_flux_upwinds_supersonic_flow():
    uL = np.array([conservative(1.0, 3.0, 0.0, 1.0)])
    uR = np.array([conservative(0.8, 2.5, 0.1, 0.9)])
    n = np.array([[1.0, 0.0]])
    exact = np.stack(normal_flux(list(uL.T), list(n.T)), axis=1)
    np.testing.assert_allclose(roe_flux_array(uL, uR, n, entropy_fix=False), exact, atol=1e-12)


# -- mesh --------------------------------------------------------------------------------
def test_bump_mesh_sizes_and_wall():
    d = bump_mesh(32, 8, 1)
    assert d.n_cells == 256 and d.n_state == 4096
    wall = d.nodes[d.boundary_nodes("wall_bottom")]
    np.testing.assert_allclose(wall[:, 1], bump_height(wall[:, 0], 0.0625), atol=1e-15)
    assert np.all(d.check_valid(d.x0) > 0)


def test_folded_mesh_rejected():
    d = bump_mesh(4, 2, 1)
    x = d.x0.copy()
    x[1::2] *= -1.0
    with pytest.raises(InvalidMeshError):
        d.check_valid(x)


def test_mass_matrix_integrates_domain_area():
    d = bump_mesh(8, 2, 2, h=0.0)
    model = EulerDG(d)
    ones = np.tile([1.0, 0, 0, 0], d.n_cells * d.n_p)
    assert ones @ model.mass_matrix(d.x0) @ ones == pytest.approx(3.0 * 0.8, rel=1e-13)


# -- residual ------------------------------------------------------------------------------
@pytest.fixture(scope="module")
def coarse():
    d = bump_mesh(6, 2, 2)
    model = EulerDG(d)
    # additive noise: a purely multiplicative one keeps rho*v_y = 0 exactly, which sits
    # on the |v.n| kink of the entropy fix where the residual is not differentiable
    u = model.freestream_state() + 1e-3 * np.random.default_rng(0).standard_normal(d.n_state)
    return model, u, d.x0


@pytest.mark.parametrize("p", [1, 2, 3])
def test_free_stream_preserved_on_flat_channel(p):
    d = bump_mesh(6, 2, p, h=0.0)
    model = EulerDG(d)
    assert np.abs(model.residual(model.freestream_state(), d.x0)).max() < 1e-12


def test_residual_jacobians_match_finite_differences(coarse):
    model, u, x = coarse
    _, J_ = model.jacobians(u, x)
    rng = np.random.default_rng(1)
    du, dx = rng.standard_normal(u.size), 1e-2 * rng.standard_normal(x.size)
    e = 1e-6
    fd_u = (model.residual(u + e * du, x) - model.residual(u - e * du, x)) / (2 * e)
    fd_x = (model.residual(u, x + e * dx) - model.residual(u, x - e * dx)) / (2 * e)
    assert np.linalg.norm(J_["u"] @ du - fd_u) <= 1e-6 * np.linalg.norm(fd_u)
    assert np.linalg.norm(J_["x"] @ dx - fd_x) <= 1e-6 * np.linalg.norm(fd_x)


def test_second_derivatives_symmetric(coarse):
    model, u, x = coarse
    lam = np.random.default_rng(2).standard_normal(u.size)
    D = model.residual_derivatives(u, x, lam, ("uu", "ux", "xu", "xx"))
    assert abs(D["uu"] - D["uu"].T).max() < 1e-10
    assert abs(D["xx"] - D["xx"].T).max() < 1e-10
    assert abs(D["ux"] - D["xu"].T).max() < 1e-10


def test_nonphysical_state_raises(coarse):
    model, u, x = coarse
    bad = u.copy()
    bad[0::4] = -1.0
    with pytest.raises(NonPhysicalStateError):
        model.residual(bad, x)


# -- flow solver and objective ----------------------------------------------------------------
@pytest.fixture(scope="module")
def converged():
    d = bump_mesh(16, 4, 1)
    model = EulerDG(d)
    res = solve_flow(model, model.freestream_state(), d.x0, PtcConfig(tol=1e-11))
    return model, res


def test_flow_solver_converges_quadratically(converged):
    model, res = converged
    assert res.converged and res.steps <= 15
    assert res.history[-1] <= 1e-11
    assert np.linalg.norm(model.residual(res.u, model.disc.x0)) <= 1e-11


def test_flow_solver_terminal_rate_is_quadratic(converged):
    # the final step lands on the round-off floor (~1e-15), so the rate is read
    # from the last steps that end above it
    _, res = converged
    h = [r for r in res.history if r > 1e-13]
    assert np.log(h[-1]) / np.log(h[-2]) >= 1.7
    order = np.log(h[-1] / h[-2]) / np.log(h[-2] / h[-3])
    assert order >= 1.7


def test_flow_solver_from_converged_state_takes_no_steps(converged):
    model, res = converged
    again = solve_flow(model, res.u, model.disc.x0, PtcConfig(tol=1e-11))
    assert again.converged and again.steps == 0
    np.testing.assert_array_equal(again.u, res.u)


def test_entropy_error_decreases_with_refinement():
    errs = []
    for nx, ny in ((8, 2), (16, 4)):
        d = bump_mesh(nx, ny, 2)
        model = EulerDG(d)
        res = solve_flow(model, model.freestream_state(), d.x0)
        errs.append(model.entropy_error(res.u, d.x0))
    assert errs[1] < 0.5 * errs[0]


def test_objective_vanishes_on_own_trace(converged):
    model, res = converged
    x = model.disc.x0
    trace = BoundaryTrace.from_solution(model, res.u, x)
    obj = WallObjective(model, trace)
    assert obj.value(res.u, x) < 1e-24
    back = BoundaryTrace.from_json(trace.to_json())
    np.testing.assert_array_equal(back.coeffs, trace.coeffs)
    with pytest.raises(TargetRangeError):
        trace(np.array([5.0]))


def test_objective_gradients_match_finite_differences(converged):
    model, res = converged
    x = model.disc.x0
    trace = BoundaryTrace.from_solution(model, model.freestream_state(), x)
    obj = WallObjective(model, trace)
    u = res.u
    I, Iu, Ix = obj.gradients(u, x)
    rng = np.random.default_rng(4)
    du, dx = rng.standard_normal(u.size), 1e-2 * rng.standard_normal(x.size)
    e = 1e-6
    fd_u = (obj.value(u + e * du, x) - obj.value(u - e * du, x)) / (2 * e)
    fd_x = (obj.value(u, x + e * dx) - obj.value(u, x - e * dx)) / (2 * e)
    assert Iu @ du == pytest.approx(fd_u, rel=1e-6)
    assert Ix @ dx == pytest.approx(fd_x, rel=1e-6)
    H = obj.derivatives(u, x, ("uu",))["uu"]
    fd_h = (obj.gradients(u + e * du, x)[1] - obj.gradients(u - e * du, x)[1]) / (2 * e)
    assert np.linalg.norm(H @ du - fd_h) <= 1e-6 * np.linalg.norm(fd_h)
