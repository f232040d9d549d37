import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from ymenergy import io, lie, paths
from ymenergy.errors import BadDimensions, RelationViolated


def _fd_directional(t, V, h=1e-5):
    Ep = paths.energy(paths.retract(t, V, h))
    Em = paths.energy(paths.retract(t, V, -h))
    return (Ep - Em) / (2 * h)


def _critical_u1(N, genus=1, angle=0.8, T=1.0):
    """All paths rotate by the same angle; relation holds because the product telescopes."""
    X = np.full((2 * genus, 1, 1), 1j * angle)
    # alpha(0) beta(1)^-1 alpha(1)^-1 beta(0) = e^{-2i angle} per handle for g0 = 1
    g0 = np.ones((2 * genus, 1, 1), complex)
    z = np.exp(-2j * angle * genus) * np.ones((1, 1))
    return paths.one_parameter_tuple(g0, X, N, z=z, total_area=T, group=lie.U1)


def test_winding_energy_closed_form():
    # U(1) alpha = e^{2 pi i n t}, beta constant: c/(2T) * (2 pi n)^2
    for n in (1, 2, 3):
        t = paths.winding_tuple(n, 64, 1, 1.0)
        assert math.isclose(paths.energy(t, c=1.0), 0.5 * (2 * math.pi * n) ** 2, rel_tol=1e-12)
        assert math.isclose(paths.energy(t), 0.5 * (2 * math.pi * n) ** 2 * 4, rel_tol=1e-12)


def test_energy_by_direct_summation():
    t = paths.random_tuple(3, 10, lie.SU2, 2, 1.7)
    total = 0.0
    for p in range(4):
        for k in range(10):
            h = t.paths[p, k].conj().T @ t.paths[p, k + 1]
            X = scipy.linalg.logm(h)
            total += -np.trace(X @ X).real
    expected = 8.0 / (2 * 1.7) * 10 * total
    assert math.isclose(paths.energy(t), expected, rel_tol=1e-10)


def test_constant_tuple_has_zero_energy():
    # a commuting pair satisfies the trivial relation
    a = lie.exp(0.3 * lie.SU2.basis[2])
    b = lie.exp(-0.7 * lie.SU2.basis[2])
    t = paths.one_parameter_tuple(np.stack([a, b]), np.zeros((2, 2, 2), complex), 8)
    assert paths.energy(t) < 1e-28
    assert paths.geodesic_residual(t) < 1e-12
    assert paths.relation_residual(t) < 1e-15


def test_one_parameter_path_has_constant_log_derivative():
    rng = np.random.default_rng(2)
    g0 = lie.random_group(rng, 1.0, lie.SU3)
    X = lie.random_algebra(rng, lie.SU3, 1.5)
    tk = np.arange(17) / 16
    p = g0 @ lie.exp(tk[:, None, None] * X)
    np.testing.assert_allclose(paths.log_derivative(p, lie.SU3), np.broadcast_to(X, (16, 3, 3)), atol=1e-12)


def test_geodesic_residual_of_kinked_path_by_hand():
    N = 8
    X1 = 0.4 * lie.SU2.basis[0]
    X2 = 0.4 * lie.SU2.basis[1]
    tk = np.arange(N + 1) / N
    first = lie.exp(tk[: N // 2 + 1, None, None] * X1)
    second = first[-1] @ lie.exp(tk[1: N // 2 + 1][:, None, None] * X2)
    kinked = np.concatenate([first, second])
    # the relation is irrelevant to the residual; beta is left constant
    t = paths.make_tuple(np.stack([kinked, np.broadcast_to(np.eye(2), kinked.shape)]), lie.SU2)
    expected = float(lie.norm(X2 - X1)) * N
    assert math.isclose(paths.geodesic_residual(t), expected, rel_tol=1e-10)


def test_relation_product_by_hand():
    rng = np.random.default_rng(5)
    P = lie.random_group(rng, 1.0, lie.SU2, shape=(4, 3))
    t = paths.make_tuple(P, lie.SU2, z=None)
    d = lambda m: m.conj().T
    expected = np.eye(2)
    for i in range(2):
        a, b = P[2 * i], P[2 * i + 1]
        expected = expected @ a[0] @ d(b[-1]) @ d(a[-1]) @ b[0]
    np.testing.assert_allclose(paths.relation_product(t), expected, atol=1e-14)
    assert math.isclose(paths.relation_residual(t), np.linalg.norm(expected - np.eye(2)), rel_tol=1e-12)


def test_one_parameter_tuple_rejects_bad_endpoints():
    g0 = lie.random_group(9, 1.0, lie.SU2, shape=(2,))
    X = lie.random_algebra(np.random.default_rng(9), lie.SU2, 1.0, shape=(2,))
    with pytest.raises(RelationViolated):
        paths.one_parameter_tuple(g0, X, 8)


def test_tuple_validation():
    with pytest.raises(BadDimensions):
        paths.make_tuple(np.ones((3, 4, 1, 1)), lie.U1)
    with pytest.raises(BadDimensions):
        paths.make_tuple(np.ones((2, 1, 1, 1)), lie.U1)
    with pytest.raises(BadDimensions):
        paths.make_tuple(np.ones((2, 4, 2, 2)), lie.U1)
    with pytest.raises(RelationViolated):
        paths.make_tuple(np.ones((2, 4, 2, 2)), lie.SU2, z=np.diag([1j, -1j]))


@pytest.mark.parametrize("group", [lie.U1, lie.SU2, lie.SU3], ids=lambda g: g.name)
def test_energy_gradient_matches_finite_differences(group):
    rng = np.random.default_rng(11)
    t = paths.random_tuple(rng, 6, group, 1, 0.8)
    G = paths.energy_gradient(t)
    for _ in range(5):
        V = paths.random_variation(rng, t)
        fd = _fd_directional(t, V)
        an = float(lie.inner(G, V).sum())
        assert abs(fd - an) <= 1e-6 * max(1.0, abs(an))


def test_interior_gradient_vanishes_on_one_parameter_paths():
    t = _critical_u1(12)
    G = paths.energy_gradient(t)
    assert np.max(np.abs(G[:, 1:-1])) < 1e-8
    rng = np.random.default_rng(4)
    X = lie.random_algebra(rng, lie.SU2, 1.0, shape=(2,))
    g0 = lie.random_group(rng, 1.0, lie.SU2, shape=(2,))
    tk = np.arange(11) / 10
    free = paths.make_tuple(g0[:, None] @ lie.exp(tk[None, :, None, None] * X[:, None]), lie.SU2,
                            z=None)
    assert np.max(np.abs(paths.energy_gradient(free)[:, 1:-1])) < 1e-8


def test_retract_zero_step_copies():
    t = paths.random_tuple(1, 4)
    r = paths.retract(t, np.zeros_like(t.paths), 0.0)
    np.testing.assert_array_equal(r.paths, t.paths)
    assert r.paths is not t.paths
    with pytest.raises(BadDimensions):
        paths.retract(t, np.zeros((1, 1)), 1.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), gname=st.sampled_from(["su2", "su3"]))
def test_energy_and_residuals_are_adjoint_invariant(seed, gname):
    group = lie.get_group(gname)
    t = paths.random_tuple(seed, 5, group, 1, 1.0)
    g = lie.random_group(seed + 1, 3.0, group)
    s = paths.adjoint_act(g, t)
    assert math.isclose(paths.energy(s), paths.energy(t), rel_tol=1e-10)
    assert math.isclose(paths.geodesic_residual(s), paths.geodesic_residual(t), rel_tol=1e-8, abs_tol=1e-10)
    assert paths.relation_residual(s) < 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), k=st.integers(1, 3))
def test_energy_scales_inversely_with_area(seed, k):
    t = paths.random_tuple(seed, 6, lie.SU2, 1, 1.0)
    E = paths.energy(t)
    assert paths.energy(t.with_area(2.0**k)) == E / 2.0**k


def test_random_smooth_tuple_satisfies_relation():
    for genus in (1, 2, 3):
        st_ = paths.random_smooth_tuple(genus, lie.SU3, genus)
        assert paths.relation_residual(st_.sample(7)) < 1e-13


def test_smooth_velocity_matches_finite_differences():
    s = paths.random_smooth_tuple(3, lie.SU2, 1)
    t = np.array([0.1, 0.37, 0.8])
    h = 1e-6
    gp, gm, g0 = s.evaluate(t + h), s.evaluate(t - h), s.evaluate(t)
    fd = g0.conj().swapaxes(-1, -2) @ (gp - gm) / (2 * h)
    np.testing.assert_allclose(s.velocity(t), fd, atol=1e-8)


def test_discrete_energy_converges_to_continuum_energy():
    s = paths.random_smooth_tuple(4, lie.SU2, 1)
    Ec = s.continuum_energy()
    errs = [abs(paths.energy(s.sample(N)) - Ec) for N in (16, 32, 64)]
    # second order: Richardson ratio close to 4
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5
    richardson = (4 * paths.energy(s.sample(64)) - paths.energy(s.sample(32))) / 3
    assert abs(richardson - Ec) < 1e-2 * errs[2]


def test_smooth_winding_tuple():
    s = paths.smooth_winding_tuple(1, bump=0.0)
    t = s.sample(32)
    assert math.isclose(paths.energy(t), s.continuum_energy(), rel_tol=1e-12)
    assert paths.relation_residual(t) < 1e-14


def test_tuple_json_round_trip(tmp_path):
    t = paths.random_tuple(8, 5, lie.SU3, 2, 0.6)
    f = tmp_path / "t.json"
    io.save_tuple(t, f)
    back = io.load_tuple(f)
    np.testing.assert_array_equal(back.paths, t.paths)
    np.testing.assert_array_equal(back.z, t.z)
    assert back.total_area == t.total_area and back.group is t.group
