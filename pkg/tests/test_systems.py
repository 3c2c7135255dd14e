from fractions import Fraction

import numpy as np
import pytest

from kdilation.systems import (
    Domain,
    catalog_entries,
    evaluate,
    fd_jacobian,
    iterate,
    jacobian,
    lipschitz_bound,
    make_system,
)

NONLINEAR = [("standard_map", {"K": 1.0}), ("standard_map", {"K": 1.5}),
             ("perturbed_cat", {"eps": 0.02}), ("perturbed_cat", {"eps": 0.05})]
ALL = [(e.id, dict(e.params)) for e in catalog_entries()] + NONLINEAR


def _random_points(system, count, seed):
    rng = np.random.default_rng(seed)
    return system.domain.from_unit(rng.uniform(size=(count, system.d)))


def test_identity_evaluate():
    s = make_system("identity")
    np.testing.assert_array_equal(evaluate(s, [0.3, 0.7]), [0.3, 0.7])


def test_cat_map_evaluate_matches_rational_arithmetic():
    x = [Fraction(1, 2), Fraction(1, 2)]
    exact = [(2 * x[0] + x[1]) % 1, (x[0] + x[1]) % 1]
    got = evaluate(make_system("cat_map"), [0.5, 0.5])
    np.testing.assert_array_equal(got, [float(v) for v in exact])
    np.testing.assert_array_equal(got, [0.5, 0.0])


def test_doubling_evaluate():
    np.testing.assert_array_equal(evaluate(make_system("doubling"), [0.75]), [0.5])


def test_dimension_mismatch_is_an_error():
    with pytest.raises(ValueError):
        evaluate(make_system("cat_map"), [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        jacobian(make_system("doubling"), [0.1, 0.2])


def test_constant_jacobians():
    cat = make_system("cat_map")
    for x in _random_points(cat, 5, 1):
        np.testing.assert_array_equal(jacobian(cat, x), [[2, 1], [1, 1]])
    np.testing.assert_array_equal(jacobian(make_system("doubling"), [0.4]), [[2.0]])


@pytest.mark.parametrize("sid,params", ALL)
def test_jacobian_matches_finite_differences(sid, params):
    s = make_system(sid, **params)
    for x in _random_points(s, 100, 7):
        J = jacobian(s, x)
        fd = fd_jacobian(s, x, h=1e-6)
        assert np.linalg.norm(J - fd) <= 1e-5 * max(1.0, np.linalg.norm(J))


def test_standard_map_jacobian_at_origin():
    s = make_system("standard_map", K=1.0)
    J = jacobian(s, [0.0, 0.0])
    np.testing.assert_allclose(J, fd_jacobian(s, [0.0, 0.0]), rtol=1e-5, atol=1e-8)
    np.testing.assert_allclose(J, [[2.0, 1.0], [1.0, 1.0]])


def test_iterate_zero_steps():
    orbit = iterate(make_system("standard_map"), [0.2, 0.4], 0)
    assert orbit.length == 0
    np.testing.assert_array_equal(orbit.points, [[0.2, 0.4]])


def test_cat_map_fixed_point():
    orbit = iterate(make_system("cat_map"), [0.0, 0.0], 10)
    assert orbit.length == 10
    np.testing.assert_array_equal(orbit.points, np.zeros((11, 2)))


def test_doubling_orbit_against_exact_rationals():
    x = Fraction(1, 3)
    exact = [x]
    for _ in range(2):
        exact.append((2 * exact[-1]) % 1)
    orbit = iterate(make_system("doubling"), [1 / 3], 2)
    np.testing.assert_allclose(orbit.points[:, 0], [float(v) for v in exact], atol=1e-15)


@pytest.mark.parametrize("sid,params", ALL)
def test_orbit_invariants_and_forward_invariance(sid, params):
    s = make_system(sid, **params)
    x0 = s.domain.center() * 0.87 + 0.01
    orbit = iterate(s, x0, 10_000)
    np.testing.assert_array_equal(orbit.points[0], x0)
    np.testing.assert_array_equal(orbit.points[1:], s.step(orbit.points[:-1]))
    assert np.all(s.domain.contains(orbit.points))


def test_torus_wrap_stays_below_one():
    W = Domain.torus(1).wrap(np.array([-1e-18, -0.0, 1.0, 2.5]))
    assert np.all((W >= 0) & (W < 1))


def test_lipschitz_bounds():
    assert lipschitz_bound(make_system("identity")) == 1.0
    eig = np.linalg.eigvalsh(np.array([[2.0, 1.0], [1.0, 1.0]]))
    assert lipschitz_bound(make_system("cat_map")) == pytest.approx(max(abs(eig)), rel=1e-15)
    assert lipschitz_bound(make_system("cat_map")) == pytest.approx((3 + 5 ** 0.5) / 2)
    assert lipschitz_bound(make_system("contraction", rate=0.5)) == 1.0


def _uncapped(system):
    from dataclasses import replace

    return replace(system, lipschitz_cap=None)


@pytest.mark.parametrize("sid,params", NONLINEAR)
def test_lipschitz_sampling_is_monotone_and_below_the_cap(sid, params):
    s = make_system(sid, **params)
    free = _uncapped(s)
    values = [lipschitz_bound(free, n) for n in (1, 4, 16, 64, 256, 1024)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] <= s.lipschitz_cap + 1e-12
    assert values[-1] >= 0.99 * s.lipschitz_cap


def test_lipschitz_rejects_bad_samples():
    with pytest.raises(ValueError):
        lipschitz_bound(make_system("cat_map"), 0)


def test_make_system_errors():
    with pytest.raises(ValueError, match="unknown system"):
        make_system("henon")
    with pytest.raises(ValueError, match="no parameter"):
        make_system("cat_map", K=1)
    with pytest.raises(ValueError):
        make_system("perturbed_cat", eps=0.2)


def test_catalog_ground_truth():
    truths = {e.id: e.builder(**e.params).ground_truth for e in catalog_entries()}
    assert truths["standard_map"] is None and truths["perturbed_cat"] is None
    lam = np.log((3 + np.sqrt(5)) / 2)
    np.testing.assert_allclose(truths["cat_map"], [lam, -lam])
    np.testing.assert_allclose(truths["diag_toral"], [np.log(3), np.log(2)])


def test_system_is_immutable():
    s = make_system("standard_map", K=1.2)
    with pytest.raises(Exception):
        s.d = 3
    with pytest.raises(TypeError):
        s.params["K"] = 3.0
