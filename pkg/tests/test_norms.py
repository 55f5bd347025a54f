import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_torus.errors import InvalidArgument, SingularityError
from finsler_torus.norms import (
    Covector,
    EuclideanNorm,
    MinkowskiNorm,
    RandersNorm,
    TabulatedNorm,
    check_quadratic_convexity,
    cosphere,
    dual_norm,
    evaluate,
    fundamental_tensor,
    norm_from_spec,
    quartic_norm,
)

angles = st.floats(0.0, 2 * np.pi, allow_nan=False)


def _unit(a):
    return np.array([np.cos(a), np.sin(a)])


def fd_tensor_oracle(f, v, h):
    """Plain central differences of phi^2 / 2, written independently of the package."""
    L = lambda w: 0.5 * f(np.asarray(w, dtype=float)) ** 2
    e = np.eye(2) * h
    H = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            H[i, j] = (L(v + e[i] + e[j]) - L(v + e[i] - e[j]) - L(v - e[i] + e[j]) + L(v - e[i] - e[j])) / (4 * h * h)
    return H


def test_evaluate_examples(randers):
    assert evaluate(EuclideanNorm(), [3.0, 4.0]) == pytest.approx(5.0, abs=1e-15)
    assert evaluate(randers, [1.0, 0.0]) == pytest.approx(1.3, abs=1e-15)
    assert evaluate(randers, [-1.0, 0.0]) == pytest.approx(0.7, abs=1e-15)
    assert evaluate(quartic_norm(), [1.0, 1.0]) == pytest.approx(2**0.25, abs=1e-12)


def test_evaluate_zero_and_errors(randers):
    assert evaluate(randers, [0.0, 0.0]) == 0.0
    with pytest.raises(InvalidArgument):
        evaluate(randers, [np.nan, 1.0])
    with pytest.raises(InvalidArgument):
        evaluate(randers, [1.0, 2.0, 3.0])


def test_randers_validation():
    with pytest.raises(InvalidArgument):
        RandersNorm(np.eye(2), [1.2, 0.0])
    with pytest.raises(InvalidArgument):
        RandersNorm([[1.0, 2.0], [2.0, 1.0]], [0.0, 0.0])


def test_fundamental_tensor_euclidean_identity():
    for a in np.linspace(0, 6, 7):
        assert np.allclose(fundamental_tensor(EuclideanNorm(), 2.5 * _unit(a)), np.eye(2), atol=1e-14)


def test_fundamental_tensor_randers_matches_fd_oracle(randers):
    v = np.array([0.0, 1.0])
    g = fundamental_tensor(randers, v)
    coarse = fd_tensor_oracle(randers, v, 1e-3)
    fine = fd_tensor_oracle(randers, v, 1e-4)
    assert np.max(np.abs(coarse - fine)) < 1e-5
    assert np.max(np.abs(g - fine)) < 1e-5


def test_generic_tensor_matches_closed_form(randers):
    generic = MinkowskiNorm(lambda v: randers(v))
    v = np.stack([_unit(a) for a in np.linspace(0, 6, 13)])
    assert np.max(np.abs(generic.tensor(v) - randers.tensor(v))) < 1e-6


def test_fundamental_tensor_quartic_degenerate_on_axis():
    g = fundamental_tensor(quartic_norm(), [1.0, 0.0])
    assert abs(np.linalg.eigvalsh(g)[0]) < 1e-6
    oracle = fd_tensor_oracle(quartic_norm(), np.array([1.0, 0.0]), 1e-3)
    assert abs(np.linalg.eigvalsh(oracle)[0]) < 1e-5


def test_fundamental_tensor_rejects_zero(randers):
    with pytest.raises(SingularityError):
        fundamental_tensor(randers, [0.0, 0.0])


def test_convexity_examples(randers):
    rep = check_quadratic_convexity(EuclideanNorm(), 64)
    assert rep.passed and rep.min_eigenvalue == pytest.approx(1.0, abs=1e-12)
    rep = check_quadratic_convexity(quartic_norm(), 64)
    assert not rep.passed and rep.min_eigenvalue <= 1e-6
    # the worst direction is an axis
    assert min(abs(np.sin(rep.worst_direction)), abs(np.cos(rep.worst_direction))) < 1e-12
    rep = check_quadratic_convexity(randers, 64)
    assert rep.passed and rep.min_eigenvalue > 0.1
    with pytest.raises(InvalidArgument):
        check_quadratic_convexity(randers, 4)


def test_tabulated_quartic_fails_convexity():
    tab = TabulatedNorm.from_norm(quartic_norm())
    assert not check_quadratic_convexity(tab).passed
    tab = TabulatedNorm.from_norm(EuclideanNorm())
    assert check_quadratic_convexity(tab).passed


def test_dual_norm_examples(randers):
    assert dual_norm(EuclideanNorm(), [3.0, 4.0]) == pytest.approx(5.0, abs=1e-12)
    twice = MinkowskiNorm(lambda v: 2.0 * np.hypot(v[..., 0], v[..., 1]))
    assert dual_norm(twice, [1.0, 0.0]) == pytest.approx(0.5, abs=1e-12)
    # dense sampling of the indicatrix, 10^6 points
    psi = np.linspace(0, 2 * np.pi, 1_000_000, endpoint=False)
    u = np.stack([np.cos(psi), np.sin(psi)], axis=1)
    v = u / randers(u)[:, None]
    brute = np.max(v[:, 1])
    assert abs(dual_norm(randers, Covector([0.0, 1.0])) - brute) < 1e-5


def test_randers_closed_form_dual_matches_numeric(randers):
    alpha = np.stack([_unit(a) * (1 + a) for a in np.linspace(0, 6, 11)])
    assert np.max(np.abs(randers.dual(alpha) - dual_norm(randers, alpha))) < 1e-12


def test_cosphere_examples(randers):
    circ = np.array([c.components for c in cosphere(EuclideanNorm(), 64)])
    assert np.allclose(np.hypot(circ[:, 0], circ[:, 1]), 1.0, atol=1e-12)
    twice = MinkowskiNorm(lambda v: 2.0 * np.hypot(v[..., 0], v[..., 1]))
    big = np.array([c.components for c in cosphere(twice, 64)])
    assert np.allclose(np.hypot(big[:, 0], big[:, 1]), 2.0, atol=1e-6)
    cov = np.array([c.components for c in cosphere(randers, 256)])
    assert np.max(np.abs(dual_norm(randers, cov) - 1.0)) < 1e-6
    with pytest.raises(SingularityError):
        cosphere(quartic_norm(), 64)


@settings(max_examples=100, deadline=None)
@given(angles, st.floats(0.1, 5.0), st.floats(1e-3, 10.0))
def test_homogeneity(a, r, lam):
    n = RandersNorm([[2.0, 0.3], [0.3, 1.0]], [0.2, -0.4])
    v = r * _unit(a)
    assert abs(n(lam * v) - lam * n(v)) <= 1e-12 * lam * n(v)


def test_triangle_inequality():
    rng = np.random.default_rng(7)
    for n in (RandersNorm([[2.0, 0.3], [0.3, 1.0]], [0.2, -0.4]), TabulatedNorm.from_norm(RandersNorm(np.eye(2), [0.5, 0.1]))):
        v1 = rng.normal(size=(1000, 2))
        v2 = rng.normal(size=(1000, 2))
        assert np.all(n(v1 + v2) <= n(v1) + n(v2) + 1e-10)


def test_duality_consistency(randers):
    rng = np.random.default_rng(3)
    alpha = rng.normal(size=(100, 2))
    val = dual_norm(randers, alpha)
    vstar = randers.dual_direction(alpha)
    assert np.allclose(randers(vstar), 1.0, atol=1e-12)
    assert np.max(np.abs(np.sum(alpha * vstar, axis=1) - val)) < 1e-10
    # dual of the dual: phi(v) = max over the co-sphere of alpha(v)
    cov = np.array([c.components for c in cosphere(randers, 1024)])
    u = np.stack([_unit(a) for a in np.linspace(0, 2 * np.pi, 64, endpoint=False)])
    assert np.max(np.abs(np.max(u @ cov.T, axis=1) - randers(u))) < 1e-4


def test_symmetric_kinds_exact():
    u = np.stack([_unit(a) for a in np.linspace(0, 6, 50)])
    for n in (EuclideanNorm(), RandersNorm([[2.0, 0.3], [0.3, 1.0]], [0.0, 0.0])):
        assert np.array_equal(n(u), n(-u))
        assert n.symmetric
    assert not RandersNorm(np.eye(2), [0.3, 0.0]).symmetric


def test_spec_round_trip(randers):
    for n in (EuclideanNorm(), randers, TabulatedNorm.from_norm(randers)):
        m = norm_from_spec(n.spec())
        u = np.stack([_unit(a) for a in np.linspace(0, 6, 20)])
        assert np.array_equal(m(u), n(u))
    with pytest.raises(InvalidArgument):
        norm_from_spec({"kind": "polyhedral"})
    with pytest.raises(InvalidArgument):
        quartic_norm().spec()


def test_tabulated_norm_interpolates_support(randers):
    tab = TabulatedNorm.from_norm(randers)
    u = np.stack([_unit(a) for a in np.linspace(0, 6, 97)])
    assert np.max(np.abs(tab(u) - randers(u))) < 1e-7
    assert np.max(np.abs(tab.grad(u) - randers.grad(u))) < 1e-5
