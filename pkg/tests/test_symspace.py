import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randmetric.errors import NonZeroTrace, NotPositiveDefinite, NotUnimodular
from randmetric.symspace import (
    cartan_decompose,
    congruence_act,
    fiber_distance,
    random_rotation,
    random_traceless,
    random_unimodular,
    skew_exp,
    spd_exp,
    spd_log,
)

dims = st.integers(min_value=2, max_value=6)
seeds = st.integers(min_value=0, max_value=2**32 - 1)
norms = st.floats(min_value=0.0, max_value=10.0)


def traceless_with_norm(rng, n, norm, size=None):
    x = random_traceless(rng, n, 1.0, size)
    return x * (norm / np.maximum(np.linalg.norm(x, axis=(-2, -1)), 1e-300))[..., None, None]


@settings(max_examples=200, deadline=None)
@given(dims, seeds, norms)
def test_exp_log_round_trip(n, seed, norm):
    rng = np.random.default_rng(seed)
    x = traceless_with_norm(rng, n, norm)
    p = spd_exp(x)
    assert np.allclose(spd_log(p), x, atol=1e-8)
    if norm <= 5:
        assert abs(np.linalg.det(p) - 1) < 1e-10
    assert np.allclose(p, p.T)


@settings(max_examples=200, deadline=None)
@given(dims, seeds, st.floats(min_value=0.0, max_value=2.0))
def test_fiber_distance_invariant_under_unimodular_action(n, seed, spread):
    rng = np.random.default_rng(seed)
    p, q = spd_exp(random_traceless(rng, n, 1.0, size=2))
    h = random_unimodular(rng, n, spread)
    d0 = fiber_distance(p, q)
    d1 = fiber_distance(congruence_act(h, p), congruence_act(h, q))
    assert abs(d0 - d1) < 1e-8


@settings(max_examples=200, deadline=None)
@given(dims, seeds)
def test_triangle_inequality(n, seed):
    rng = np.random.default_rng(seed)
    p, q, r = spd_exp(random_traceless(rng, n, 1.5, size=3))
    assert fiber_distance(p, r) <= fiber_distance(p, q) + fiber_distance(q, r) + 1e-9


@settings(max_examples=200, deadline=None)
@given(dims, seeds, st.floats(min_value=0.0, max_value=4.0))
def test_cartan_reconstructs(n, seed, norm):
    rng = np.random.default_rng(seed)
    p = congruence_act(random_rotation(rng, n), spd_exp(traceless_with_norm(rng, n, norm)))
    f = cartan_decompose(p)
    assert np.allclose(f.reconstruct(), p, atol=1e-9 * max(1.0, np.abs(p).max()))
    assert np.all(np.diff(f.b) <= 1e-12)
    assert abs(f.b.sum()) < 1e-12
    assert abs(np.linalg.det(f.k) - 1) < 1e-12
    assert np.allclose(f.k.T @ f.k, np.eye(n), atol=1e-12)


def test_distance_from_identity_of_diagonal():
    # d(I, exp(2b)) = |b|: eigenvalues exp(2 b_i) give (1/4) sum (2 b_i)^2
    b = np.array([0.3, -0.1, -0.2])
    assert fiber_distance(np.eye(3), np.diag(np.exp(2 * b))) == pytest.approx(np.linalg.norm(b), abs=1e-14)


def test_distance_symmetric_and_zero_on_diagonal():
    rng = np.random.default_rng(1)
    p, q = spd_exp(random_traceless(rng, 4, 1.0, size=2))
    assert fiber_distance(p, q) == pytest.approx(fiber_distance(q, p), abs=1e-12)
    assert fiber_distance(p, p) == pytest.approx(0.0, abs=1e-7)


def test_exp_rejects_trace():
    with pytest.raises(NonZeroTrace):
        spd_exp(np.diag([1.0, 0.0, 0.0]))


def test_log_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        spd_log(np.diag([2.0, -1.0, -0.5]))


def test_log_projects_scaling_away():
    x = spd_log(np.diag([np.e ** 3, 1.0, 1.0]))
    assert np.allclose(x, np.diag([2.0, -1.0, -1.0]), atol=1e-14)


def test_log_examples():
    assert np.allclose(spd_log(np.eye(3)), 0.0, atol=1e-15)
    assert np.allclose(spd_log(np.diag(np.exp([2.0, -1.0, -1.0]))), np.diag([2.0, -1.0, -1.0]), atol=1e-14)
    k = random_rotation(np.random.default_rng(3), 3)
    p = k @ np.diag(np.exp([1.0, -1.0, 0.0])) @ k.T
    assert np.allclose(spd_log(p), k @ np.diag([1.0, -1.0, 0.0]) @ k.T, atol=1e-12)


def test_exp_examples():
    assert np.allclose(spd_exp(np.zeros((3, 3))), np.eye(3), atol=1e-15)
    assert np.allclose(spd_exp(np.diag([1.0, -1.0, 0.0])), np.diag([np.e, 1 / np.e, 1.0]), atol=1e-14)


def test_exp_matches_power_series():
    x = random_traceless(np.random.default_rng(4), 3, 1.0)
    term, total = np.eye(3), np.eye(3)
    for m in range(1, 41):
        term = term @ x / m
        total = total + term
    assert np.allclose(spd_exp(x), total, atol=1e-12)


def test_congruence_rejects_bad_det():
    with pytest.raises(NotUnimodular):
        congruence_act(2 * np.eye(3), np.eye(3))


def test_skew_exp_is_rotation():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((50, 4, 4))
    k = skew_exp(a - np.swapaxes(a, -1, -2))
    assert np.allclose(k @ np.swapaxes(k, -1, -2), np.eye(4), atol=1e-12)
    assert np.allclose(np.linalg.det(k), 1.0, atol=1e-12)


# vectorized 10^4-case sweep of every kernel property


N_CASES = 10_000


def test_batch_round_trip():
    rng = np.random.default_rng(20240602)
    x = traceless_with_norm(rng, 3, rng.uniform(0.0, 10.0, N_CASES))
    assert np.max(np.abs(spd_log(spd_exp(x)) - x)) < 1e-8


@pytest.fixture(scope="module")
def batch():
    # |X|_F <= 5: eigenvalue spread up to e^8, where float64 still stores
    # a unimodular matrix to ~1e-13
    rng = np.random.default_rng(20240601)
    n = 3
    x = traceless_with_norm(rng, n, rng.uniform(0.0, 5.0, (N_CASES, 3)))
    p, q, r = (spd_exp(x[:, i]) for i in range(3))
    h = random_unimodular(rng, n, 1.0, size=N_CASES)
    return x, p, q, r, h


def test_batch_det_one(batch):
    _, p, q, r, _ = batch
    for a in (p, q, r):
        assert np.max(np.abs(np.linalg.det(a) - 1)) < 1e-10


def test_batch_invariance(batch):
    _, p, q, _, h = batch
    d0 = fiber_distance(p, q)
    d1 = fiber_distance(congruence_act(h, p), congruence_act(h, q))
    assert np.max(np.abs(d0 - d1)) < 1e-8


def test_batch_triangle(batch):
    _, p, q, r, _ = batch
    assert np.all(fiber_distance(p, r) <= fiber_distance(p, q) + fiber_distance(q, r) + 1e-9)


def test_batch_cartan(batch):
    _, p, *_ = batch
    f = cartan_decompose(p)
    err = np.linalg.norm(f.reconstruct() - p, axis=(-2, -1)) / np.linalg.norm(p, axis=(-2, -1))
    assert np.max(err) < 1e-9
    d = fiber_distance(np.broadcast_to(np.eye(3), p.shape), p)
    assert np.max(np.abs(d - np.linalg.norm(f.b, axis=-1))) < 1e-9


def test_batch_symmetry(batch):
    _, p, q, *_ = batch
    assert np.max(np.abs(fiber_distance(p, q) - fiber_distance(q, p))) < 1e-12
