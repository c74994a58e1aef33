import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randmetric.errors import BadParameter
from randmetric.fields import GridSpec, assemble_metric, sample_angular, sample_radial
from randmetric.geomlab import (
    cell_inverse_metric,
    discrete_diameter,
    discrete_spectrum,
    distance_average,
    flat_diameter,
    flat_metric,
    flat_spectrum,
    flat_symbol,
    grid_graph,
    integrability_certificate,
    metric_rho,
    sandwich_check_diam,
    sandwich_check_eig,
    shortest_paths,
    stiffness_matrix,
)
from randmetric.spectrum import power_law, torus_basis


@pytest.fixture(scope="module")
def grid8():
    return GridSpec(3, 8)


@pytest.fixture(scope="module")
def random_metric(grid8):
    basis = torus_basis(3, 1, lam_max=3)  # max |k|_inf = 1, fits m = 8
    r = sample_radial(basis, power_law(1), grid8, 42)
    return assemble_metric(r, sample_angular(basis, power_law(1), grid8, 42))


def test_graph_symmetric_and_degree(grid8):
    A = grid_graph(flat_metric(grid8), grid8)
    assert (A - A.T).nnz == 0
    assert np.all(np.diff(A.indptr) == 26)


def test_flat_diameter_is_cube_diagonal():
    # with diagonal moves, the farthest node is (m/2, m/2, m/2) steps away: sqrt(3) * pi
    for m in (8, 16):
        d = flat_diameter(GridSpec(3, m))
        assert d.exact
        assert d.value == pytest.approx(math.pi * math.sqrt(3), rel=1e-12)


def test_sampled_diameter_mode():
    g = GridSpec(3, 18)
    d = discrete_diameter(flat_metric(g), g)
    assert not d.exact and d.sources == 64
    assert d.value <= math.pi * math.sqrt(3) + 1e-9


def test_scaled_metric_scales_diameter(grid8):
    g = 4.0 * flat_metric(grid8)
    assert discrete_diameter(g, grid8).value == pytest.approx(2 * flat_diameter(grid8).value, rel=1e-12)


def test_flat_spectrum_matches_symbol():
    for m in (8, 16):
        lam = flat_spectrum(GridSpec(3, m), 6).eigenvalues
        assert np.allclose(lam, flat_symbol(m, (1, 0, 0)), atol=1e-6)
    # the stencil symbol approaches the continuum eigenvalue 1 as m grows
    assert abs(flat_symbol(16, (1, 0, 0)) - 1) < 0.02


def test_eigensolver_matches_dense(random_metric, grid8):
    A = stiffness_matrix(random_metric, grid8).toarray()
    dense = np.linalg.eigvalsh(A)[1:19]
    assert np.allclose(discrete_spectrum(random_metric, grid8, 18).eigenvalues, dense, rtol=1e-10)


def test_eigensolver_is_deterministic(random_metric, grid8):
    a = discrete_spectrum(random_metric, grid8, 6).eigenvalues
    b = discrete_spectrum(random_metric, grid8, 6).eigenvalues
    assert a.tobytes() == b.tobytes()


def test_flat_spectrum_second_level():
    m = 8
    lam = flat_spectrum(GridSpec(3, m), 18).eigenvalues
    assert np.allclose(lam[6:18], flat_symbol(m, (1, 1, 0)), atol=1e-6)


def test_spectrum_scales_inverse(grid8):
    lam = discrete_spectrum(2.0 * flat_metric(grid8), grid8, 4).eigenvalues
    assert np.allclose(lam, flat_symbol(8, (1, 0, 0)) / 2, atol=1e-6)


def test_spectrum_rejects_small_grid():
    with pytest.raises(BadParameter):
        flat_spectrum(GridSpec(3, 6), 3)


def test_cell_inverse_metric_bounds(random_metric, grid8):
    rho = metric_rho(random_metric)
    w = np.linalg.eigvalsh(cell_inverse_metric(random_metric, grid8))
    assert np.all(w >= math.exp(-rho) - 1e-12) and np.all(w <= math.exp(rho) + 1e-12)


def test_sandwich_random_metric(random_metric, grid8):
    d = sandwich_check_diam(random_metric, grid8)
    e = sandwich_check_eig(random_metric, grid8, 6)
    assert d.passed and e.passed
    assert d.rho_hat > 0.1


def test_sandwich_detects_violation(grid8):
    # 4 I doubles every length with rho = ln 4; a reference shrunk by 3 > e^rho must fail
    class Fake:
        g1 = 4.0 * flat_metric(grid8)
    res = sandwich_check_diam(Fake(), grid8, reference=flat_diameter(grid8).value / 1.0)
    assert res.rho_hat == pytest.approx(math.log(4))
    bad = sandwich_check_diam(Fake(), grid8, reference=flat_diameter(grid8).value / 3.0)
    assert not bad.passed


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2 ** 32), st.floats(0.3, 2.0))
def test_sandwich_property(seed, scale):
    grid = GridSpec(3, 8)
    basis = torus_basis(3, 1, lam_max=3)
    beta = scale * power_law(1.5)(basis.lambdas)
    mf = assemble_metric(sample_radial(basis, beta, grid, seed), sample_angular(basis, beta, grid, seed))
    assert sandwich_check_diam(mf, grid).passed
    assert sandwich_check_eig(mf, grid, 4).passed


def test_shortest_paths_triangle(random_metric, grid8):
    d = shortest_paths(random_metric, grid8, [0, 1, 2])
    assert np.all(d[:, [0, 1, 2]].diagonal() == 0)
    assert np.all(d[0] <= d[0, 1] + d[1] + 1e-12)


def test_distance_average(grid8):
    flat = flat_metric(grid8)
    assert distance_average(flat, grid8, 0, 4) == pytest.approx(grid8.volume ** 2)
    v1 = distance_average(flat, grid8, 1, grid8.size)
    # exact mean of the graph distance: homogeneous, so one source suffices
    d0 = shortest_paths(flat, grid8, [0])[0]
    assert v1 == pytest.approx(grid8.volume ** 2 * d0.mean(), rel=1e-12)
    with pytest.raises(BadParameter):
        distance_average(flat, grid8, -1, 4)


def test_certificate_converges_below_threshold():
    cert = integrability_certificate(0.1, 1.0, 1.0, 3, "diameter", 10)
    assert cert.converges and math.isfinite(cert.tail_bound) and cert.remainder < 1e-12
    assert cert.tail_bound > 0


def test_certificate_diverges_at_threshold():
    s2 = 1.0
    cert = integrability_certificate(1 / (8 * s2), s2, 0.5, 3, "diameter", 1)
    assert not cert.converges and cert.witness >= 1
    assert math.isinf(cert.tail_bound)


def test_certificate_eigenvalue_kind_uses_beta():
    a = integrability_certificate(0.05, 1.0, 0.0, 3, "eigenvalue", 2, beta=0.0)
    b = integrability_certificate(0.05, 1.0, 0.0, 3, "eigenvalue", 2, beta=1.0)
    assert a.converges and b.converges and b.tail_bound > a.tail_bound


def test_certificate_matches_brute_sum():
    c, s2, alpha, n, N = 0.05, 0.5, 0.3, 3, 2
    cert = integrability_certificate(c, s2, alpha, n, "diameter", N)
    k = np.arange(N, 400, dtype=float)
    terms = 2 * n * np.exp(c * k * k + alpha * (k - 1) / 2 - (k - 1) ** 2 / (8 * s2))
    assert cert.tail_bound == pytest.approx(terms.sum(), rel=1e-12)


def test_certificate_bad_input():
    with pytest.raises(BadParameter):
        integrability_certificate(0.1, 0.0, 0, 3, "diameter", 1)
    with pytest.raises(BadParameter):
        integrability_certificate(0.1, 1.0, 0, 3, "volume", 1)


def test_certificate_near_threshold_small_variance():
    # terms peak near exp(1265) before decaying; the certificate must stay in log space
    s2 = 0.01
    cert = integrability_certificate(0.99 / (8 * s2), s2, 0.5, 3, "diameter", 1)
    assert cert.converges and cert.remainder < 1e-12
    assert 1000 < cert.log_tail_bound < math.inf and math.isinf(cert.tail_bound)
