import math

import numpy as np
import pytest

from randmetric.distances import (
    CSV_SCHEMA,
    DistanceRecord,
    batch_distances,
    fiberwise_distance_field,
    lipschitz_rho,
    omega2_sq,
    read_records_csv,
    write_records_csv,
)
from randmetric.fields import (
    GridSpec,
    assemble_metric,
    radial_from_coefficients,
    sample_angular,
    sample_radial,
    sample_seeds,
)
from randmetric.spectrum import decay_eval, power_law, torus_basis


@pytest.fixture(scope="module")
def setup():
    return torus_basis(3, 1, lam_max=16), GridSpec(3, 16), power_law(2)


def zero_field(basis, grid):
    return radial_from_coefficients(basis, np.zeros(basis.J), grid, np.zeros((basis.J, 3)))


def test_zero_field(setup):
    basis, grid, _ = setup
    r = zero_field(basis, grid)
    assert omega2_sq(r, grid) == 0 and lipschitz_rho(r, grid) == 0
    assert np.all(fiberwise_distance_field(assemble_metric(r), grid) < 1e-7)


def test_constant_field_rho(setup):
    basis, grid, _ = setup
    r = zero_field(basis, grid)
    r.b = np.tile([0.3, -0.3, 0.0], (grid.size, 1))
    assert lipschitz_rho(r, grid) == pytest.approx(0.6)


def test_single_mode(setup):
    basis, grid, _ = setup
    beta = np.zeros(basis.J)
    beta[10] = 0.4
    xi = np.zeros((basis.J, 3))
    xi[10] = [1.0, -2.0, 0.5]
    r = radial_from_coefficients(basis, beta, grid, xi)
    pxi = xi[10] - xi[10].mean()
    assert omega2_sq(r, grid) == pytest.approx(0.16 * pxi @ pxi, abs=1e-10)


def test_quadrature_equals_coefficient_sum(setup):
    basis, grid, sch = setup
    worst = 0.0
    for s in sample_seeds(5, 1000):
        r = sample_radial(basis, sch, grid, s)
        q, c = omega2_sq(r, grid), r.coefficient_omega2_sq()
        worst = max(worst, abs(q - c) / c)
    assert worst < 1e-9


def test_batch_matches_single(setup):
    basis, grid, sch = setup
    seeds = sample_seeds(17, 40)
    d = batch_distances(basis, sch, grid, seeds, chunk=16, with_coefficients=True)
    for i, s in enumerate(seeds):
        r = sample_radial(basis, sch, grid, s)
        assert d["omega2_sq"][i] == pytest.approx(omega2_sq(r, grid), rel=1e-12)
        assert d["rho"][i] == pytest.approx(lipschitz_rho(r, grid), rel=1e-12)
        assert d["omega2_sq_coef"][i] == pytest.approx(r.coefficient_omega2_sq(), rel=1e-12)


def test_rayleigh_quotient_oracle(setup):
    basis, grid, sch = setup
    seed = 31
    r = sample_radial(basis, sch, grid, seed)
    mf = assemble_metric(r, sample_angular(basis, sch, grid, seed))
    rho = lipschitz_rho(r, grid)
    rng = np.random.default_rng(0)
    nodes = rng.choice(grid.size, 100, replace=False)
    xi = rng.standard_normal((1000, 3))
    g = mf.g1[nodes]
    q = np.einsum("ki,pij,kj->pk", xi, g, xi) / np.sum(xi ** 2, axis=1)
    assert np.max(np.abs(np.log(q))) <= rho + 1e-9
    # the extreme eigenvector of the node holding the supremum attains it
    node = np.argmax(np.max(np.abs(r.b), axis=1))
    w = np.linalg.eigvalsh(mf.g1[node])
    assert max(abs(math.log(w[0])), abs(math.log(w[-1]))) == pytest.approx(rho, abs=1e-6)


def test_rho_independent_of_angular(setup):
    basis, grid, sch = setup
    r = sample_radial(basis, sch, grid, 8)
    vals = []
    for s in (1, 2):
        mf = assemble_metric(r, sample_angular(basis, sch, grid, s))
        vals.append(float(np.max(np.abs(np.log(np.linalg.eigvalsh(mf.g1))))))
    assert vals[0] == pytest.approx(vals[1], abs=1e-9)
    assert vals[0] == pytest.approx(lipschitz_rho(r, grid), abs=1e-9)


def test_scaling_linear(setup):
    basis, grid, sch = setup
    beta = decay_eval(sch, basis)
    a = sample_radial(basis, beta, grid, 9)
    b = sample_radial(basis, 2.5 * beta, grid, 9)
    assert math.sqrt(omega2_sq(b, grid)) == pytest.approx(2.5 * math.sqrt(omega2_sq(a, grid)), rel=1e-12)
    assert lipschitz_rho(b, grid) == pytest.approx(2.5 * lipschitz_rho(a, grid), rel=1e-12)


def test_fiberwise_field(setup):
    basis, grid, sch = setup
    r = sample_radial(basis, sch, grid, 3)
    mf = assemble_metric(r, sample_angular(basis, sch, grid, 3))
    d = fiberwise_distance_field(mf, grid)
    assert np.max(np.abs(d - np.linalg.norm(r.b, axis=1))) < 1e-9
    assert np.sum(d ** 2) * grid.weight == pytest.approx(omega2_sq(r, grid), rel=1e-9)


def test_fiberwise_example(setup):
    basis, grid, _ = setup
    r = zero_field(basis, grid)
    r.b = np.tile([1.0, -1.0, 0.0], (grid.size, 1))
    mf = assemble_metric(r, sample_angular(basis, power_law(2), grid, 1))
    assert np.allclose(fiberwise_distance_field(mf, grid), math.sqrt(2), atol=1e-9)


def test_csv_round_trip(tmp_path):
    recs = [DistanceRecord(2 ** 64 - 1, 1.0 / 3, 0.1, "power:s=2", "grid(n=3,m=16)"),
            DistanceRecord(5, 2.5, 0.7, "power:s=2", "grid(n=3,m=16)")]
    p = tmp_path / "d.csv"
    write_records_csv(p, recs)
    lines = p.read_text().splitlines()
    assert lines[0] == f"# schema: {CSV_SCHEMA}"
    assert lines[1] == "seed,omega2_sq,rho"
    assert read_records_csv(p, "power:s=2", "grid(n=3,m=16)") == recs
