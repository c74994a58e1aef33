"""Gaussian radial/angular fields on a periodic grid and the assembled metric.

Nodes are stored flat in C order: node ``i`` has multi-index
``np.unravel_index(i, (m,) * n)`` and coordinates ``2 pi * multi_index / m``.

Seeding
-------
A field seed is a 64-bit integer.  The radial coefficients are drawn from
``SeedSequence(seed, spawn_key=(0,))`` and the angular ones from
``spawn_key=(1,)``, one mode after another, so enlarging the basis appends
new modes without touching the earlier draws.  Per-sample seeds of an
experiment are the words of ``SeedSequence(root).generate_state``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import json
import math
import struct

import numpy as np

from .errors import GridTooCoarse, ShapeMismatch
from .spectrum import decay_eval
from .symspace import skew_exp

RADIAL_KEY = 0
ANGULAR_KEY = 1


def stream(seed, key):
    """Generator for substream ``key`` of a 64-bit field seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))


def sample_seeds(root, count, offset=0):
    """Per-sample 64-bit seeds ``offset .. offset+count-1`` derived from ``root``."""
    words = np.random.SeedSequence(int(root)).generate_state(offset + count, np.uint64)
    return [int(s) for s in words[offset:]]


@dataclass(frozen=True)
class GridSpec:
    n: int
    m: int

    @property
    def shape(self):
        return (self.m,) * self.n

    @property
    def size(self):
        return self.m ** self.n

    @property
    def spacing(self):
        return 2.0 * math.pi / self.m

    @property
    def weight(self):
        return self.spacing ** self.n

    @property
    def volume(self):
        return (2.0 * math.pi) ** self.n

    def multi_index(self):
        return np.stack(np.unravel_index(np.arange(self.size), self.shape), axis=-1)

    def coords(self):
        return self.spacing * self.multi_index()

    def check_nyquist(self, basis):
        if basis.n != self.n:
            raise ShapeMismatch(f"basis dimension {basis.n} != grid dimension {self.n}")
        if not self.m > 2 * basis.max_freq:
            raise GridTooCoarse(
                f"m={self.m} must exceed 2*max|k|_inf = {2 * basis.max_freq} for exact quadrature"
            )

    @property
    def descriptor(self):
        return f"grid(n={self.n},m={self.m})"


@lru_cache(maxsize=8)
def mode_matrix(basis, grid):
    """Mode values on the grid, shape ``(J, m^n)``.

    Phases ``k.x`` are reduced modulo ``m`` in integer arithmetic before the
    trigonometric call, so every node value is correctly rounded.
    """
    grid.check_nyquist(basis)
    phase = (basis.lattice @ grid.multi_index().T) % grid.m
    ang = (2.0 * math.pi / grid.m) * phase
    vals = np.where(basis.is_sin[:, None], np.sin(ang), np.cos(ang))
    out = basis.norm_const * vals
    out.setflags(write=False)
    return out


def project_traceless(v):
    """Orthogonal projection onto the hyperplane ``sum_i v_i = 0`` (last axis)."""
    v = np.asarray(v, dtype=float)
    return v - v.mean(axis=-1, keepdims=True)


def _descr(schedule):
    return getattr(schedule, "descriptor", "explicit")


@dataclass
class RadialField:
    """Traceless diagonal log-scale field ``b``, shape ``(m^n, n)``."""

    grid: GridSpec
    b: np.ndarray
    beta: np.ndarray
    xi: np.ndarray
    seed: int
    basis_id: str
    schedule_id: str

    def coefficient_omega2_sq(self):
        """``sum_j beta_j^2 |pi(xi_j)|^2``: the L2 norm computed in coefficient space."""
        return float(np.sum(self.beta ** 2 * np.sum(project_traceless(self.xi) ** 2, axis=1)))


@dataclass
class AngularField:
    """Skew-symmetric field ``u``, shape ``(m^n, n, n)``."""

    grid: GridSpec
    u: np.ndarray
    delta: np.ndarray
    eta: np.ndarray
    seed: int
    basis_id: str
    schedule_id: str


@dataclass
class MetricField:
    """Sampled metric ``g1 = k exp(2b) k^T`` at every node."""

    grid: GridSpec
    g1: np.ndarray
    b: np.ndarray
    k: np.ndarray
    provenance: dict = field(default_factory=dict)


def radial_from_coefficients(basis, schedule, grid, xi, seed=-1):
    """Radial field for given Gaussian coefficients ``xi`` of shape ``(J, n)``."""
    grid.check_nyquist(basis)
    beta = decay_eval(schedule, basis)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (basis.J, basis.n):
        raise ShapeMismatch(f"xi has shape {xi.shape}, expected {(basis.J, basis.n)}")
    coef = beta[:, None] * project_traceless(xi)
    b = mode_matrix(basis, grid).T @ coef
    return RadialField(grid, b, beta, xi, seed, basis.descriptor, _descr(schedule))


def sample_radial(basis, schedule, grid, seed):
    """Draw the radial field for ``seed`` (deterministic, bit-reproducible)."""
    grid.check_nyquist(basis)
    xi = stream(seed, RADIAL_KEY).standard_normal((basis.J, basis.n))
    return radial_from_coefficients(basis, schedule, grid, xi, seed)


def skew_from_upper(vals, n):
    """Skew matrices from upper-triangle entries ``(..., n(n-1)/2)``."""
    vals = np.asarray(vals, dtype=float)
    iu = np.triu_indices(n, 1)
    out = np.zeros(vals.shape[:-1] + (n, n))
    out[..., iu[0], iu[1]] = vals
    out[..., iu[1], iu[0]] = -vals
    return out


def angular_from_coefficients(basis, schedule2, grid, eta, seed=-1):
    grid.check_nyquist(basis)
    delta = decay_eval(schedule2, basis)
    d = basis.n * (basis.n - 1) // 2
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (basis.J, d):
        raise ShapeMismatch(f"eta has shape {eta.shape}, expected {(basis.J, d)}")
    upper = mode_matrix(basis, grid).T @ (delta[:, None] * eta)
    return AngularField(
        grid, skew_from_upper(upper, basis.n), delta, eta, seed, basis.descriptor, _descr(schedule2)
    )


def sample_angular(basis, schedule2, grid, seed):
    """Draw the angular field; upper-triangle entries of each mode are i.i.d. N(0,1)."""
    grid.check_nyquist(basis)
    d = basis.n * (basis.n - 1) // 2
    eta = stream(seed, ANGULAR_KEY).standard_normal((basis.J, d))
    return angular_from_coefficients(basis, schedule2, grid, eta, seed)


def assemble_metric(radial, angular=None):
    """Per node ``k = exp(u)``, ``g1 = k diag(exp(2b)) k^T``."""
    grid = radial.grid
    n = grid.n
    if angular is None:
        k = np.broadcast_to(np.eye(n), (grid.size, n, n)).copy()
    else:
        if angular.grid != grid or angular.u.shape != (grid.size, n, n):
            raise ShapeMismatch("radial and angular fields live on different grids")
        k = skew_exp(angular.u)
    g1 = (k * np.exp(2.0 * radial.b)[:, None, :]) @ np.swapaxes(k, -1, -2)
    g1 = 0.5 * (g1 + np.swapaxes(g1, -1, -2))
    prov = {
        "radial_seed": radial.seed,
        "angular_seed": None if angular is None else angular.seed,
        "schedule": radial.schedule_id,
        "schedule2": None if angular is None else angular.schedule_id,
        "basis": radial.basis_id,
        "grid": grid.descriptor,
    }
    return MetricField(grid, g1, radial.b, k, prov)


def scalar_covariance(schedule, basis, x, y):
    """``sum_j beta_j^2 psi_j(x) psi_j(y)`` over the truncated basis (no constant mode)."""
    beta = decay_eval(schedule, basis)
    px = basis.evaluate(np.reshape(x, (1, -1)))[:, 0]
    py = basis.evaluate(np.reshape(y, (1, -1)))[:, 0]
    return float(np.sum(beta ** 2 * px * py))


def covariance_radial(basis, schedule, x, y):
    """``Cov(b(x), b(y)) = (I - 11^T / n) r(x, y)``."""
    n = basis.n
    r = scalar_covariance(schedule, basis, x, y)
    return (np.eye(n) - np.ones((n, n)) / n) * r


def sigma_sup(schedule, basis, grid):
    """Maximum over grid nodes of the pointwise scalar variance ``r(x, x)``."""
    beta = decay_eval(schedule, basis)
    psi = mode_matrix(basis, grid)
    return float(np.max((beta ** 2) @ (psi ** 2)))


def sigma_sq_closed_form(schedule, basis):
    """Torus value of ``r(x, x)``: ``sum_j beta_j^2 / (2 pi)^n`` (eigenspaces complete)."""
    beta = decay_eval(schedule, basis)
    return float(np.sum(beta ** 2) / (2.0 * math.pi) ** basis.n)


# --- binary dump -----------------------------------------------------------

MAGIC = b"RMETRIC1"


def write_metric_field(path, mf):
    """Write ``mf`` as: magic, <u4 n, <u4 m, <u8 seed, <u4 header length,
    UTF-8 JSON provenance, then ``g1`` and ``b`` as little-endian float64."""
    seed = mf.provenance.get("radial_seed", 0)
    header = json.dumps(mf.provenance, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQI", mf.grid.n, mf.grid.m, int(seed) % 2 ** 64, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(mf.g1, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(mf.b, dtype="<f8").tobytes())


def read_metric_field(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path} is not a metric-field dump")
        n, m, seed, hlen = struct.unpack("<IIQI", fh.read(struct.calcsize("<IIQI")))
        prov = json.loads(fh.read(hlen).decode())
        grid = GridSpec(n, m)
        g1 = np.frombuffer(fh.read(8 * grid.size * n * n), dtype="<f8").reshape(grid.size, n, n)
        b = np.frombuffer(fh.read(8 * grid.size * n), dtype="<f8").reshape(grid.size, n)
    return MetricField(grid, g1.astype(float), b.astype(float), None, prov)
