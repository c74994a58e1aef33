"""Discrete diameter and Laplace spectrum of a grid metric, sandwich checks,
distance averages and integrability certificates.

Discretization
--------------
* Graph: every node is joined to its ``3^n - 1`` neighbours (offsets in
  ``{-1, 0, 1}^n``, periodic).  The edge ``x -- y`` with coordinate step
  ``v`` has length ``h * sqrt(v^T ((g(x) + g(y)) / 2) v)``, symmetric in its
  endpoints.  Both endpoints are grid nodes, so the node scan used for
  ``rho`` bounds every edge-length ratio by ``exp(rho / 2)``.
* Laplacian: quadratic form ``sum_x Df(x)^T G(x) Df(x) w`` with forward
  differences ``Df`` and ``G(x)`` the mean of ``g^{-1}`` over the ``2^n``
  corners of the cell anchored at ``x``.  The mass form ``sum_x f(x)^2 w``
  does not involve the metric, so the generalized eigenproblem reduces to
  the stiffness matrix alone.  It is solved by shift-invert block subspace
  iteration, see :func:`lowest_eigenvalues`.
"""

from dataclasses import dataclass, field
import itertools
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.sparse.linalg import splu

from .errors import BadParameter, ConvergenceFailure

EXACT_NODE_LIMIT = 5000
SAMPLED_SOURCES = 64
SLACK = 1e-9


def _metric_array(metric):
    return metric.g1 if hasattr(metric, "g1") else np.asarray(metric, dtype=float)


def _half_offsets(n):
    """One representative of each ``{v, -v}`` pair of nonzero offsets."""
    out = []
    for v in itertools.product((-1, 0, 1), repeat=n):
        nz = [c for c in v if c != 0]
        if nz and nz[0] > 0:
            out.append(np.array(v))
    return out


def _shift_index(grid, v):
    idx = np.arange(grid.size).reshape(grid.shape)
    return np.roll(idx, shift=tuple(-np.asarray(v)), axis=tuple(range(grid.n))).ravel()


def grid_graph(metric, grid):
    """Symmetric sparse adjacency matrix with metric edge lengths."""
    g = _metric_array(metric)
    rows, cols, vals = [], [], []
    src = np.arange(grid.size)
    for v in _half_offsets(grid.n):
        dst = _shift_index(grid, v)
        q = np.einsum("i,nij,j->n", v.astype(float), g, v.astype(float))
        length = grid.spacing * np.sqrt(0.5 * (q + q[dst]))
        rows += [src, dst]
        cols += [dst, src]
        vals += [length, length]
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    return sp.csr_matrix((vals, (rows, cols)), shape=(grid.size, grid.size))


@dataclass
class DiameterResult:
    value: float
    exact: bool
    sources: int


def _source_nodes(grid, count, seed):
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(7,)))
    return np.sort(rng.choice(grid.size, size=min(count, grid.size), replace=False))


def discrete_diameter(metric, grid, exact_limit=EXACT_NODE_LIMIT, seed=0, chunk=512):
    """Graph diameter; all sources when ``m^n <= exact_limit``, else 64 fixed sources.

    In the sampled mode the value is a lower bound and ``exact`` is False.
    """
    graph = grid_graph(metric, grid)
    exact = grid.size <= exact_limit
    sources = np.arange(grid.size) if exact else _source_nodes(grid, SAMPLED_SOURCES, seed)
    best = 0.0
    for start in range(0, sources.size, chunk):
        d = dijkstra(graph, directed=True, indices=sources[start:start + chunk])
        best = max(best, float(d.max()))
    return DiameterResult(best, exact, int(sources.size))


def shortest_paths(metric, grid, sources):
    return dijkstra(grid_graph(metric, grid), directed=True, indices=np.asarray(sources))


# --- Laplace spectrum ---------------------------------------------------------


def _difference_ops(grid):
    h = grid.spacing
    eye = sp.identity(grid.size, format="csr")
    ops = []
    for a in range(grid.n):
        e = np.zeros(grid.n, dtype=int)
        e[a] = 1
        fwd = sp.csr_matrix(
            (np.ones(grid.size), (np.arange(grid.size), _shift_index(grid, e))),
            shape=(grid.size, grid.size),
        )
        ops.append((fwd - eye) / h)
    return ops


def cell_inverse_metric(metric, grid):
    """Mean of ``g^{-1}`` over the corners of each cell, shape ``(m^n, n, n)``."""
    ginv = np.linalg.inv(_metric_array(metric))
    acc = np.zeros_like(ginv)
    corners = list(itertools.product((0, 1), repeat=grid.n))
    for c in corners:
        acc += ginv[_shift_index(grid, c)]
    acc /= len(corners)
    return 0.5 * (acc + np.swapaxes(acc, -1, -2))


def stiffness_matrix(metric, grid):
    D = _difference_ops(grid)
    G = cell_inverse_metric(metric, grid)
    A = sp.csr_matrix((grid.size, grid.size))
    for a in range(grid.n):
        for b in range(grid.n):
            A = A + D[a].T @ sp.diags(G[:, a, b]) @ D[b]
    return 0.5 * (A + A.T).tocsc()


@dataclass
class DiscreteSpectrumReport:
    eigenvalues: np.ndarray
    grid: str
    provenance: dict = field(default_factory=dict)


def lowest_eigenvalues(A, count, tol=1e-10, maxiter=1000, shift=0.1):
    """The ``count`` smallest eigenvalues of a sparse symmetric PSD matrix.

    Block subspace iteration on ``(A + shift I)^-1`` (one sparse LU) with
    Rayleigh-Ritz, so exact multiplicities are resolved; single-vector
    Lanczos tends to drop members of degenerate clusters.  Stops when every
    wanted Ritz pair has residual ``<= tol * max(1, theta)``, which bounds
    the eigenvalue error by the same amount.  Deterministic start block.

    Raises
    ------
    ConvergenceFailure
        If the residuals are not below ``tol`` after ``maxiter`` sweeps.
    """
    size = A.shape[0]
    p = min(size, max(2 * count, count + 24))
    # symmetric minimum-degree ordering: half the fill of the default COLAMD here
    lu = splu((A + shift * sp.identity(size, format="csc")).tocsc(), permc_spec="MMD_AT_PLUS_A")
    X, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((size, p)))
    for _ in range(maxiter):
        Q, _ = np.linalg.qr(lu.solve(X))
        AQ = A @ Q
        w, V = np.linalg.eigh(0.5 * (Q.T @ AQ + AQ.T @ Q))
        X = Q @ V
        res = np.linalg.norm(AQ @ V[:, :count] - X[:, :count] * w[:count], axis=0)
        if np.all(res <= tol * np.maximum(1.0, np.abs(w[:count]))):
            return w[:count]
    raise ConvergenceFailure(f"subspace iteration: residual {res.max():.2e} after {maxiter} sweeps")


def discrete_spectrum(metric, grid, k, maxiter=1000):
    """The ``k`` smallest nonzero eigenvalues of the discrete Laplacian.

    Raises
    ------
    ConvergenceFailure
        If the eigensolver does not converge within ``maxiter`` sweeps.
    """
    if k < 1 or grid.m < 8:
        raise BadParameter("need k >= 1 and m >= 8")
    A = stiffness_matrix(metric, grid)
    vals = lowest_eigenvalues(A, min(k + 1, grid.size), maxiter=maxiter)[1:]
    prov = dict(getattr(metric, "provenance", {}) or {})
    return DiscreteSpectrumReport(vals, grid.descriptor, prov)


# --- sandwich checks ----------------------------------------------------------


def metric_rho(metric):
    """Node supremum of ``|ln(xi^T g xi / xi^T xi)|``: max over nodes of ``|ln eig(g)|``."""
    w = np.linalg.eigvalsh(_metric_array(metric))
    return float(np.max(np.abs(np.log(w))))


@dataclass
class SandwichResult:
    passed: bool
    rho_hat: float
    ratios: np.ndarray
    lower: float
    upper: float


def _sandwich(ratios, lower, upper, rho):
    ratios = np.atleast_1d(np.asarray(ratios, dtype=float))
    ok = bool(np.all(ratios >= lower - SLACK) and np.all(ratios <= upper + SLACK))
    return SandwichResult(ok, rho, ratios, lower, upper)


def sandwich_check_diam(metric, grid, reference=None):
    """Check ``exp(-rho) <= diam(g1) / diam(g0) <= exp(rho)`` on the grid.

    ``reference`` may carry a precomputed flat diameter.
    """
    rho = metric_rho(metric)
    d0 = reference if reference is not None else flat_diameter(grid).value
    d1 = discrete_diameter(metric, grid).value
    return _sandwich(d1 / d0, math.exp(-rho), math.exp(rho), rho)


def sandwich_check_eig(metric, grid, k, reference=None):
    """Check ``exp(-2 rho) <= lambda_j(g1) / lambda_j(g0) <= exp(2 rho)``, ``j = 1..k``."""
    rho = metric_rho(metric)
    l0 = reference if reference is not None else flat_spectrum(grid, k).eigenvalues
    l1 = discrete_spectrum(metric, grid, k).eigenvalues
    return _sandwich(l1 / l0[:k], math.exp(-2 * rho), math.exp(2 * rho), rho)


def flat_metric(grid):
    return np.broadcast_to(np.eye(grid.n), (grid.size, grid.n, grid.n)).copy()


def flat_diameter(grid):
    """Flat graph diameter; the graph is translation invariant, so one source is exact."""
    d = dijkstra(grid_graph(flat_metric(grid), grid), directed=True, indices=[0])
    return DiameterResult(float(d.max()), True, 1)


def flat_spectrum(grid, k):
    return discrete_spectrum(flat_metric(grid), grid, k)


def flat_symbol(m, k_vec):
    """Eigenvalue of the flat forward-difference Laplacian for lattice vector ``k_vec``."""
    return sum((m / math.pi * math.sin(math.pi * kk / m)) ** 2 for kk in k_vec)


# --- distance average ---------------------------------------------------------


def distance_average(metric, grid, t, sources, seed=0):
    """Monte Carlo estimate of ``int int dist(x, y)^t dv(x) dv(y)``.

    Averages ``sum_y dist(x, y)^t w`` over ``sources`` distinct random nodes
    and multiplies by the total volume.  ``t = 0`` returns ``vol(M)^2``.
    """
    if t < 0 or sources < 1:
        raise BadParameter("need t >= 0 and sources >= 1")
    src = _source_nodes(grid, sources, seed)
    d = shortest_paths(metric, grid, src)
    inner = np.sum(d ** t, axis=1) * grid.weight
    return float(grid.volume * np.mean(inner))


# --- integrability certificates ----------------------------------------------


@dataclass
class Certificate:
    converges: bool
    tail_bound: float
    log_tail_bound: float
    last_index: int
    remainder: float
    witness: int = -1
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "converges": self.converges,
            "tail_bound": self.tail_bound,
            "log_tail_bound": self.log_tail_bound,
            "last_index": self.last_index,
            "remainder": self.remainder,
            "witness": self.witness,
            **self.params,
        }


def _log_term(k, c, sigma_sq, alpha, n, kind, beta):
    growth = c * k * k if kind == "diameter" else c * (k + beta) ** 2
    return math.log(2 * n) + growth + alpha * (k - 1) / 2 - (k - 1) ** 2 / (8.0 * sigma_sq)


def integrability_certificate(c, sigma_sq, alpha, n, kind, N, beta=0.0, tol=1e-12):
    """Bound ``2n sum_{k>=N} h(.) exp(alpha (k-1)/2 - (k-1)^2 / (8 sigma^2))``.

    ``h(u) = exp(c ln(u)^2)`` for the diameter and ``exp(c ln(u)^2 / 4)`` for
    an eigenvalue; both make the growth factor ``exp(c k^2)`` (resp.
    ``exp(c (k + beta)^2)``).  Certified iff ``c < 1 / (8 sigma^2)``: the
    series is summed until the geometric majorant of the remainder drops
    below ``tol``.  Otherwise the first index with a term ``>= 1`` is
    returned as a divergence witness.
    """
    if c < 0 or not sigma_sq > 0 or alpha < 0 or N < 1:
        raise BadParameter("need c >= 0, sigma_sq > 0, alpha >= 0, N >= 1")
    if kind not in ("diameter", "eigenvalue"):
        raise BadParameter(f"unknown kind {kind!r}")
    params = dict(c=c, sigma_sq=sigma_sq, alpha=alpha, n=n, kind=kind, N=N, beta=beta)

    def lt(k):
        return _log_term(k, c, sigma_sq, alpha, n, kind, beta)

    if not c < 1.0 / (8.0 * sigma_sq):
        # the log-term is then increasing in k, so a forward scan terminates
        k = N
        while lt(k) < 0:
            k += 1
        return Certificate(False, math.inf, math.inf, k, math.inf, k, params)

    logs = []
    k = N
    while True:
        logs.append(lt(k))
        nxt, nxt2 = lt(k + 1), lt(k + 2)
        # near the threshold the terms peak far above float range; stay in logs
        if nxt2 < nxt:
            log_rem = nxt - math.log1p(-math.exp(nxt2 - nxt))
            if log_rem < math.log(tol):
                rem = math.exp(log_rem)
                break
        k += 1
    top = max(logs)
    s = math.fsum(math.exp(v - top) for v in logs)
    log_total = top + math.log(s)
    log_bound = math.log(math.exp(log_total) + rem) if log_total < 700 else log_total
    bound = math.exp(log_bound) if log_bound < 709 else math.inf
    return Certificate(True, bound, log_bound, k, rem, -1, params)
