"""Kernels for the symmetric space SL(n)/SO(n) of unimodular SPD matrices.

All functions accept a single matrix of shape ``(n, n)`` or a stack of shape
``(..., n, n)``; the leading axes are broadcast.  Eigendecompositions go
through LAPACK ``syevd`` (``numpy.linalg.eigh``), which is deterministic for a
fixed build.

The fiber distance uses the normalization in which a metric ``k exp(2b) k^T``
sits at distance ``||b||_2`` from the identity.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonZeroTrace, NotPositiveDefinite, NotUnimodular

TRACE_TOL = 1e-12
DET_TOL = 1e-10


@dataclass(frozen=True)
class CartanFactors:
    """Polar factors ``P = k @ diag(exp(2 b)) @ k.T``.

    ``k`` is in SO(n) and ``b`` is traceless and sorted non-increasing (the
    Weyl-chamber representative).
    """

    k: np.ndarray
    b: np.ndarray

    def reconstruct(self):
        return (self.k * np.exp(2.0 * self.b)[..., None, :]) @ np.swapaxes(self.k, -1, -2)


def symmetrize(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _unit_det(p):
    n = p.shape[-1]
    det = np.linalg.det(p)
    return p / (det ** (1.0 / n))[..., None, None]


def spd_exp(x):
    """Matrix exponential of a traceless symmetric matrix.

    Parameters
    ----------
    x : array_like, shape (..., n, n)
        Symmetric, trace zero within ``1e-12``.

    Returns
    -------
    ndarray, shape (..., n, n)
        SPD matrix with unit determinant.

    Raises
    ------
    NonZeroTrace
        If any ``|trace(x)| > 1e-12``.
    """
    x = symmetrize(x)
    tr = np.trace(x, axis1=-2, axis2=-1)
    if np.any(np.abs(tr) > TRACE_TOL):
        raise NonZeroTrace(f"trace {np.max(np.abs(tr)):.3e} exceeds {TRACE_TOL}")
    w, v = np.linalg.eigh(x)
    w = w - w.mean(axis=-1, keepdims=True)
    p = (v * np.exp(w)[..., None, :]) @ np.swapaxes(v, -1, -2)
    # rounding in the product drifts det by ~cond * eps; rescale it away
    return _unit_det(symmetrize(p))


def _check_spd(p):
    p = symmetrize(p)
    w, v = np.linalg.eigh(p)
    if np.any(w <= 0.0):
        raise NotPositiveDefinite(f"smallest eigenvalue {np.min(w):.3e}")
    return w, v


def spd_log(p):
    """Traceless matrix logarithm of an SPD matrix.

    The log-eigenvalues are centred, so a matrix with ``det != 1`` is first
    projected to the unimodular level set along the scaling direction.
    """
    w, v = _check_spd(p)
    lw = np.log(w)
    lw = lw - lw.mean(axis=-1, keepdims=True)
    return symmetrize((v * lw[..., None, :]) @ np.swapaxes(v, -1, -2))


def cartan_decompose(p):
    """Cartan factors of a unimodular SPD matrix with ``b`` sorted descending."""
    w, v = _check_spd(p)
    w = w[..., ::-1]
    k = v[..., :, ::-1].copy()
    b = 0.5 * np.log(w)
    b = b - b.mean(axis=-1, keepdims=True)
    # eigenvectors are defined up to sign: flip the last column to land in SO(n)
    neg = np.linalg.det(k) < 0
    k[..., :, -1] = np.where(neg[..., None], -k[..., :, -1], k[..., :, -1])
    return CartanFactors(k=k, b=b)


def fiber_distance(p, q):
    """Distance ``(1/4 sum_i log(mu_i)^2)^(1/2)``, ``mu`` the eigenvalues of ``P^-1 Q``.

    Computed through the symmetric pencil ``L^-1 Q L^-T`` with ``L L^T`` the
    Cholesky factorization of the better-conditioned argument.  Swapping the
    arguments inverts ``mu``, which leaves the distance unchanged, so the
    result does not depend on argument order.
    """
    wp, _ = _check_spd(p)
    wq, _ = _check_spd(q)
    p = symmetrize(p)
    q = symmetrize(q)
    swap = (wq[..., -1] / wq[..., 0]) < (wp[..., -1] / wp[..., 0])
    a = np.where(swap[..., None, None], q, p)
    other = np.where(swap[..., None, None], p, q)
    linv = np.linalg.inv(np.linalg.cholesky(a))
    c = symmetrize(linv @ other @ np.swapaxes(linv, -1, -2))
    mu = np.linalg.eigvalsh(c)
    if np.any(mu <= 0.0):
        raise NotPositiveDefinite("pencil has a nonpositive eigenvalue")
    return 0.5 * np.sqrt(np.sum(np.log(mu) ** 2, axis=-1))


def congruence_act(h, p):
    """Return ``h^T P h`` renormalized to unit determinant.

    Raises
    ------
    NotUnimodular
        If ``|det h - 1| > 1e-10``.
    """
    h = np.asarray(h, dtype=float)
    d = np.linalg.det(h)
    if np.any(np.abs(d - 1.0) > DET_TOL):
        raise NotUnimodular(f"det h = {d}")
    out = symmetrize(np.swapaxes(h, -1, -2) @ np.asarray(p, dtype=float) @ h)
    return symmetrize(_unit_det(out))


def skew_exp(u):
    """Rotation ``exp(u)`` for skew-symmetric ``u`` (stacks allowed).

    Uses scipy's scaling-and-squaring Pade exponential, followed by a polar
    re-projection onto O(n) when orthogonality drifts beyond ``1e-12``.
    """
    from scipy.linalg import expm

    u = np.asarray(u, dtype=float)
    u = 0.5 * (u - np.swapaxes(u, -1, -2))
    k = expm(u)
    n = u.shape[-1]
    drift = np.abs(np.swapaxes(k, -1, -2) @ k - np.eye(n)).max(axis=(-2, -1))
    if np.any(drift > 1e-12):
        uu, _, vt = np.linalg.svd(k)
        k = uu @ vt
    return k


def random_traceless(rng, n, scale=1.0, size=None):
    """Draw traceless symmetric matrices with Gaussian entries (testing helper)."""
    shape = (n, n) if size is None else (*np.atleast_1d(size), n, n)
    a = symmetrize(rng.standard_normal(shape)) * scale
    tr = np.trace(a, axis1=-2, axis2=-1)
    return a - (tr / n)[..., None, None] * np.eye(n)


def random_rotation(rng, n, size=None):
    """Haar-distributed element of SO(n) (testing helper)."""
    shape = (n, n) if size is None else (*np.atleast_1d(size), n, n)
    q, r = np.linalg.qr(rng.standard_normal(shape))
    q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[..., None, :]
    neg = np.linalg.det(q) < 0
    q[..., :, 0] = np.where(neg[..., None], -q[..., :, 0], q[..., :, 0])
    return q


def random_unimodular(rng, n, spread=1.0, size=None):
    """Element of SL(n) as ``k1 diag(exp(s)) k2`` with traceless ``s`` of bounded size."""
    k1 = random_rotation(rng, n, size)
    k2 = random_rotation(rng, n, size)
    shape = (n,) if size is None else (*np.atleast_1d(size), n)
    s = rng.uniform(-spread, spread, shape)
    s = s - s.mean(axis=-1, keepdims=True)
    h = (k1 * np.exp(s)[..., None, :]) @ k2
    det = np.linalg.det(h)
    return h / (det ** (1.0 / n))[..., None, None]
