"""Analytic law of Omega_2^2 and tail bounds for Omega_2 and rho.

Under the sampler, ``Omega_2^2 = sum_j beta_j^2 V_j`` with ``V_j`` i.i.d.
chi-square with ``n - 1`` degrees of freedom.  Every formula here is
evaluated over the same truncated list of ``beta`` values the sampler uses,
so the analytic side and the Monte Carlo side describe one random variable.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import special, stats

from .errors import BadParameter, DomainError, EmptySchedule
from .spectrum import decay_eval


@dataclass(frozen=True)
class LawConstants:
    """Laurent-Massart constants of ``W = sum_i a_i Z_i^2``.

    Each ``beta_j^2`` enters ``a`` with multiplicity ``n - 1``.
    """

    n: int
    betas: np.ndarray
    A_sq: float
    B4: float
    a_inf: float

    @property
    def B_sq(self):
        return math.sqrt(self.B4)

    @property
    def dof(self):
        return self.n - 1

    @classmethod
    def from_betas(cls, betas, n):
        betas = np.sort(np.abs(np.asarray(betas, dtype=float)))[::-1]
        if betas.size == 0:
            raise EmptySchedule("no decay coefficients")
        b2 = betas ** 2
        return cls(
            n=n,
            betas=betas,
            A_sq=float((n - 1) * np.sum(b2)),
            B4=float((n - 1) * np.sum(b2 ** 2)),
            a_inf=float(b2[0]),
        )


def law_constants(schedule, basis, n=None):
    """Constants ``A^2``, ``B^4`` and ``|a|_inf`` over the truncated basis."""
    if basis.J == 0:
        raise EmptySchedule("basis has no modes")
    return LawConstants.from_betas(decay_eval(schedule, basis), basis.n if n is None else n)


def mgf(c, t):
    """``E exp(t Omega_2^2) = prod_j (1 - 2 t beta_j^2)^(-(n-1)/2)``."""
    t = float(t)
    if t >= 1.0 / (2.0 * c.a_inf):
        raise DomainError(f"MGF diverges for t >= {1.0 / (2.0 * c.a_inf):.6g}")
    return float(np.exp(-0.5 * c.dof * np.sum(np.log1p(-2.0 * t * c.betas ** 2))))


def charfn(c, t):
    """Characteristic function ``prod_j (1 - 2 i t beta_j^2)^(-(n-1)/2)``.

    Each factor uses the principal branch; the product of those is the
    characteristic function (the principal value of the product is not).
    Vectorized over ``t``.
    """
    t = np.asarray(t, dtype=float)
    z = 1.0 - 2.0j * t[..., None] * c.betas ** 2
    out = np.exp(-0.5 * c.dof * np.sum(np.log(z), axis=-1))
    return complex(out) if out.ndim == 0 else out


def x_of_R(c, R):
    """Root ``x >= 0`` of ``2 |a|_inf x^2 + 2 B^2 x + A^2 = R^2``.

    Raises
    ------
    DomainError
        If ``R < A``.
    """
    R = float(R)
    if R * R < c.A_sq * (1 - 1e-15):
        raise DomainError(f"R={R} below A={math.sqrt(c.A_sq)}")
    a = c.a_inf
    disc = c.B4 + 2.0 * max(R * R - c.A_sq, 0.0) * a
    return (-c.B_sq + math.sqrt(disc)) / (2.0 * a)


def tail_upper_lm(c, R):
    """Upper bound ``exp(-x(R)^2)`` for ``Prob{Omega_2 >= R}``, ``R >= A``."""
    return math.exp(-x_of_R(c, R) ** 2)


def tail_lower_exact(c, R):
    """Lower bound ``Prob{beta_1^2 Z^2 >= R^2} = 2 Phi_bar(R / beta_1)``."""
    if R < 0:
        raise DomainError("R must be nonnegative")
    return float(2.0 * stats.norm.sf(R / c.betas[0]))


def oracle_sample_law(c, seed):
    """One draw of ``sum_j beta_j^2 V_j`` from squared standard normals."""
    z = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(2,))).standard_normal(
        (c.betas.size, c.dof)
    )
    return float(np.sum(c.betas ** 2 * np.sum(z ** 2, axis=1)))


def oracle_sample_batch(c, seed, size, chunk=4096):
    """``size`` independent draws of the law; deterministic in ``seed``."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(3,)))
    b2 = c.betas ** 2
    out = np.empty(size)
    for start in range(0, size, chunk):
        k = min(chunk, size - start)
        z = rng.standard_normal((k, b2.size, c.dof))
        out[start:start + k] = np.sum(z * z, axis=2) @ b2
    return out


def cdf_gil_pelaez(c, x, eps=1e-4):
    """CDF of ``Omega_2^2`` by inverting the characteristic function.

    Midpoint rule on ``F(x) = 1/2 - (1/pi) int_0^inf Im(e^{-itx} phi(t)) / t dt``.
    The step ``h`` makes the aliasing period ``2 pi / h`` at least twice a
    level ``L >= max(x)`` whose upper tail is below ``eps / 2`` by the
    Laurent-Massart bound; the sum is cut at ``T`` where the majorant
    ``|phi(t)| <= prod_{j in S} (2 t beta_j^2)^{-(n-1)/2}`` integrates to
    less than ``eps / 2``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    L = max(float(np.max(x)), math.sqrt(c.A_sq))
    while tail_upper_lm(c, math.sqrt(L)) > eps / 2:
        L *= 1.25
    h = 2.0 * math.pi / (2.0 * L)
    lead = c.betas[: min(c.betas.size, 8)]
    p = 0.5 * c.dof * lead.size
    logC = -0.5 * c.dof * np.sum(np.log(2.0 * lead ** 2))
    T = math.exp((logC - math.log(math.pi * p * eps / 2)) / p)
    K = int(math.ceil(T / h)) + 1
    tk = (np.arange(K) + 0.5) * h
    phi = charfn(c, tk)
    im = np.imag(phi[None, :] * np.exp(-1j * np.outer(x, tk)))
    F = 0.5 - np.sum(im / (np.arange(K) + 0.5), axis=1) / math.pi
    return np.clip(F, 0.0, 1.0)


def rho_tail_upper(sigma_sq, alpha, n, R):
    """``min(1, 2n exp(alpha R / 2 - R^2 / (8 sigma^2)))``."""
    if not sigma_sq > 0:
        raise BadParameter("sigma_sq must be positive")
    if alpha < 0 or R <= 0:
        raise BadParameter("need alpha >= 0 and R > 0")
    log_b = math.log(2 * n) + alpha * R / 2 - R * R / (8.0 * sigma_sq)
    return 1.0 if log_b >= 0 else math.exp(log_b)


def fit_alpha(sigma_sq, n, R_star, p_star):
    """Smallest ``alpha >= 0`` putting the rho bound through ``(R_star, p_star)``."""
    a = (2.0 / R_star) * (math.log(p_star / (2 * n)) + R_star ** 2 / (8.0 * sigma_sq))
    return max(a, 0.0)


# --- statistics helpers ------------------------------------------------------


def wilson_interval(k, N, z=1.0):
    """Wilson score interval ``(lo, hi)`` for ``k`` successes in ``N`` trials at ``z`` sigmas."""
    k = np.asarray(k, dtype=float)
    p = k / N
    den = 1.0 + z * z / N
    centre = (p + z * z / (2 * N)) / den
    half = z * np.sqrt(p * (1 - p) / N + z * z / (4.0 * N * N)) / den
    return centre - half, centre + half


def ks_critical(n1, n2, level=0.01):
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    return float(stats.kstwobign.isf(level) * math.sqrt((n1 + n2) / (n1 * n2)))


def ks_two_sample(a, b):
    return float(stats.ks_2samp(a, b).statistic)


def empirical_tail(samples, levels):
    """``(count, frequency)`` of ``samples >= level`` for each level."""
    s = np.sort(np.asarray(samples))
    cnt = s.size - np.searchsorted(s, np.asarray(levels), side="left")
    return cnt, cnt / s.size


def tail_exponent_fit(R, tail, scale, multiplicity=2):
    """Slope of the Gaussian exponent in a far-tail curve.

    When the largest weight ``beta_1^2`` carries ``multiplicity`` chi-square(1)
    terms, ``Prob{Omega_2 >= R} ~ C R^(multiplicity - 2) exp(-scale R^2)``
    with ``scale = 1 / (2 beta_1^2)``.  The power prefactor is moved to the
    left, ``-log tail + (multiplicity / 2 - 1) log R^2``, and regressed on
    ``scale R^2`` with an intercept.  The slope is 1 for the exact law.
    """
    R = np.asarray(R, dtype=float)
    y = -np.log(np.asarray(tail, dtype=float)) + (multiplicity / 2.0 - 1.0) * np.log(R ** 2)
    return float(np.polyfit(scale * R ** 2, y, 1)[0])


def top_multiplicity(c):
    """Number of chi-square(1) terms carrying the largest weight ``beta_1^2``."""
    return int(np.sum(np.isclose(c.betas, c.betas[0], rtol=1e-12))) * c.dof


def gaussian_quantile_tail(p):
    """``R`` with ``2 Phi_bar(R) = p``."""
    return float(special.ndtri(1 - p / 2))
