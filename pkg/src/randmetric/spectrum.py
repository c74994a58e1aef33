"""Laplace eigenbasis of the flat torus R^n / (2 pi Z)^n and decay schedules.

Modes are real: for every canonical lattice vector ``k`` (first nonzero
component positive) there is a ``cos(k.x)`` and a ``sin(k.x)`` mode, both
with eigenvalue ``|k|^2`` and L2-normalization constant ``sqrt(2 / (2 pi)^n)``.
The constant mode is never included.
"""

from dataclasses import dataclass
from functools import cached_property
import itertools
import json
import math

import numpy as np

from .errors import BadParameter, DimensionTooSmall

COS, SIN = "cos", "sin"


@dataclass(frozen=True)
class EigenMode:
    index: int
    lattice_vector: tuple
    branch: str
    lam: int
    norm_const: float


@dataclass(frozen=True)
class SpectralBasis:
    """Ordered, eigenspace-complete truncation of the torus eigenbasis."""

    n: int
    modes: tuple

    @property
    def J(self):
        return len(self.modes)

    @cached_property
    def lattice(self):
        return np.array([md.lattice_vector for md in self.modes], dtype=np.int64).reshape(-1, self.n)

    @cached_property
    def is_sin(self):
        return np.array([md.branch == SIN for md in self.modes], dtype=bool)

    @cached_property
    def lambdas(self):
        return np.array([md.lam for md in self.modes], dtype=float)

    @property
    def norm_const(self):
        return math.sqrt(2.0 / (2.0 * math.pi) ** self.n)

    @property
    def max_freq(self):
        """Largest ``|k|_inf`` over the retained lattice vectors."""
        return int(np.abs(self.lattice).max()) if self.J else 0

    @property
    def lam_max(self):
        return int(self.lambdas.max()) if self.J else 0

    def evaluate(self, x):
        """Mode values at points ``x`` of shape ``(P, n)``; returns ``(J, P)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        phase = self.lattice.astype(float) @ x.T
        vals = np.where(self.is_sin[:, None], np.sin(phase), np.cos(phase))
        return self.norm_const * vals

    def eigenspaces(self):
        """Map eigenvalue -> index array of the modes in that eigenspace."""
        out = {}
        for j, md in enumerate(self.modes):
            out.setdefault(md.lam, []).append(j)
        return {lam: np.array(ix) for lam, ix in out.items()}

    def to_json(self):
        return json.dumps(
            {
                "n": self.n,
                "J": self.J,
                "modes": [[list(md.lattice_vector), md.branch] for md in self.modes],
            }
        )

    @property
    def descriptor(self):
        return f"torus(n={self.n},J={self.J},lam_max={self.lam_max})"


def _canonical(k):
    for c in k:
        if c != 0:
            return c > 0
    return False


def _lattice_levels(n, lam_cap):
    """Canonical lattice vectors grouped by ``|k|^2`` for ``|k|^2 <= lam_cap``."""
    r = math.isqrt(lam_cap)
    levels = {}
    for k in itertools.product(range(-r, r + 1), repeat=n):
        if not _canonical(k):
            continue
        lam = sum(c * c for c in k)
        if lam <= lam_cap:
            levels.setdefault(lam, []).append(k)
    return levels


def torus_basis(n, J_min=1, lam_max=None):
    """Build the torus basis with at least ``J_min`` modes.

    The truncation is extended upward to the end of the last eigenspace
    touched.  If ``lam_max`` is given, every eigenspace with eigenvalue
    ``<= lam_max`` is included as well.

    Raises
    ------
    DimensionTooSmall
        If ``n < 3``.
    """
    if n < 3:
        raise DimensionTooSmall(f"n={n}; the construction needs dimension >= 3")
    if J_min < 1:
        raise BadParameter("J_min must be >= 1")
    # Weyl-law guess for the eigenvalue cap, doubled until enough modes are found
    ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    cap = max(1, int(math.ceil((J_min / ball) ** (2.0 / n))) + 1, lam_max or 0)
    while True:
        levels = _lattice_levels(n, cap)
        count, chosen = 0, []
        for lam in sorted(levels):
            if count >= J_min and (lam_max is None or lam > lam_max):
                break
            chosen.append(lam)
            count += 2 * len(levels[lam])
        if count >= J_min:
            break
        cap *= 2
    modes = []
    for lam in chosen:
        for k in sorted(levels[lam]):
            for br in (COS, SIN):
                modes.append((lam, k, br))
    c = math.sqrt(2.0 / (2.0 * math.pi) ** n)
    return SpectralBasis(
        n=n,
        modes=tuple(
            EigenMode(index=j + 1, lattice_vector=k, branch=br, lam=lam, norm_const=c)
            for j, (lam, k, br) in enumerate(modes)
        ),
    )


def weyl_count(n, lam):
    """Leading Weyl-law prediction for the number of modes with eigenvalue <= lam."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * lam ** (n / 2)


@dataclass(frozen=True)
class DecaySchedule:
    """Spectral decay ``beta = F(lambda)``.

    ``kind`` is ``"power"`` (``beta = lambda^-s``) or ``"heat"``
    (``beta = exp(-t lambda)``); ``param`` holds ``s`` or ``t``.
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in ("power", "heat"):
            raise BadParameter(f"unknown schedule kind {self.kind!r}")
        if not self.param > 0:
            raise BadParameter(f"schedule parameter must be positive, got {self.param}")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self.kind == "power":
            return lam ** (-self.param)
        return np.exp(-self.param * lam)

    @property
    def descriptor(self):
        return f"power:s={self.param:g}" if self.kind == "power" else f"heat:t={self.param:g}"


def power_law(s):
    return DecaySchedule("power", float(s))


def heat_kernel(t):
    return DecaySchedule("heat", float(t))


def parse_schedule(text):
    """Parse ``"power:s=2"`` or ``"heat:t=0.5"``."""
    try:
        kind, rest = text.split(":", 1)
        key, val = rest.split("=", 1)
    except ValueError:
        raise BadParameter(f"cannot parse schedule {text!r}") from None
    expected = {"power": "s", "heat": "t"}.get(kind.strip())
    if expected is None or key.strip() != expected:
        raise BadParameter(f"cannot parse schedule {text!r}")
    return DecaySchedule(kind.strip(), float(val))


def decay_eval(schedule, basis):
    """Decay coefficients for every mode of ``basis``.

    ``schedule`` may also be an explicit array of length ``J`` (used by tests
    and degenerate runs); it must then be nonnegative.
    """
    if isinstance(schedule, DecaySchedule):
        if not schedule.param > 0:
            raise BadParameter("schedule parameter must be positive")
        return schedule(basis.lambdas)
    beta = np.asarray(schedule, dtype=float)
    if beta.shape != (basis.J,):
        raise BadParameter(f"explicit beta has shape {beta.shape}, basis has J={basis.J}")
    if np.any(beta < 0):
        raise BadParameter("explicit beta must be nonnegative")
    return beta


def regularity_floor(q, n):
    """Smallest power-law exponent (exclusive) giving almost surely C^q fields."""
    return q / 2 + n / 4


def schedule_is_regular(schedule, q, n):
    if schedule.kind == "heat":
        return True
    return schedule.param > regularity_floor(q, n)
