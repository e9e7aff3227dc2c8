"""Constructors for growth-mixing systems and seeded random instances.

Stochastic matrices follow the column-stochastic convention ``e^T P = e^T``
(``P[i, j]`` is the fraction of site ``j`` that moves to site ``i``), which
makes conservative mixing read ``e^T A = 0``.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import BadGrid, BadProbabilityVector, NotStochastic, ValidationError
from .mlcore import DiagonalGrowth, GrowthMixingSystem, MLMatrix, as_growth

STOCHASTIC_TOL = 1e-12
RING_MASS = 0.05


class Style(enum.Enum):
    CONSERVATIVE_STOCHASTIC = "ConservativeStochastic"
    LOSSY = "Lossy"
    GENERAL_ML = "GeneralML"
    REDUCIBLE = "Reducible"

    @classmethod
    def parse(cls, name) -> Style:
        if isinstance(name, cls):
            return name
        key = str(name).replace("-", "").replace("_", "").lower()
        for style in cls:
            if style.value.lower() == key or style.name.replace("_", "").lower() == key:
                return style
        raise ValueError(f"unknown style {name!r}; choose from {[s.value for s in cls]}")


class Boundary(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


def balanced_generator(offdiag) -> np.ndarray:
    """Matrix with the given non-negative off-diagonals and exactly zero column sums.

    Each column's off-diagonals are rounded onto a binary grid fine enough
    (a few ulps of the column maximum) that their sum is exact in double
    precision; the diagonal is then minus that sum.
    """
    W = np.array(offdiag, dtype=float)
    n = W.shape[0]
    np.fill_diagonal(W, 0.0)
    if np.any(W < 0):
        raise ValidationError("off-diagonal rates must be non-negative")
    bits = max(1, math.ceil(math.log2(n))) + 1
    for j in range(n):
        col = W[:, j]
        top = col.max()
        if top == 0:
            continue
        _, exp = math.frexp(top)
        q = math.ldexp(1.0, exp - 53 + bits)
        col[:] = np.round(col / q) * q
        W[j, j] = -col.sum()
    return W


def _check_column_stochastic(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise NotStochastic(f"stochastic matrix must be square, got shape {P.shape}")
    if not np.all(np.isfinite(P)) or np.any(P < 0):
        raise NotStochastic("stochastic matrix entries must be finite and non-negative")
    sums = P.sum(axis=0)
    bad = np.nonzero(np.abs(sums - 1) > STOCHASTIC_TOL * P.shape[0])[0]
    if bad.size:
        raise NotStochastic(f"column {int(bad[0])} sums to {sums[bad[0]]!r}, not 1 (columns must sum to 1)")
    return P


def karlin_discrete_analog(P, D) -> MLMatrix:
    """Mixing pattern ``A = (P - I) D`` of a growth phase followed by a movement phase."""
    P = _check_column_stochastic(P)
    D = as_growth(D)
    if D.n != P.shape[0]:
        raise ValidationError("P and D dimensions differ")
    if np.any(D.d < 0):
        raise ValidationError("growth-then-move form needs non-negative D for an ML pattern")
    return MLMatrix(balanced_generator(P * D.d[np.newaxis, :]))


def continuous_mixing(P) -> MLMatrix:
    """Generator ``A = P - I`` of a continuous-time Markov chain (column convention)."""
    P = _check_column_stochastic(P)
    return MLMatrix(balanced_generator(P))


def limit_family(alpha) -> MLMatrix:
    """``A = alpha e^T - I``: every site sends its outflow according to ``alpha``.

    Conservative by construction; irreducible iff ``alpha > 0``.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size < 1 or np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
        raise BadProbabilityVector("alpha must be a finite non-negative vector")
    if abs(math.fsum(alpha) - 1) > STOCHASTIC_TOL * alpha.size:
        raise BadProbabilityVector(f"alpha must sum to 1, got {math.fsum(alpha)!r}")
    P = np.repeat(alpha[:, np.newaxis], alpha.size, axis=1)
    return MLMatrix(balanced_generator(P))


def discretize_diffusion_1d(g, m: float, h: float, boundary="dirichlet") -> GrowthMixingSystem:
    """Centered-difference discretization of ``x_t = g(s) x + m x_ss`` on a uniform grid.

    ``A = tridiag(1, -2, 1) / h**2``.  Dirichlet (absorbing) ends keep the
    ``-2`` corners and leak; Neumann (reflecting) ends use ``-1`` corners
    and conserve mass.  ``m`` is kept as the system's nominal mixing rate.
    """
    g = np.asarray(g, dtype=float)
    boundary = Boundary(str(getattr(boundary, "value", boundary)).lower())
    if g.ndim != 1 or g.size < 2:
        raise BadGrid("need at least two grid points")
    if not (h > 0 and math.isfinite(h)):
        raise BadGrid(f"grid spacing must be positive, got {h!r}")
    if not m >= 0:
        raise BadGrid(f"diffusion rate must be >= 0, got {m!r}")
    n = g.size
    w = 1.0 / (h * h)
    A = np.zeros((n, n))
    idx = np.arange(n - 1)
    A[idx, idx + 1] = w
    A[idx + 1, idx] = w
    np.fill_diagonal(A, -2 * w)
    if boundary is Boundary.NEUMANN:
        A[0, 0] = A[-1, -1] = -w
    return GrowthMixingSystem(DiagonalGrowth(g), MLMatrix(A), float(m))


def random_column_stochastic(n: int, rng: np.random.Generator, ring_mass: float = RING_MASS) -> np.ndarray:
    """Dirichlet-uniform columns mixed with a cyclic ring so the chain is irreducible."""
    P = rng.dirichlet(np.ones(n), size=n).T
    ring = np.roll(np.eye(n), 1, axis=0)
    return (1 - ring_mass) * P + ring_mass * ring


def _random_growth(n: int, rng: np.random.Generator) -> DiagonalGrowth:
    while True:
        d = rng.uniform(-3.0, 3.0, n)
        if d.max() > d.min():
            return DiagonalGrowth(d)


def _general_block(n: int, rng: np.random.Generator) -> np.ndarray:
    W = rng.uniform(0.0, 2.0, (n, n)) * (rng.uniform(size=(n, n)) < 0.5)
    if n > 1:
        ring = np.roll(np.eye(n), 1, axis=0) > 0
        W[ring] += rng.uniform(0.1, 1.0, n)
    np.fill_diagonal(W, rng.uniform(-3.0, 3.0, n))
    return W


def _random_split(n: int, parts: int, rng: np.random.Generator) -> list[int]:
    cuts = np.sort(rng.choice(np.arange(1, n), size=parts - 1, replace=False))
    return np.diff(np.concatenate([[0], cuts, [n]])).tolist()


def random_system(n: int, style="ConservativeStochastic", seed: int = 42) -> GrowthMixingSystem:
    """Seeded random instance; the same ``(n, style, seed)`` gives bit-identical output."""
    if n < 2:
        raise ValidationError("random systems need n >= 2")
    style = Style.parse(style)
    rng = np.random.default_rng(seed)
    D = _random_growth(n, rng)

    if style is Style.CONSERVATIVE_STOCHASTIC:
        A = balanced_generator(random_column_stochastic(n, rng))
    elif style is Style.LOSSY:
        A = balanced_generator(random_column_stochastic(n, rng))
        leak = rng.uniform(0.0, 1.0, n) * (rng.uniform(size=n) < 0.5)
        leak[rng.integers(n)] += rng.uniform(0.1, 1.0)
        A[np.diag_indices(n)] -= leak
    elif style is Style.GENERAL_ML:
        A = _general_block(n, rng)
    else:
        parts = int(rng.integers(2, min(3, n) + 1))
        sizes = _random_split(n, parts, rng)
        A = np.zeros((n, n))
        starts = np.cumsum([0] + sizes)
        for k, size in enumerate(sizes):
            sl = slice(starts[k], starts[k + 1])
            A[sl, sl] = _general_block(size, rng)
            if starts[k] > 0:
                below = A[sl, : starts[k]]
                below[:] = rng.uniform(0.0, 1.0, below.shape) * (rng.uniform(size=below.shape) < 0.3)
        perm = rng.permutation(n)
        A = A[np.ix_(perm, perm)]
    return GrowthMixingSystem(D, MLMatrix(A))
