"""Executable checks of the growth-versus-mixing inequalities.

Each ``check_*`` returns a :class:`Verdict` carrying both sides of the
inequality and their gap, so callers can inspect magnitudes rather than a
bare boolean.  Unless stated otherwise ``gap = rhs - lhs`` and the check
holds when ``gap >= -tolerance``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BadBeta,
    NoCommonPerronVector,
    NonPositiveY,
    NotHeterogeneous,
    NotIrreducible,
    PreconditionSpabNonzero,
    ValidationError,
    WrongConservationClass,
)
from .mlcore import (
    ConservationClass,
    GrowthMixingSystem,
    MLMatrix,
    as_growth,
    conservation_class,
    validate_ml,
)
from .spectral import perron, spab, spab_derivative
from .structure import blockwise_derivative, is_irreducible

DEFAULT_TOL = 1e-10
LIMIT_TOL = 1e-3
LIMIT_GRID = (1.0, 10.0, 100.0, 1000.0, 10000.0)


@dataclass
class Verdict:
    """Outcome of one inequality check.

    ``strict`` checks hold only when ``gap > tolerance``; ``inconclusive``
    marks verdicts taken at a point where the derivative may not exist.
    """

    check: str
    holds: bool
    lhs: float
    rhs: float
    gap: float
    equality_expected: bool
    tolerance: float
    strict: bool = False
    inconclusive: bool = False
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def equality_ok(self) -> bool:
        return not self.equality_expected or abs(self.gap) <= self.tolerance

    def to_record(self, seed: int | None = None) -> dict:
        rec = {
            "check": self.check,
            "holds": bool(self.holds),
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "gap": float(self.gap),
            "equality_expected": bool(self.equality_expected),
            "seed": seed,
        }
        if self.inconclusive:
            rec["inconclusive"] = True
        return rec


def _verdict(check, lhs, rhs, gap, equality_expected, tol, strict=False, **details) -> Verdict:
    holds = gap > tol if strict else gap >= -tol
    return Verdict(check, bool(holds), float(lhs), float(rhs), float(gap), bool(equality_expected), tol,
                   strict, details=details)


def _require_irreducible(A: MLMatrix, what: str):
    if not is_irreducible(A):
        raise NotIrreducible(f"{what} requires an irreducible ML-matrix")


def _bilinear(pair, M) -> float:
    return float(pair.u @ (np.asarray(M) @ pair.v))


def check_basic_inequality(A, D, tol: float = DEFAULT_TOL) -> Verdict:
    """``spab(A + D) - spab(A) <= u(A+D).D v(A+D)``, equal iff ``D = cI``."""
    A, D = validate_ml(A), as_growth(D)
    _require_irreducible(A, "basic inequality")
    pair = perron(MLMatrix(A.entries + D.matrix))
    lhs = pair.r - perron(A).r
    rhs = float(np.sum(pair.p * D.d))
    return _verdict("basic_inequality", lhs, rhs, rhs - lhs, D.is_uniform(0), tol)


def check_corollary_basic(A, D, tol: float = DEFAULT_TOL) -> Verdict:
    """``u(A+D).A v(A+D) <= spab(A)``, equal iff ``D = cI``."""
    A, D = validate_ml(A), as_growth(D)
    _require_irreducible(A, "corollary of the basic inequality")
    pair = perron(MLMatrix(A.entries + D.matrix))
    lhs = _bilinear(pair, A.entries)
    rhs = perron(A).r
    return _verdict("corollary_basic", lhs, rhs, rhs - lhs, D.is_uniform(0), tol)


def check_convexity_derived(A, D, beta: float, tol: float = DEFAULT_TOL) -> Verdict:
    """Chain ``spab(A+D) - spab(A) <= spab(A/b + D) - spab(A/b) <= u(A+bD).D v(A+bD)`` for ``b > 1``.

    ``gap`` is the smaller of the two links; both are in ``details``.
    """
    A, D = validate_ml(A), as_growth(D)
    if not beta > 1:
        raise BadBeta(f"beta must exceed 1, got {beta!r}")
    _require_irreducible(A, "convexity chain")
    first = spab(MLMatrix(A.entries + D.matrix)) - spab(A)
    Ab = A.entries / beta
    middle = spab(MLMatrix(Ab + D.matrix)) - spab(MLMatrix(Ab))
    pair = perron(MLMatrix(A.entries + beta * D.matrix))
    last = float(np.sum(pair.p * D.d))
    gaps = (middle - first, last - middle)
    return _verdict("convexity_derived", first, last, min(gaps), D.is_uniform(0), tol,
                    middle=middle, gaps=gaps, beta=beta)


class Side(enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"


COMMON_VECTOR_TOL = 1e-8


def check_sums(A_list: Sequence, D, side="Right", tol: float = DEFAULT_TOL) -> Verdict:
    """``u(A+D).A v(A+D) <= sum_k spab(A_k)`` for ``A = sum_k A_k`` sharing a Perron vector."""
    mats = [validate_ml(A) for A in A_list]
    if not mats:
        raise ValidationError("need at least one summand")
    D = as_growth(D)
    side = Side(getattr(side, "value", side))
    n = mats[0].n
    if any(M.n != n for M in mats) or D.n != n:
        raise ValidationError("summands and D must share one dimension")
    pairs = []
    for M in mats:
        _require_irreducible(M, "sums corollary")
        pairs.append(perron(M))
    if side is Side.RIGHT:
        vecs = [p.v for p in pairs]
    else:
        vecs = [p.u / p.u.sum() for p in pairs]
    spread = max(float(np.max(np.abs(w - vecs[0]))) for w in vecs)
    if spread > COMMON_VECTOR_TOL:
        raise NoCommonPerronVector(f"{side.value} Perron vectors differ by {spread:.3e}")
    A = MLMatrix(sum(M.entries for M in mats))
    _require_irreducible(A, "sums corollary")
    pair = perron(MLMatrix(A.entries + D.matrix))
    lhs = _bilinear(pair, A.entries)
    rhs = math.fsum(p.r for p in pairs)
    return _verdict("sums", lhs, rhs, rhs - lhs, D.is_uniform(0), tol, side=side.value, vector_spread=spread)


FLIP = "flip"


def check_flip(A, y=FLIP, tol: float = DEFAULT_TOL) -> Verdict:
    """``z.A y >= spab(A)`` whenever ``y * z = u(A) * v(A)`` with ``y, z > 0``.

    ``y="flip"`` uses ``y`` proportional to ``u(A)`` and ``z`` to ``v(A)``,
    scaled as ``y = u (e.v / e.u)``, ``z = v (e.u / e.v)``.
    """
    A = validate_ml(A)
    _require_irreducible(A, "flip inequality")
    pair = perron(A)
    u, v = pair.u, pair.v
    if isinstance(y, str) and y == FLIP:
        ratio = v.sum() / u.sum()
        y_vec, z = u * ratio, v / ratio
    else:
        y_vec = np.asarray(y, dtype=float)
        if y_vec.shape != (A.n,) or not np.all(y_vec > 0):
            raise NonPositiveY("y must be a strictly positive vector of length n")
        z = pair.p / y_vec
    rhs = float(z @ (A.entries @ y_vec))
    lhs = pair.r

    def proportional(a, b):
        a, b = a / a.sum(), b / b.sum()
        return float(np.max(np.abs(a - b))) <= COMMON_VECTOR_TOL

    equality = proportional(y_vec, v) or proportional(u, v)
    return _verdict("flip", lhs, rhs, rhs - lhs, equality, tol)


def check_main_derivative_bound(sys: GrowthMixingSystem, m: float, tol: float = DEFAULT_TOL) -> Verdict:
    """``d/dm spab(D + mA) <= spab(A)``; for reducible ``A`` the sharper ``<= spab(A_k) <= spab(A)``.

    For reducible ``A`` with tied argmax blocks the right derivative is used
    and the verdict is marked inconclusive.
    """
    if not m > 0:
        raise ValidationError("derivative bound is checked at m > 0")
    spab_A = spab(sys.A)
    if is_irreducible(sys.A):
        lhs = spab_derivative(sys, m)
        return _verdict("main_derivative_bound", lhs, spab_A, spab_A - lhs, sys.D.is_uniform(0), tol)

    bd = blockwise_derivative(sys, m)
    spab_blocks = [spab(sys.A.restrict(b)) for b in bd.argmax_blocks]
    spab_kappa = max(spab_blocks)
    lhs = bd.right
    gaps = (spab_kappa - lhs, spab_A - spab_kappa)
    equality = all(sys.D.restrict(b).is_uniform(0) for b in bd.argmax_blocks)
    verdict = _verdict("main_derivative_bound", lhs, spab_kappa, min(gaps), equality, tol,
                       spab_A=spab_A, gaps=gaps, argmax_blocks=[list(b) for b in bd.argmax_blocks])
    verdict.inconclusive = bd.near_tie
    return verdict


def _grid(m_grid) -> np.ndarray:
    grid = np.asarray(list(m_grid), dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValidationError("m_grid must be a strictly increasing sequence of at least two m >= 0")
    return grid


def _sweep(sys, grid) -> np.ndarray:
    return np.array([spab(sys.materialize(m)) for m in grid])


def _slopes(sys, grid) -> list[float]:
    return [blockwise_derivative(sys, float(m)).right for m in grid]


def check_monotone_decrease(sys: GrowthMixingSystem, m_grid, tol: float = 1e-9) -> Verdict:
    """Conservative ``A``: ``spab(F(m))`` is non-increasing and its slope is ``<= 0``.

    ``lhs`` is the largest increase between successive grid points,
    ``rhs = 0``; the largest slope is folded into ``gap`` as well.
    """
    if conservation_class(sys.A) is not ConservationClass.CONSERVATIVE:
        raise WrongConservationClass("mixing pattern is not conservative")
    grid = _grid(m_grid)
    values = _sweep(sys, grid)
    rise = float(np.max(np.diff(values)))
    slope = max(_slopes(sys, grid))
    return _verdict("monotone_decrease", rise, 0.0, -max(rise, slope), sys.D.is_uniform(0), tol,
                    max_slope=slope, values=values.tolist())


def check_lossy_strict(sys: GrowthMixingSystem, m_grid, tol: float = 1e-9) -> Verdict:
    """Lossy ``A``: ``spab(F(m))`` strictly decreases and its slope is negative.

    Strict check: ``gap`` is the smallest decrease (or minus the largest
    slope, whichever is smaller) and must exceed ``tol``.
    """
    if conservation_class(sys.A) is not ConservationClass.LOSSY:
        raise WrongConservationClass("mixing pattern is not lossy")
    grid = _grid(m_grid)
    values = _sweep(sys, grid)
    rise = float(np.max(np.diff(values)))
    slope = max(_slopes(sys, grid))
    return _verdict("lossy_strict", rise, 0.0, -max(rise, slope), False, tol, strict=True,
                    max_slope=slope, values=values.tolist())


SPAB_ZERO_TOL = 1e-10


def check_bounds(sys: GrowthMixingSystem, m: float, tol: float = 1e-9) -> Verdict:
    """With ``spab(A) = 0``: ``min D <= spab(D + mA) <= max D``.

    ``lhs = spab(F(m))``, ``rhs = max D``; ``gap`` is the tighter of the two margins.
    """
    spab_A = spab(sys.A)
    if abs(spab_A) > SPAB_ZERO_TOL:
        raise PreconditionSpabNonzero(f"spab(A) = {spab_A!r} is not zero")
    r = spab(sys.materialize(m))
    lo, hi = float(sys.D.d.min()), float(sys.D.d.max())
    return _verdict("bounds", r, hi, min(r - lo, hi - r), sys.D.is_uniform(0), tol, min_D=lo, spab_A=spab_A)


def check_limit(sys: GrowthMixingSystem, lambda_target: float, m_grid=LIMIT_GRID, tol: float = LIMIT_TOL) -> Verdict:
    """``spab(D + mA) -> lambda`` as ``m`` grows.

    Holds when the error at the largest ``m`` is within ``tol`` and the
    error sequence no longer increases once it has dropped below 0.1.
    ``lhs`` is the final error, ``rhs = tol``.
    """
    grid = _grid(m_grid)
    errors = np.abs(_sweep(sys, grid) - lambda_target)
    below = np.nonzero(errors < 0.1)[0]
    rise = 0.0
    if below.size:
        tail = errors[below[0]:]
        rise = max(0.0, float(np.max(np.diff(tail)))) if tail.size > 1 else 0.0
    slack = 1e-12 * (1 + abs(lambda_target))
    final = float(errors[-1])
    gap = min(tol - final, slack - rise)
    return _verdict("limit", final, tol, gap, False, 0.0, errors=errors.tolist(), max_rise=rise)


def check_stability_monotone(sys: GrowthMixingSystem, m_star: float, m_grid=None, m_hi: float | None = None,
                             tol: float = 1e-9) -> Verdict:
    """If ``spab(A) <= 0`` and ``F(m*)`` is unstable, ``F(m)`` is unstable for all ``m <= m*``.

    ``lhs = spab(F(m*))``, ``rhs`` is the smallest ``spab(F(m))`` over the
    grid on ``[0, m*]``.  ``details["m_crit"]`` is the mixing rate beyond
    ``m*`` where ``spab`` crosses zero (None when no sign change is found
    up to ``m_hi``).
    """
    spab_A = spab(sys.A)
    if spab_A > SPAB_ZERO_TOL:
        raise ValidationError(f"requires spab(A) <= 0, got {spab_A!r}")
    r_star = spab(sys.materialize(m_star))
    if not r_star > 0:
        raise ValidationError(f"F(m*) is not unstable: spab = {r_star!r}")
    if m_grid is None:
        m_grid = np.linspace(0.0, m_star, 21)
    grid = np.asarray(list(m_grid), dtype=float)
    if np.any(grid < 0) or np.any(grid > m_star):
        raise ValidationError("grid must lie inside [0, m*]")
    values = _sweep(sys, grid)
    low = float(values.min())
    m_crit = stability_threshold(sys, m_star, m_hi)
    return _verdict("stability_monotone", r_star, low, low - r_star, sys.D.is_uniform(0), tol,
                    m_crit=m_crit, unstable=bool(low > 0))


def stability_threshold(sys: GrowthMixingSystem, m_lo: float, m_hi: float | None = None,
                        tol: float = 1e-9) -> float | None:
    """Root of ``spab(F(m)) = 0`` in ``[m_lo, m_hi]``, or None without a sign change."""
    if m_hi is None:
        m_hi = max(1.0, m_lo) * 1e4
    f = lambda m: spab(sys.materialize(m))
    lo_val, hi_val = f(m_lo), f(m_hi)
    if lo_val == 0:
        return float(m_lo)
    if lo_val * hi_val > 0:
        return None
    root = brentq(f, m_lo, m_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(root)) > tol:
        # brentq converges on the bracket; fall back to plain bisection on the value.
        a, b = m_lo, m_hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            val = f(mid)
            if abs(val) <= tol:
                return mid
            if (val > 0) == (lo_val > 0):
                a = mid
            else:
                b = mid
        return None
    return float(root)


def check_heterogeneity(sys: GrowthMixingSystem, search_grid, tol: float = 0.0) -> Verdict:
    """Non-uniform growth: ``spab(F(m)) > mean(D)`` for all sufficiently small ``m``.

    Strict check at the first grid point; ``details["m_star"]`` is the first
    grid point where the inequality fails (``inf`` if it never does) and
    ``details["prefix"]`` the number of leading grid points satisfying it.
    """
    if sys.D.is_uniform(0):
        raise NotHeterogeneous("growth rates are uniform")
    mean = sys.D.mean
    at_zero = float(sys.D.d.max())
    grid = np.asarray(list(search_grid), dtype=float)
    if grid.size == 0 or np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValidationError("search grid must be non-empty, increasing and >= 0")
    values = _sweep(sys, grid)
    ok = values > mean + tol
    prefix = int(np.argmin(ok)) if not ok.all() else int(ok.size)
    m_star = float(grid[prefix]) if prefix < grid.size else math.inf
    return _verdict("heterogeneity", mean, float(values[0]), float(values[0]) - mean, False, tol, strict=True,
                    m_star=m_star, prefix=prefix, spab_at_zero=at_zero, zero_ok=at_zero > mean)


def check_convexity_in_m(sys: GrowthMixingSystem, m1: float, m2: float, alpha: float,
                         tol: float = DEFAULT_TOL) -> Verdict:
    """``spab(F((1-a) m1 + a m2)) <= (1-a) spab(F(m1)) + a spab(F(m2))``, equal iff ``D = cI``."""
    if not (m1 >= 0 and m2 >= 0 and m1 != m2):
        raise ValidationError("need distinct m1, m2 >= 0")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    _require_irreducible(sys.A, "convexity in m")
    mid = (1 - alpha) * m1 + alpha * m2
    lhs = spab(sys.materialize(mid))
    rhs = (1 - alpha) * spab(sys.materialize(m1)) + alpha * spab(sys.materialize(m2))
    return _verdict("convexity_in_m", lhs, rhs, rhs - lhs, sys.D.is_uniform(0), tol, m1=m1, m2=m2, alpha=alpha)


def limit_target(sys: GrowthMixingSystem, alpha) -> float:
    """``sum_i alpha_i d_i``, the large-mixing limit for ``A = alpha e^T - I``."""
    return math.fsum(np.asarray(alpha, dtype=float) * sys.D.d)
