"""Perron roots and vectors of ML-matrices, and the derivative of the spectral abscissa in m."""

from __future__ import annotations

import math

import numpy as np

from .errors import BadProbabilityVector, NoConvergence, NonPositiveX, NotIrreducible
from .mlcore import GrowthMixingSystem, PerronPair, validate_ml
from .structure import frobenius_normal_form, is_irreducible

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000

# Matrix-vector products between squarings of the iteration matrix.
_SQUARE_EVERY = 4


def perron(A, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> PerronPair:
    """Perron root and vectors of an irreducible ML-matrix.

    Shifts ``B = A + cI`` with ``c = 1 + max |A_ii|`` so that ``B`` is
    non-negative with a positive diagonal, hence primitive, then power
    iterates ``B`` from the right and from the left starting at ``e/n``.
    To keep slowly mixing systems tractable the iteration matrix is
    periodically replaced by its (rescaled) square, i.e. the iterates are
    ``B^k x0`` with ``k`` growing geometrically.  Every product involves
    non-negative numbers only, so there is no cancellation.

    ``max_iter`` bounds the number of iteration steps (each one product
    with the current iteration matrix); the reported iteration count is the
    effective power of ``B`` applied.

    Converged when ``||Bx - lam x||_inf <= tol * ||A||_inf`` for both sides,
    with ``lam = e.Bx / e.x``.  The reported root is ``u.A v`` after the
    normalizations ``e.v = 1`` and ``u.v = 1``, which is second-order
    accurate in the vector residuals.
    """
    A = validate_ml(A)
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = A.n
    M = A.entries
    if n == 1:
        return PerronPair(float(M[0, 0]), np.ones(1), np.ones(1), 0)
    if not is_irreducible(A):
        raise NotIrreducible("Perron pair requires an irreducible ML-matrix")

    c = 1.0 + float(np.max(np.abs(np.diag(M))))
    B = M + c * np.eye(n)
    scale = float(np.max(np.abs(M).sum(axis=1)))
    threshold = tol * scale

    def residual(x, lhs):
        lam = lhs.sum() / x.sum()
        return float(np.max(np.abs(lhs - lam * x)))

    W = B.copy()
    power = 1
    x = np.full(n, 1.0 / n)
    y = np.full(n, 1.0 / n)
    applied = 0
    res = math.inf
    step = 0
    while True:
        Bx, yB = B @ x, y @ B
        res = max(residual(x, Bx), residual(y, yB))
        if res <= threshold:
            break
        if step >= max_iter:
            raise NoConvergence(step, res / scale)
        x = W @ x
        y = y @ W
        x /= x.sum()
        y /= y.sum()
        applied += power
        step += 1
        if step % _SQUARE_EVERY == 0 and power < 2**900:
            W = W @ W
            W /= W.max()
            power *= 2

    v = x / x.sum()
    u = y / (y @ v)
    r = float(u @ (M @ v))
    return PerronPair(r, v, u, applied)


def spab(A, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Spectral abscissa of an ML-matrix (max over Frobenius blocks if reducible)."""
    A = validate_ml(A)
    if A.n == 1:
        return float(A.entries[0, 0])
    form = frobenius_normal_form(A)
    if len(form.blocks) == 1:
        return perron(A, tol, max_iter).r
    return max(
        float(Ah.entries[0, 0]) if Ah.n == 1 else perron(Ah, tol, max_iter).r
        for Ah in form.block_matrices
    )


def spab_derivative(sys: GrowthMixingSystem, m: float, tol: float = DEFAULT_TOL) -> float:
    """``d/dm spab(D + mA) = u(m).A v(m)`` for irreducible ``F(m)``.

    Reducible systems are handled by :func:`growmix.structure.blockwise_derivative`.
    """
    if not m > 0:
        raise ValueError(f"derivative requires m > 0, got {m!r}")
    F = sys.materialize(m)
    if not is_irreducible(F):
        raise NotIrreducible("F(m) is reducible; use structure.blockwise_derivative")
    pair = perron(F, tol)
    return float(pair.u @ (sys.A.entries @ pair.v))


def variational_value(A, p, x) -> float:
    """Evaluate ``sum_i p_i [Ax]_i / x_i``.

    At ``p = u(A) * v(A)`` this is minimized over positive ``x`` exactly at
    ``x`` proportional to ``v(A)``, where it equals ``spab(A)``.
    """
    A = validate_ml(A)
    if not is_irreducible(A):
        raise NotIrreducible("variational formula is evaluated for irreducible A only")
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    if p.shape != (A.n,) or x.shape != (A.n,):
        raise ValueError("p and x must have length n")
    if np.any(p < 0) or abs(math.fsum(p) - 1) > 1e-12:
        raise BadProbabilityVector("p must be non-negative and sum to 1")
    if not np.all(x > 0):
        raise NonPositiveX("x must be strictly positive")
    return float(np.sum(p * (A.entries @ x) / x))
