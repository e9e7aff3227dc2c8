"""Time-domain solutions ``x(t) = exp(F(m) t) x(0)`` and growth-rate estimates."""

from __future__ import annotations

import csv
import enum
import math
from typing import Iterable, Sequence

import numpy as np

from .errors import Overflow, ValidationError
from .mlcore import GrowthMixingSystem
from .spectral import spab

_MAX_TERMS = 40


def _taylor(X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    out = np.eye(n)
    term = np.eye(n)
    for k in range(1, _MAX_TERMS):
        term = term @ X / k
        out = out + term
        if np.max(np.abs(term)) <= 1e-17 * np.max(np.abs(out)):
            break
    return out


def matrix_exponential(M, t: float = 1.0) -> np.ndarray:
    """``exp(M t)`` by scaling and squaring with a truncated Taylor series.

    The scaling power is chosen so the scaled argument has inf-norm at most
    0.5.  For matrices with non-negative off-diagonals the series is taken
    on the shifted matrix ``M + cI >= 0`` (with ``exp(-ct)`` folded into the
    scaled factor), so every term is non-negative and the result is
    entrywise non-negative.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("matrix exponential needs a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix has non-finite entries")
    if not (t >= 0 and math.isfinite(t)):
        raise ValidationError(f"t must be finite and >= 0, got {t!r}")
    n = M.shape[0]
    X = M * t
    offdiag = X - np.diag(np.diag(X))
    metzler = bool(np.all(offdiag >= 0))
    c = max(0.0, -float(np.min(np.diag(X)))) if metzler else 0.0
    S = X + c * np.eye(n) if metzler else X

    norm = float(np.max(np.abs(S).sum(axis=1))) if n else 0.0
    s = 0 if norm <= 0.5 else int(math.ceil(math.log2(norm / 0.5)))
    scaled = S / 2.0**s
    E = _taylor(scaled)
    if metzler and c:
        E *= math.exp(-c / 2.0**s)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(s):
            E = E @ E
    if not np.all(np.isfinite(E)):
        raise Overflow(f"exp(Mt) overflows double precision (||Mt||_inf = {norm:.3g})")
    return E


def trajectory(sys: GrowthMixingSystem, m: float, x0, t_grid: Iterable[float]) -> list[tuple[float, np.ndarray]]:
    """``[(t, x(t)) for t in t_grid]`` with ``x(t) = exp(F(m) t) x0``."""
    x0 = _initial(sys, x0)
    F = sys.materialize(m).entries
    return [(float(t), matrix_exponential(F, float(t)) @ x0) for t in t_grid]


def _initial(sys, x0) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise ValidationError(f"x0 must have length {sys.n}")
    if np.any(x0 < 0) or not np.any(x0 > 0) or not np.all(np.isfinite(x0)):
        raise ValidationError("x0 must be non-negative and not identically zero")
    return x0


def _advance(F: np.ndarray, x: np.ndarray, duration: float) -> tuple[np.ndarray, float]:
    """Propagate a unit-mass state for ``duration``; return it renormalized with the log growth."""
    log_mass = 0.0
    whole = int(math.floor(duration))
    frac = duration - whole
    steps = [(frac, 1)] if frac > 0 else []
    if whole:
        steps.append((1.0, whole))
    for dt, count in steps:
        step = matrix_exponential(F, dt)
        for _ in range(count):
            x = step @ x
            total = x.sum()
            if total <= 0:
                return x, -math.inf
            log_mass += math.log(total)
            x = x / total
    return x, log_mass


def asymptotic_rate(sys: GrowthMixingSystem, m: float, x0, t_final: float, window: float | None = 1.0) -> float:
    """Estimate the asymptotic growth rate of ``x(t)`` at ``t = t_final``.

    With ``window=w`` the estimate is ``(1/w) log(|x(t)|_1 / |x(t - w)|_1)``,
    which approaches ``spab(F(m))`` at the rate of the spectral gap.  With
    ``window=None`` it is the whole-horizon average
    ``(1/t) log(|x(t)|_1 / |x(0)|_1)``, which carries an ``O(1/t)`` offset
    from the initial condition.  The state is advanced one unit of time at
    a time and renormalized, accumulating log factors, so neither form
    overflows.
    """
    x = _initial(sys, x0)
    if not t_final > 0:
        raise ValidationError("t_final must be positive")
    F = sys.materialize(m).entries
    x = x / x.sum()
    if window is None:
        _, log_mass = _advance(F, x, t_final)
        return log_mass / t_final
    if not 0 < window <= t_final:
        raise ValidationError("window must lie in (0, t_final]")
    x, _ = _advance(F, x, t_final - window)
    _, log_mass = _advance(F, x, window)
    return log_mass / window


class Stability(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MARGINAL = "Marginal"


def classify_stability(sys: GrowthMixingSystem, m: float, tol: float = 1e-9) -> Stability:
    """Sign of ``spab(F(m))``: the zero solution is stable iff it is negative."""
    r = spab(sys.materialize(m))
    if r < -tol:
        return Stability.STABLE
    if r > tol:
        return Stability.UNSTABLE
    return Stability.MARGINAL


def isolated_support(sys: GrowthMixingSystem, x0) -> list[int]:
    """Isolated Frobenius blocks of ``A`` on which ``x0`` is non-zero.

    Growth carried by an isolated block shows up in ``x(t)`` only if the
    initial state loads that block; a zero block stays zero for all time.
    """
    from .structure import frobenius_normal_form

    x0 = _initial(sys, x0)
    form = frobenius_normal_form(sys.A)
    return [h for h in form.isolated if np.any(x0[list(form.blocks[h])] > 0)]


def write_trajectory_csv(rows: Sequence[tuple[float, np.ndarray]], path_or_file) -> None:
    """CSV with header ``t,x1,...,xn`` and 17 significant digits."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        writer = csv.writer(fh, lineterminator="\n")
        n = len(rows[0][1]) if rows else 0
        writer.writerow(["t"] + [f"x{i + 1}" for i in range(n)])
        for t, x in rows:
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in x])
    finally:
        if own:
            fh.close()
