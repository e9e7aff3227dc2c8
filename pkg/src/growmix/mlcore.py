"""Core types: ML-matrices, diagonal growth rates and growth-mixing systems.

An ML-matrix (Metzler, essentially non-negative) is a square real matrix
whose off-diagonal entries are all non-negative.  A growth-mixing system
pairs a diagonal growth matrix ``D`` with an ML mixing pattern ``A`` and
materializes ``F(m) = D + m A`` for a mixing rate ``m >= 0``.

All types are immutable: the backing arrays are read-only copies.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeOffDiagonal,
    NonFinite,
    NonSquare,
    ValidationError,
)


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


class ConservationClass(enum.Enum):
    CONSERVATIVE = "Conservative"
    LOSSY = "Lossy"
    NEITHER = "Neither"


@dataclass(frozen=True, eq=False)
class MLMatrix:
    """Square real matrix with non-negative off-diagonal entries."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise NonSquare(f"expected a non-empty square matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFinite("matrix has non-finite entries")
        bad = arr < 0
        np.fill_diagonal(bad, False)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise NegativeOffDiagonal(int(i), int(j), float(arr[i, j]))
        object.__setattr__(self, "entries", _frozen(arr))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, MLMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"MLMatrix({self.entries.tolist()!r})"

    def shift(self, c: float) -> MLMatrix:
        """Return ``A + c I`` (always an ML-matrix)."""
        return MLMatrix(self.entries + c * np.eye(self.n))

    def scale(self, s: float) -> MLMatrix:
        if s < 0:
            raise ValidationError("scale factor must be non-negative")
        return MLMatrix(s * self.entries)

    def restrict(self, indices: Sequence[int]) -> MLMatrix:
        idx = list(indices)
        return MLMatrix(self.entries[np.ix_(idx, idx)])

    def transpose(self) -> MLMatrix:
        return MLMatrix(self.entries.T)

    def column_sums(self) -> list[float]:
        """Correctly rounded column sums (``math.fsum``), so zero means exactly zero."""
        return [math.fsum(self.entries[:, j]) for j in range(self.n)]

    def to_dict(self) -> dict:
        return {"n": self.n, "entries": self.entries.tolist()}

    @classmethod
    def from_dict(cls, data) -> MLMatrix:
        """Accept ``{"n", "entries"}`` or a bare nested list."""
        if not isinstance(data, dict):
            return validate_ml(data)
        entries = data["entries"]
        if "n" in data and len(entries) != data["n"]:
            raise DimensionMismatch(f"'n' = {data['n']} but {len(entries)} rows given")
        return validate_ml(entries)


@dataclass(frozen=True, eq=False)
class DiagonalGrowth:
    """Site growth (or decay) rates, the diagonal of ``D``."""

    d: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.d, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError(f"expected a non-empty vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFinite("growth rates must be finite")
        object.__setattr__(self, "d", _frozen(arr))

    @property
    def n(self) -> int:
        return self.d.size

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.d)

    @property
    def spread(self) -> float:
        return float(self.d.max() - self.d.min())

    @property
    def mean(self) -> float:
        return math.fsum(self.d) / self.n

    def is_uniform(self, tol: float = 0.0) -> bool:
        """True when ``D = c I`` up to ``tol`` in the max-min spread."""
        return self.spread <= tol

    def restrict(self, indices: Sequence[int]) -> DiagonalGrowth:
        return DiagonalGrowth(self.d[list(indices)])

    def __eq__(self, other):
        if not isinstance(other, DiagonalGrowth):
            return NotImplemented
        return np.array_equal(self.d, other.d)

    def __hash__(self):
        return hash(self.d.tobytes())

    def __repr__(self):
        return f"DiagonalGrowth({self.d.tolist()!r})"

    def to_dict(self) -> dict:
        return {"n": self.n, "d": self.d.tolist()}

    @classmethod
    def from_dict(cls, data) -> DiagonalGrowth:
        """Accept ``{"n", "d"}`` or a bare list of rates."""
        if not isinstance(data, dict):
            return cls(data)
        d = data["d"]
        if "n" in data and len(d) != data["n"]:
            raise DimensionMismatch(f"'n' = {data['n']} but {len(d)} rates given")
        return cls(d)


@dataclass(frozen=True, eq=False)
class GrowthMixingSystem:
    """The pair ``(D, A)``; ``m`` is an optional nominal mixing rate."""

    D: DiagonalGrowth
    A: MLMatrix
    m: float | None = field(default=None)

    def __post_init__(self):
        if not isinstance(self.D, DiagonalGrowth):
            object.__setattr__(self, "D", DiagonalGrowth(self.D))
        if not isinstance(self.A, MLMatrix):
            object.__setattr__(self, "A", validate_ml(self.A))
        if self.D.n != self.A.n:
            raise DimensionMismatch(f"D has dimension {self.D.n} but A has {self.A.n}")
        if self.m is not None and not (math.isfinite(self.m) and self.m >= 0):
            raise ValidationError("nominal mixing rate must be finite and >= 0")

    @property
    def n(self) -> int:
        return self.A.n

    def materialize(self, m: float) -> MLMatrix:
        """Return ``F(m) = D + m A``."""
        if not m >= 0:
            raise ValidationError(f"mixing rate must be >= 0, got {m!r}")
        if m == 0:
            return MLMatrix(self.D.matrix)
        return MLMatrix(self.D.matrix + m * self.A.entries)

    def subsystem(self, indices: Sequence[int]) -> GrowthMixingSystem:
        return GrowthMixingSystem(self.D.restrict(indices), self.A.restrict(indices), self.m)

    def with_growth(self, D) -> GrowthMixingSystem:
        return GrowthMixingSystem(D if isinstance(D, DiagonalGrowth) else DiagonalGrowth(D), self.A, self.m)

    def __eq__(self, other):
        if not isinstance(other, GrowthMixingSystem):
            return NotImplemented
        return self.D == other.D and self.A == other.A and self.m == other.m

    def __repr__(self):
        return f"GrowthMixingSystem(D={self.D!r}, A={self.A!r}, m={self.m!r})"

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"D": self.D.to_dict(), "A": self.A.to_dict()}
        if self.m is not None:
            out["m"] = self.m
        return out

    @classmethod
    def from_dict(cls, data: dict) -> GrowthMixingSystem:
        return cls(DiagonalGrowth.from_dict(data["D"]), MLMatrix.from_dict(data["A"]), data.get("m"))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> GrowthMixingSystem:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class PerronPair:
    """Perron root ``r`` with right vector ``v`` (sum 1) and left vector ``u`` (``u.v = 1``).

    ``p = u * v`` are the sensitivity weights of ``r`` to diagonal perturbations.
    """

    r: float
    v: np.ndarray
    u: np.ndarray
    iterations: int = 0

    def __post_init__(self):
        object.__setattr__(self, "v", _frozen(self.v))
        object.__setattr__(self, "u", _frozen(self.u))

    @property
    def p(self) -> np.ndarray:
        return self.u * self.v

    def __iter__(self):
        return iter((self.r, self.v, self.u, self.p))


def validate_ml(matrix) -> MLMatrix:
    """Validate a square real matrix as an ML-matrix.

    Raises :class:`NegativeOffDiagonal` for the first negative off-diagonal
    entry in row-major order, :class:`NonSquare` or :class:`NonFinite`.
    """
    if isinstance(matrix, MLMatrix):
        return matrix
    try:
        arr = np.asarray(matrix, dtype=float)
    except (TypeError, ValueError) as exc:
        raise NonSquare(f"not a rectangular numeric matrix: {exc}") from None
    return MLMatrix(arr)


def as_growth(D) -> DiagonalGrowth:
    if isinstance(D, DiagonalGrowth):
        return D
    arr = np.asarray(D, dtype=float)
    if arr.ndim == 2:
        if np.count_nonzero(arr - np.diag(np.diag(arr))):
            raise ValidationError("growth matrix must be diagonal")
        arr = np.diag(arr)
    return DiagonalGrowth(arr)


def conservation_class(A) -> ConservationClass:
    """Classify the column sums ``e^T A`` exactly.

    Conservative when every column sum is zero, Lossy when all are ``<= 0``
    and at least one is negative, Neither otherwise.
    """
    sums = validate_ml(A).column_sums()
    if all(s == 0 for s in sums):
        return ConservationClass.CONSERVATIVE
    if all(s <= 0 for s in sums):
        return ConservationClass.LOSSY
    return ConservationClass.NEITHER
