"""Irreducibility and the Frobenius normal form of ML-matrices.

The directed graph of an ML-matrix has an edge ``j -> i`` whenever the
off-diagonal entry ``A[i, j]`` is non-zero (quantity flows from site ``j``
into site ``i``).  Its strongly connected components are the diagonal
blocks of the Frobenius normal form; ordering them topologically along the
flow makes the permuted matrix block lower triangular.  Structural zeros
are exact zeros, no thresholding is applied.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .mlcore import GrowthMixingSystem, MLMatrix, validate_ml

TIE_RTOL = 1e-9


def _pattern(A: MLMatrix) -> np.ndarray:
    pat = A.entries != 0
    np.fill_diagonal(pat, False)
    return pat


@lru_cache(maxsize=4096)
def _components_of_pattern(n: int, packed: bytes) -> tuple[int, tuple[int, ...]]:
    pat = np.unpackbits(np.frombuffer(packed, dtype=np.uint8), count=n * n).reshape(n, n).astype(bool)
    # Edge direction is irrelevant for strong connectivity.
    ncomp, labels = connected_components(csr_matrix(pat), directed=True, connection="strong")
    return int(ncomp), tuple(int(x) for x in labels)


def _components(A: MLMatrix) -> tuple[int, np.ndarray]:
    if A.n == 1:
        return 1, np.zeros(1, dtype=int)
    # Sweeps over m revisit one pattern many times, so results are cached by pattern.
    ncomp, labels = _components_of_pattern(A.n, np.packbits(_pattern(A)).tobytes())
    return ncomp, np.array(labels, dtype=int)


def is_irreducible(A) -> bool:
    """True iff the off-diagonal pattern is strongly connected (always for n = 1)."""
    A = validate_ml(A)
    ncomp, _ = _components(A)
    return ncomp == 1


@dataclass(frozen=True)
class FrobeniusForm:
    """Block lower triangular arrangement of an ML-matrix.

    ``permutation[k]`` is the original index placed at position ``k``;
    ``blocks[h]`` lists the original indices of diagonal block ``h``
    (ascending).  ``isolated`` holds the (0-based) indices of blocks that
    receive no inflow from other blocks; these come first.
    """

    permutation: tuple[int, ...]
    blocks: tuple[tuple[int, ...], ...]
    isolated: tuple[int, ...]
    block_matrices: tuple[MLMatrix, ...]

    def permuted(self, A) -> np.ndarray:
        arr = np.asarray(validate_ml(A).entries)
        p = list(self.permutation)
        return arr[np.ix_(p, p)]

    def block_of(self, index: int) -> int:
        for h, block in enumerate(self.blocks):
            if index in block:
                return h
        raise KeyError(index)

    def to_dict(self) -> dict:
        return {
            "permutation": list(self.permutation),
            "blocks": [list(b) for b in self.blocks],
            "isolated": list(self.isolated),
        }


def frobenius_normal_form(A) -> FrobeniusForm:
    """Condense the strongly connected components of ``A`` into Frobenius normal form.

    Isolated blocks (sources of the condensation) are placed first, ordered
    by their smallest index; the remaining blocks follow a topological
    order that always picks the ready block with the smallest index, so
    the result is deterministic.
    """
    A = validate_ml(A)
    ncomp, labels = _components(A)
    members = [[] for _ in range(ncomp)]
    for i, lab in enumerate(labels):
        members[lab].append(i)

    succ = [set() for _ in range(ncomp)]
    indeg = [0] * ncomp
    rows, cols = np.nonzero(_pattern(A))
    for i, j in zip(rows.tolist(), cols.tolist()):
        src, dst = labels[j], labels[i]
        if src != dst and dst not in succ[src]:
            succ[src].add(dst)
            indeg[dst] += 1

    sources = sorted((c for c in range(ncomp) if indeg[c] == 0), key=lambda c: members[c][0])
    order = list(sources)
    remaining = list(indeg)
    ready: list[tuple[int, int]] = []

    def release(c):
        for nxt in succ[c]:
            remaining[nxt] -= 1
            if remaining[nxt] == 0:
                heapq.heappush(ready, (members[nxt][0], nxt))

    for c in sources:
        release(c)
    while ready:
        _, c = heapq.heappop(ready)
        order.append(c)
        release(c)

    blocks = tuple(tuple(members[c]) for c in order)
    permutation = tuple(i for b in blocks for i in b)
    return FrobeniusForm(
        permutation=permutation,
        blocks=blocks,
        isolated=tuple(range(len(sources))),
        block_matrices=tuple(A.restrict(b) for b in blocks),
    )


class BlockRoot(NamedTuple):
    block: tuple[int, ...]
    spab_F: float
    spab_A: float


class BlockwiseSpab(NamedTuple):
    spab: float
    argmax_blocks: frozenset[int]
    per_block: list[BlockRoot]


def _argmax_blocks(values: list[float]) -> frozenset[int]:
    top = max(values)
    tol = TIE_RTOL * (1 + abs(top))
    return frozenset(h for h, val in enumerate(values) if top - val <= tol)


def blockwise_spab(sys: GrowthMixingSystem, m: float, tol: float = 1e-12) -> BlockwiseSpab:
    """Spectral abscissa of ``F(m)`` as the max over its Frobenius blocks.

    Also reports, per block, the spectral abscissa of the matching block of
    ``A``, so callers can evaluate ``d/dm spab(F) <= spab(A_k) <= spab(A)``.
    """
    from .spectral import spab

    form = frobenius_normal_form(sys.materialize(m))
    per_block = []
    for block in form.blocks:
        sub = sys.subsystem(block)
        per_block.append(BlockRoot(block, spab(sub.materialize(m), tol=tol), spab(sub.A, tol=tol)))
    roots = [b.spab_F for b in per_block]
    return BlockwiseSpab(max(roots), _argmax_blocks(roots), per_block)


@dataclass(frozen=True)
class BlockDerivative:
    """Derivative of ``spab(D + mA)`` in ``m`` for possibly reducible systems.

    ``derivative`` is None where the two-sided derivative may not exist
    (tied argmax blocks, or ``m = 0`` with more than one site); ``right``
    is then the one-sided derivative from above.
    """

    derivative: float | None
    right: float
    left: float | None
    argmax_blocks: tuple[tuple[int, ...], ...]
    near_tie: bool


def blockwise_derivative(sys: GrowthMixingSystem, m: float, tol: float = 1e-12) -> BlockDerivative:
    from .spectral import spab, spab_derivative

    if m < 0:
        raise ValueError("mixing rate must be >= 0")
    if m == 0 and sys.n > 1:
        # F(0) = D: first-order perturbation of the top eigenvalue of D is
        # governed by A restricted to the sites attaining max D.
        d = sys.D.d
        top = d.max()
        idx = tuple(int(i) for i in np.nonzero(top - d <= TIE_RTOL * (1 + abs(top)))[0])
        right = spab(sys.A.restrict(idx), tol=tol)
        return BlockDerivative(None, right, None, (idx,), len(idx) > 1)

    bw = blockwise_spab(sys, m, tol=tol)
    blocks = [bw.per_block[h].block for h in sorted(bw.argmax_blocks)]
    slopes = [spab_derivative(sys.subsystem(b), m, tol=tol) for b in blocks]
    tied = len(blocks) > 1
    return BlockDerivative(
        None if tied else slopes[0],
        max(slopes),
        min(slopes),
        tuple(blocks),
        tied,
    )
