"""The six almost-Clifford structures J1..J6 on R^{8n} as signed block permutations.

Coordinates are grouped in 8 blocks of size n: block b holds x_{bn+1..bn+n}
(0-based indices b*n .. b*n+n-1). Each structure maps the basis vector
e_{(b,i)} to sign[b] * e_{(target[b], i)}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NBLOCKS = 8

# block -> (signed) target block, transcribed row by row from the structure tables
_TABLES = {
    1: ((1, 0, 4, 5, 2, 3, 7, 6), (+1, -1, +1, +1, -1, -1, +1, -1)),
    2: ((2, 4, 0, 6, 1, 7, 3, 5), (+1, -1, -1, +1, +1, -1, -1, +1)),
    3: ((3, 5, 6, 0, 7, 1, 2, 4), (+1, -1, -1, -1, +1, +1, +1, -1)),
    4: ((4, 2, 1, 7, 0, 6, 5, 3), (+1, -1, +1, -1, -1, +1, -1, +1)),
    5: ((5, 3, 7, 1, 6, 0, 4, 2), (+1, -1, -1, +1, +1, -1, -1, +1)),
    6: ((6, 7, 3, 2, 5, 4, 0, 1), (+1, -1, -1, +1, +1, -1, -1, +1)),
}

STRUCTURE_IDS = tuple(sorted(_TABLES))


def check_structure_id(k) -> int:
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k not in _TABLES:
        raise ValueError(f"structure id must be an integer in 1..6, got {k!r}")
    return int(k)


def block_count(length: int) -> int:
    """Block size n for a vector of length 8n."""
    if length <= 0 or length % NBLOCKS:
        raise ValueError(f"vector length must be a positive multiple of 8, got {length}")
    return length // NBLOCKS


@dataclass(frozen=True)
class SignedBlockPermutation:
    """Block-level signed map: block b goes to ``sign[b]`` times block ``target[b]``.

    Construction only checks ranges; use :attr:`is_bijection` to test whether
    ``target`` is a permutation (true for everything built by this module).
    """

    target: tuple[int, ...]
    sign: tuple[int, ...]

    def __post_init__(self):
        target = tuple(int(t) for t in self.target)
        sign = tuple(int(s) for s in self.sign)
        if len(target) != NBLOCKS or len(sign) != NBLOCKS:
            raise ValueError("a signed block permutation needs exactly 8 targets and 8 signs")
        if any(not 0 <= t < NBLOCKS for t in target):
            raise ValueError(f"targets must lie in 0..7, got {target}")
        if any(s not in (1, -1) for s in sign):
            raise ValueError(f"signs must be +1 or -1, got {sign}")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "sign", sign)

    @classmethod
    def identity(cls) -> SignedBlockPermutation:
        return cls(tuple(range(NBLOCKS)), (1,) * NBLOCKS)

    @property
    def is_bijection(self) -> bool:
        return sorted(self.target) == list(range(NBLOCKS))

    def __neg__(self) -> SignedBlockPermutation:
        return SignedBlockPermutation(self.target, tuple(-s for s in self.sign))

    def __matmul__(self, other: SignedBlockPermutation) -> SignedBlockPermutation:
        return compose(self, other)

    def image(self, block: int) -> tuple[int, int]:
        """(sign, target block) of a single basis block."""
        return self.sign[block], self.target[block]

    def matrix(self, n: int = 1) -> np.ndarray:
        """Dense 8n x 8n integer matrix M with M @ v == apply(self, v)."""
        m = np.zeros((NBLOCKS * n, NBLOCKS * n), dtype=np.int64)
        for b in range(NBLOCKS):
            for i in range(n):
                m[self.target[b] * n + i, b * n + i] = self.sign[b]
        return m

    def __str__(self):
        return " ".join(f"{b}->{'+' if s > 0 else '-'}{t}" for b, (t, s) in enumerate(zip(self.target, self.sign)))


def builtin_structure(k: int) -> SignedBlockPermutation:
    target, sign = _TABLES[check_structure_id(k)]
    return SignedBlockPermutation(target, sign)


def apply(J: SignedBlockPermutation, v) -> np.ndarray:
    """Apply J to a vector of length 8n by relocating blocks and flipping signs.

    The dtype of ``v`` is kept, so integer or Fraction input stays exact.
    """
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError("apply expects a 1-d vector")
    n = block_count(v.shape[0])
    blocks = v.reshape(NBLOCKS, n)
    out = np.zeros_like(blocks)
    for b in range(NBLOCKS):
        out[J.target[b]] = blocks[b] if J.sign[b] > 0 else -blocks[b]
    return out.reshape(-1)


def compose(A: SignedBlockPermutation, B: SignedBlockPermutation) -> SignedBlockPermutation:
    """A∘B (apply B first)."""
    target = tuple(A.target[B.target[b]] for b in range(NBLOCKS))
    sign = tuple(A.sign[B.target[b]] * B.sign[b] for b in range(NBLOCKS))
    return SignedBlockPermutation(target, sign)


def identify(p: SignedBlockPermutation) -> str | None:
    """Name p as ``+Id``, ``-Id``, ``+J3`` ... or return None if it is none of those."""
    ident = SignedBlockPermutation.identity()
    candidates = [("Id", ident)] + [(f"J{k}", builtin_structure(k)) for k in STRUCTURE_IDS]
    for name, q in candidates:
        if p == q:
            return "+" + name
        if p == -q:
            return "-" + name
    return None


def composition_table() -> dict[tuple[int, int], SignedBlockPermutation]:
    """All 36 products J_a∘J_b, keyed by (a, b)."""
    return {
        (a, b): compose(builtin_structure(a), builtin_structure(b))
        for a in STRUCTURE_IDS
        for b in STRUCTURE_IDS
    }


def _as_permutation(J) -> SignedBlockPermutation:
    if isinstance(J, SignedBlockPermutation):
        return J
    return builtin_structure(J)


def fundamental_two_form(J, n: int = 1) -> np.ndarray:
    """Matrix A of Φ(X, Y) = g(JX, Y), in the convention Φ(X, Y) = Xᵀ A Y.

    With the Euclidean metric this is Jᵀ = -J; entries are in {-1, 0, 1}.
    """
    return _as_permutation(J).matrix(n).T.copy()


def inner(X, Y) -> float:
    """The flat metric g(X, Y) = Σ X_a Y_a."""
    return np.dot(np.asarray(X), np.asarray(Y))


def check_metric_compatibility(J, n: int = 1) -> bool:
    """True iff JᵀJ == Id exactly, i.e. g(JX, JY) = g(X, Y) for all X, Y."""
    m = _as_permutation(J).matrix(n)
    return bool(np.array_equal(m.T @ m, np.eye(m.shape[0], dtype=np.int64)))


def squares_to_minus_identity(J) -> bool:
    J = _as_permutation(J)
    return compose(J, J) == -SignedBlockPermutation.identity()


def is_antisymmetric(A: np.ndarray, atol: float = 0.0) -> bool:
    return bool(np.all(np.abs(A + A.T) <= atol))


def block_symbol(b: int) -> str:
    """Display index for block b: ``i``, ``n+i``, ``2n+i`` ..."""
    if b == 0:
        return "i"
    if b == 1:
        return "n+i"
    return f"{b}n+i"
