"""Regular (3, 6) LDPC code with systematic encoding and sum-product decoding.

The parity-check graph is drawn from the configuration model with a seeded
generator, then repaired until it has no parallel edges or 4-cycles. Gaussian
elimination over GF(2) picks the parity positions; the columns are permuted so
that codewords read ``[message | parity]``.

LLR convention: ``log P(bit=0) / P(bit=1)``, so positive means 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConstructionFailure, LengthMismatch

log = logging.getLogger(__name__)

CONSTRUCTION_VERSION = 1
VAR_DEGREE = 3
CHECK_DEGREE = 6
MAX_ATTEMPTS = 16
DEFAULT_CROSSOVER = 0.05


@dataclass(frozen=True, eq=False)
class LdpcCode:
    n: int
    k: int
    seed: int
    edge_var: np.ndarray = field(repr=False)
    edge_check: np.ndarray = field(repr=False)
    # parity part of the generator, bit-packed along the message axis: (n-k, ceil(k/64))
    parity_gen: np.ndarray = field(repr=False)
    attempt: int = 0

    @property
    def m(self) -> int:
        return self.n - self.k

    @property
    def fingerprint(self) -> str:
        return f"ldpc-v{CONSTRUCTION_VERSION}:seed={self.seed}:n={self.n}:k={self.k}"

    def parity_check_matrix(self) -> np.ndarray:
        """Dense 0/1 parity-check matrix; for tests and small inspections."""
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        H[self.edge_check, self.edge_var] = 1
        return H

    def syndrome(self, word) -> np.ndarray:
        word = np.asarray(word, dtype=np.uint8).reshape(-1)
        if word.size != self.n:
            raise LengthMismatch(f"word has {word.size} bits, code length is {self.n}")
        s = np.zeros(self.m, dtype=np.uint8)
        np.bitwise_xor.at(s, self.edge_check, word[self.edge_var])
        return s

    def is_codeword(self, word) -> bool:
        return not self.syndrome(word).any()

    def generator_row(self, i: int) -> np.ndarray:
        msg = np.zeros(self.k, dtype=np.uint8)
        msg[i] = 1
        return ldpc_encode(self, msg)

    @property
    def _decoder(self) -> "_Graph":
        g = self.__dict__.get("_graph")
        if g is None:
            g = _Graph(self)
            object.__setattr__(self, "_graph", g)
        return g


@dataclass(frozen=True)
class DecodeResult:
    msg: np.ndarray
    codeword: np.ndarray
    iterations: int
    success: bool


# ---------------------------------------------------------------------------
# construction


def _rng(seed: int, attempt: int, stage: int) -> np.random.Generator:
    return np.random.default_rng([seed & (2**64 - 1), CONSTRUCTION_VERSION, attempt, stage])


def _four_cycle_edges(var: np.ndarray, chk: np.ndarray, n: int, m: int) -> np.ndarray:
    """Edge indices participating in parallel edges or length-4 cycles."""
    bad = []
    key = chk.astype(np.int64) * n + var
    _, inv, counts = np.unique(key, return_inverse=True, return_counts=True)
    dup = counts[inv] > 1
    if dup.any():
        bad.append(np.flatnonzero(dup))
    order = np.argsort(chk, kind="stable")
    by_check = var[order].reshape(m, CHECK_DEGREE)
    edge_ids = order.reshape(m, CHECK_DEGREE)
    a, b = np.triu_indices(CHECK_DEGREE, 1)
    v1, v2 = by_check[:, a], by_check[:, b]
    lo, hi = np.minimum(v1, v2), np.maximum(v1, v2)
    pair = (lo.astype(np.int64) * n + hi).ravel()
    _, pinv, pcounts = np.unique(pair, return_inverse=True, return_counts=True)
    shared = (pcounts[pinv] > 1).reshape(v1.shape)
    if shared.any():
        rows, cols = np.nonzero(shared)
        bad.append(edge_ids[rows, b[cols]])
    if not bad:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(bad))


def _draw_graph(n: int, m: int, rng: np.random.Generator, max_rounds: int = 2000):
    var = np.repeat(np.arange(n, dtype=np.int64), VAR_DEGREE)
    chk = rng.permutation(np.repeat(np.arange(m, dtype=np.int64), CHECK_DEGREE))
    for _ in range(max_rounds):
        bad = _four_cycle_edges(var, chk, n, m)
        if bad.size == 0:
            return var, chk
        # swap check endpoints with random partners; degrees are preserved
        partners = rng.integers(0, var.size, size=bad.size)
        for e, f in zip(bad, partners):
            chk[e], chk[f] = chk[f], chk[e]
    raise ConstructionFailure("could not remove short cycles from the parity-check graph")


def _pack_rows(bits: np.ndarray) -> np.ndarray:
    rows, cols = bits.shape
    words = -(-cols // 64)
    padded = np.zeros((rows, words * 64), dtype=np.uint8)
    padded[:, :cols] = bits
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64)


def _unpack_rows(packed: np.ndarray, cols: int) -> np.ndarray:
    bits = np.unpackbits(packed.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :cols]


def _rref(H: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2) of a packed matrix; returns (R, pivot columns)."""
    M = H.copy()
    rows = M.shape[0]
    n = M.shape[1] * 64
    pivots: list[int] = []
    r = 0
    one = np.uint64(1)
    for col in range(n):
        if r == rows:
            break
        w, b = divmod(col, 64)
        column = (M[:, w] >> np.uint64(b)) & one
        cand = np.flatnonzero(column[r:])
        if cand.size == 0:
            continue
        p = r + int(cand[0])
        if p != r:
            M[[r, p]] = M[[p, r]]
            column[[r, p]] = column[[p, r]]
        column[r] = 0
        hits = np.flatnonzero(column)
        if hits.size:
            M[hits, w:] ^= M[r, w:]
        pivots.append(col)
        r += 1
    return M[:r], pivots


def _systematize(var: np.ndarray, chk: np.ndarray, n: int, m: int):
    H = np.zeros((m, n), dtype=np.uint8)
    H[chk, var] = 1
    R, pivots = _rref(_pack_rows(H))
    if len(pivots) < m:
        return None
    pivot_set = np.zeros(n, dtype=bool)
    pivot_set[pivots] = True
    info_cols = np.flatnonzero(~pivot_set)
    dense = _unpack_rows(R, n)
    # row j of R reads: x[pivots[j]] = sum_f R[j, f] x[f] over info columns f
    parity = dense[:, info_cols]
    order = np.concatenate([info_cols, np.asarray(pivots)])
    return order, _pack_rows(parity)


@lru_cache(maxsize=8)
def ldpc_build(seed: int, n: int = 8192, k: int = 4096) -> LdpcCode:
    if n % 2 or k != n // 2:
        raise ValueError(f"only rate-1/2 codes are supported, got ({n}, {k})")
    m = n - k
    if (n * VAR_DEGREE) % CHECK_DEGREE or m * CHECK_DEGREE != n * VAR_DEGREE:
        raise ValueError("(3, 6) regular ensemble needs n = 2m")
    for attempt in range(MAX_ATTEMPTS):
        var, chk = _draw_graph(n, m, _rng(seed, attempt, 0))
        result = _systematize(var, chk, n, m)
        if result is None:
            log.debug("LDPC draw %d for seed %d is rank deficient; redrawing", attempt, seed)
            continue
        order, parity = result
        # relabel variables so position j of a codeword is original column order[j]
        new_label = np.empty(n, dtype=np.int64)
        new_label[order] = np.arange(n)
        return LdpcCode(n, k, seed, new_label[var], chk, parity, attempt)
    raise ConstructionFailure(f"no full-rank parity-check matrix after {MAX_ATTEMPTS} draws (seed {seed})")


# ---------------------------------------------------------------------------
# encoding


def ldpc_encode(code: LdpcCode, msg) -> np.ndarray:
    msg = np.asarray(msg, dtype=np.uint8).reshape(-1)
    if msg.size != code.k:
        raise LengthMismatch(f"message has {msg.size} bits, code dimension is {code.k}")
    packed = _pack_rows(msg[None, :])[0]
    parity = np.bitwise_count(code.parity_gen & packed).sum(axis=1) & 1
    return np.concatenate([msg, parity.astype(np.uint8)])


# ---------------------------------------------------------------------------
# decoding


class _Graph:
    def __init__(self, code: LdpcCode):
        self.by_check = np.argsort(code.edge_check, kind="stable").reshape(code.m, CHECK_DEGREE)
        self.by_var = np.argsort(code.edge_var, kind="stable").reshape(code.n, VAR_DEGREE)
        self.check_vars = code.edge_var[self.by_check]
        self.var_of_edge = code.edge_var


def hard_llr(bits, crossover: float = DEFAULT_CROSSOVER) -> np.ndarray:
    """Fixed-magnitude LLRs for hard decisions from a binary symmetric channel."""
    mag = np.log((1.0 - crossover) / crossover)
    return np.where(np.asarray(bits) == 0, mag, -mag).astype(np.float64)


def soft_llr(residuals, gamma: float, sigma: float | None = None, clip: float = 20.0) -> np.ndarray:
    """LLRs from QIM residuals under wrapped Gaussian noise.

    A residual lies in ``[-gamma/2, gamma/2)``; bit 1 was written at
    ``+gamma/4`` and bit 0 at ``-gamma/4``, both periodic with period
    ``gamma``. Without ``sigma`` the noise level is estimated from the spread
    of ``|residual|`` around ``gamma/4``.
    """
    r = np.asarray(residuals, dtype=np.float64)
    if sigma is None:
        sigma = float(np.sqrt(np.mean((np.abs(r) - gamma / 4) ** 2))) if r.size else 0.0
    sigma = max(sigma, gamma / 64)
    shifts = gamma * np.arange(-2, 3)[:, None]
    # log-sum-exp over the periodic images of each constellation point
    e1 = -((r - gamma / 4 - shifts) ** 2) / (2 * sigma**2)
    e0 = -((r + gamma / 4 - shifts) ** 2) / (2 * sigma**2)
    llr = np.logaddexp.reduce(e0, axis=0) - np.logaddexp.reduce(e1, axis=0)
    return np.clip(llr, -clip, clip)


def _leave_one_out_product(t: np.ndarray) -> np.ndarray:
    d = t.shape[1]
    prefix = np.ones_like(t)
    suffix = np.ones_like(t)
    for j in range(1, d):
        prefix[:, j] = prefix[:, j - 1] * t[:, j - 1]
        suffix[:, d - 1 - j] = suffix[:, d - j] * t[:, d - j]
    return prefix * suffix


def ldpc_decode(code: LdpcCode, channel, max_iters: int = 50) -> DecodeResult:
    """Flooding sum-product decoder; stops as soon as all parity checks hold."""
    llr = np.asarray(channel, dtype=np.float64).reshape(-1)
    if llr.size != code.n:
        raise LengthMismatch(f"{llr.size} channel values for a length-{code.n} code")
    if not np.all(np.isfinite(llr)):
        raise ValueError("channel LLRs must be finite")
    g = code._decoder

    def parity_ok(hard: np.ndarray) -> bool:
        return not np.any(np.bitwise_xor.reduce(hard[g.check_vars], axis=1))

    hard = (llr < 0).astype(np.uint8)
    if parity_ok(hard):
        return DecodeResult(hard[: code.k].copy(), hard, 0, True)

    v2c = llr[g.var_of_edge]
    c2v = np.zeros_like(v2c)
    limit = 1.0 - 1e-12
    for it in range(1, max_iters + 1):
        t = np.tanh(0.5 * v2c[g.by_check])
        excl = np.clip(_leave_one_out_product(t), -limit, limit)
        c2v[g.by_check] = 2.0 * np.arctanh(excl)
        incoming = c2v[g.by_var]
        total = llr + incoming.sum(axis=1)
        v2c[g.by_var] = total[:, None] - incoming
        hard = (total < 0).astype(np.uint8)
        if parity_ok(hard):
            return DecodeResult(hard[: code.k].copy(), hard, it, True)
    return DecodeResult(hard[: code.k].copy(), hard, max_iters, False)
