"""CRC-aided polar coding with per-user frozen values and QPSK mapping.

The transform is ``x = u F^{(x)n}`` with ``F = [[1, 0], [1, 1]]`` in natural
(non bit-reversed) order, so the last position is the best bit channel.

The list decoder works on a batch of independent words at once: every
internal array has shape ``(words, paths, ...)``. All words share one
:class:`PolarSpec` (same information set) but each has its own frozen
values, which is exactly the situation of the multi-user receiver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

CRC_POLYS = {12: 0x80F, 16: 0x1021}


# --------------------------------------------------------------------------- CRC

def crc_remainder(bits, crc_len: int) -> np.ndarray:
    """Bit-serial CRC (MSB first, zero initial state, no final xor)."""
    poly = CRC_POLYS[crc_len]
    mask = (1 << crc_len) - 1
    reg = 0
    for b in np.asarray(bits, dtype=np.uint8).ravel():
        fb = ((reg >> (crc_len - 1)) & 1) ^ int(b)
        reg = (reg << 1) & mask
        if fb:
            reg ^= poly
    return ((reg >> np.arange(crc_len - 1, -1, -1)) & 1).astype(np.uint8)


@lru_cache(maxsize=None)
def _crc_matrix(k: int, crc_len: int) -> np.ndarray:
    # the remainder is linear in the payload, so one row per unit vector suffices
    eye = np.eye(k, dtype=np.uint8)
    G = np.stack([crc_remainder(row, crc_len) for row in eye]).astype(np.int64)
    G.setflags(write=False)
    return G


def crc_bits(payload, crc_len: int) -> np.ndarray:
    """CRC of every payload along the last axis."""
    payload = np.asarray(payload, dtype=np.uint8)
    G = _crc_matrix(payload.shape[-1], crc_len)
    return ((payload.astype(np.int64) @ G) & 1).astype(np.uint8)


def crc_append(payload, crc_len: int) -> np.ndarray:
    payload = np.asarray(payload, dtype=np.uint8)
    return np.concatenate([payload, crc_bits(payload, crc_len)], axis=-1)


def crc_check(word, crc_len: int):
    """True where the trailing ``crc_len`` bits match the CRC of the rest."""
    word = np.asarray(word, dtype=np.uint8)
    if word.shape[-1] <= crc_len:
        raise ValueError("word shorter than its CRC")
    ok = np.all(crc_bits(word[..., :-crc_len], crc_len) == word[..., -crc_len:], axis=-1)
    return bool(ok) if ok.ndim == 0 else ok


# ------------------------------------------------------------------ construction

def bhattacharyya(n_c: int, z0: float = 0.32) -> np.ndarray:
    """Bhattacharyya parameters of the ``n_c`` synthesized bit channels.

    Exact for an erasure channel with erasure probability ``z0``; otherwise the
    usual upper-bound recursion ``z- = 2z - z^2``, ``z+ = z^2``.
    """
    z = np.array([z0])
    while z.size < n_c:
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return z


def reliability_order(n_c: int, z0: float = 0.32) -> np.ndarray:
    """Positions sorted from most to least reliable (ties: higher index first)."""
    if n_c < 1 or n_c & (n_c - 1):
        raise ValueError(f"n_c must be a power of two, got {n_c}")
    z = bhattacharyya(n_c, z0)
    return np.lexsort((-np.arange(n_c), z))


@dataclass(frozen=True, eq=False)
class PolarSpec:
    n_c: int
    B_c: int
    crc_len: int
    info_positions: np.ndarray
    frozen_positions: np.ndarray
    _rate0: frozenset = field(repr=False, default=frozenset())

    @property
    def crc_polynomial(self) -> int:
        return CRC_POLYS[self.crc_len]

    @property
    def payload_len(self) -> int:
        return self.B_c - self.crc_len


def make_polar_spec(n_c: int, B_c: int, crc_len: int = 12, z0: float = 0.32) -> PolarSpec:
    if not 0 < B_c <= n_c:
        raise ValueError(f"need 0 < B_c <= n_c, got B_c={B_c}, n_c={n_c}")
    if crc_len not in CRC_POLYS:
        raise ValueError(f"unsupported CRC length {crc_len}")
    order = reliability_order(n_c, z0)
    info = np.sort(order[:B_c])
    frozen = np.sort(order[B_c:])
    is_frozen = np.zeros(n_c, dtype=bool)
    is_frozen[frozen] = True
    # (depth, start) of every node whose leaves are all frozen
    rate0 = set()
    n = n_c.bit_length() - 1
    for d in range(n + 1):
        size = n_c >> d
        for start in range(0, n_c, size):
            if is_frozen[start:start + size].all():
                rate0.add((d, start))
    for arr in (info, frozen):
        arr.setflags(write=False)
    return PolarSpec(n_c, B_c, crc_len, info, frozen, frozenset(rate0))


def polar_spec_from_config(config) -> PolarSpec:
    return make_polar_spec(config.n_c, config.B_c, config.crc_len, config.design_z)


# ----------------------------------------------------------------------- encoder

def polar_transform(u) -> np.ndarray:
    """``u F^{(x)n}`` over GF(2) along the last axis."""
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    h = 1
    while h < N:
        v = x.reshape(x.shape[:-1] + (N // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h *= 2
    return x


def polar_encode(info_crc, frozen_values, spec: PolarSpec) -> np.ndarray:
    info_crc = np.asarray(info_crc, dtype=np.uint8)
    frozen_values = np.asarray(frozen_values, dtype=np.uint8)
    if info_crc.shape[-1] != spec.B_c:
        raise ValueError(f"expected {spec.B_c} information bits, got {info_crc.shape[-1]}")
    if frozen_values.shape[-1] != spec.n_c - spec.B_c:
        raise ValueError(
            f"expected {spec.n_c - spec.B_c} frozen values, got {frozen_values.shape[-1]}"
        )
    shape = np.broadcast_shapes(info_crc.shape[:-1], frozen_values.shape[:-1])
    u = np.zeros(shape + (spec.n_c,), dtype=np.uint8)
    u[..., spec.info_positions] = info_crc
    u[..., spec.frozen_positions] = frozen_values
    return polar_transform(u)


def qpsk_modulate(bits) -> np.ndarray:
    """Pairs ``(b_re, b_im)`` to ``(1 - 2 b_re) + 1j (1 - 2 b_im)``."""
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise ValueError("QPSK needs an even number of bits")
    b = bits.reshape(bits.shape[:-1] + (-1, 2)).astype(np.float64)
    return (1 - 2 * b[..., 0]) + 1j * (1 - 2 * b[..., 1])


def qpsk_hard_demap(symbols) -> np.ndarray:
    s = np.asarray(symbols)
    bits = np.stack([s.real < 0, s.imag < 0], axis=-1).astype(np.uint8)
    return bits.reshape(bits.shape[:-2] + (-1,))


# ----------------------------------------------------------------------- decoder

def _f(a, b):
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def _g(a, b, v):
    return b + (1.0 - 2.0 * v) * a


class _ListDecoder:
    """Recursive SCL state; ``alpha[d]`` / ``beta_left[d]`` live per tree depth."""

    def __init__(self, llrs, frozen_values, spec, list_size):
        self.spec = spec
        self.list_size = list_size
        self.U, N = llrs.shape
        self.n = N.bit_length() - 1
        self.alpha = [None] * (self.n + 1)
        self.beta_left = [None] * (self.n + 1)
        self.alpha[0] = llrs[:, None, :].astype(np.float64)
        self.pm = np.zeros((self.U, 1))
        self.u_frozen = np.zeros((self.U, N), dtype=np.uint8)
        self.u_frozen[:, spec.frozen_positions] = frozen_values
        self.info_slot = {int(p): i for i, p in enumerate(spec.info_positions)}
        self.u_info = np.zeros((self.U, 1, spec.B_c), dtype=np.uint8)
        self.rows = np.arange(self.U)[:, None]

    def run(self):
        self._node(0, 0)
        order = np.argsort(self.pm, axis=1, kind="stable")
        return (
            np.take_along_axis(self.u_info, order[:, :, None], axis=1),
            np.take_along_axis(self.pm, order, axis=1),
        )

    def _node(self, d, start):
        size = self.spec.n_c >> d
        a = self.alpha[d]
        if (d, start) in self.spec._rate0:
            v = polar_transform(self.u_frozen[:, start:start + size])[:, None, :]
            self.pm = self.pm + np.sum(np.abs(a) * ((a < 0) != v), axis=2)
            return np.broadcast_to(v, a.shape)
        if d == self.n:
            return self._info_leaf(start)
        half = size // 2
        self.alpha[d + 1] = _f(a[..., :half], a[..., half:])
        self.beta_left[d] = self._node(d + 1, start)
        a = self.alpha[d]
        self.alpha[d + 1] = _g(a[..., :half], a[..., half:], self.beta_left[d])
        right = self._node(d + 1, start + half)
        return np.concatenate([self.beta_left[d] ^ right, right], axis=2)

    def _info_leaf(self, pos):
        lam = self.alpha[self.n][..., 0]
        hard = lam < 0
        cost = np.abs(lam)
        cand = np.stack([self.pm + cost * hard, self.pm + cost * ~hard], axis=2)
        cand = cand.reshape(self.U, -1)
        keep = min(cand.shape[1], self.list_size)
        order = np.argsort(cand, axis=1, kind="stable")[:, :keep]
        parent, bit = order // 2, (order % 2).astype(np.uint8)
        self.pm = np.take_along_axis(cand, order, axis=1)
        self._select(parent)
        self.u_info[:, :, self.info_slot[pos]] = bit
        return bit[:, :, None]

    def _select(self, parent):
        if parent.shape[1] == 1 and self.u_info.shape[1] == 1:
            return
        take = lambda x: None if x is None else x[self.rows, parent]
        self.alpha = [take(x) for x in self.alpha]
        self.beta_left = [take(x) for x in self.beta_left]
        self.u_info = self.u_info[self.rows, parent]


def scl_decode_batch(llrs, frozen_values, spec: PolarSpec, list_size: int):
    """List-decode a batch of words.

    Parameters
    ----------
    llrs : array (U, n_c)
        Code-bit LLRs, positive favouring 0.
    frozen_values : array (U, n_c - B_c)
    spec : PolarSpec
    list_size : int

    Returns
    -------
    candidates : uint8 array (U, Lf, B_c)
        Information+CRC words, best first.
    metrics : array (U, Lf)
        Non-negative min-sum path metrics, ascending.
    """
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    frozen_values = np.atleast_2d(np.asarray(frozen_values, dtype=np.uint8))
    if llrs.shape[1] != spec.n_c:
        raise ValueError(f"expected {spec.n_c} LLRs per word, got {llrs.shape[1]}")
    if frozen_values.shape != (llrs.shape[0], spec.n_c - spec.B_c):
        raise ValueError("frozen_values shape does not match the batch")
    if list_size < 1:
        raise ValueError("list_size must be >= 1")
    if not np.all(np.isfinite(llrs)):
        raise ValueError("LLRs must be finite")
    return _ListDecoder(llrs, frozen_values, spec, list_size).run()


def scl_decode(llrs, frozen_values, spec: PolarSpec, list_size: int):
    """Single-word list decoding; returns ``(candidates (Lf, B_c), metrics (Lf,))``."""
    cands, metrics = scl_decode_batch(
        np.asarray(llrs)[None, :], np.asarray(frozen_values)[None, :], spec, list_size
    )
    return cands[0], metrics[0]


def crc_select_batch(candidates, crc_len: int):
    """Per word, the rank of the best CRC-consistent candidate (0 if none) and a flag."""
    candidates = np.asarray(candidates)
    if candidates.shape[-2] == 0:
        raise ValueError("empty candidate list")
    ok = crc_check(candidates, crc_len)
    ok = np.atleast_2d(ok)
    rank = np.argmax(ok, axis=-1)
    return rank, ok.any(axis=-1)


def crc_select(candidates, crc_len: int):
    """Best CRC-consistent candidate, else the best candidate flagged inconsistent.

    Returns ``(word, consistent, rank)``.
    """
    candidates = np.asarray(candidates)
    if candidates.ndim != 2 or candidates.shape[0] == 0:
        raise ValueError("expected a non-empty (list, bits) candidate array")
    rank, consistent = crc_select_batch(candidates[None], crc_len)
    r = int(rank[0])
    return candidates[r], bool(consistent[0]), r
