"""Shared random codebook: pilots, spreading sequences, frozen values, interleavers.

Every chip is a scaled QPSK point and is stored as a 2-bit code
``2 * b_re + b_im`` standing for ``(1 - 2 b_re) + 1j (1 - 2 b_im)``; the
complex values are materialized only for the columns a caller asks for.
Arrays are indexed column-first (``codes[j]`` is column ``j`` of the
corresponding matrix) so per-user slicing is contiguous.

Column numbers are 0-based everywhere in the package; :func:`phi` returns
the 1-based index of the bijection, so column ``phi(m_f) - 1``.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, SystemConfig

CACHE_FORMAT = "fasura-codebook"
CACHE_VERSION = 1

QPSK_RE = np.array([1.0, 1.0, -1.0, -1.0])
QPSK_IM = np.array([1.0, -1.0, 1.0, -1.0])
QPSK_POINTS = QPSK_RE + 1j * QPSK_IM


def rng_stream(seed: int, label: str) -> np.random.Generator:
    """Philox stream for ``label``; streams for distinct labels are independent."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(label.encode("ascii")),))
    return np.random.Generator(np.random.Philox(ss))


def phi(m_f, B_f: int | None = None) -> int:
    """Map first-part bits (MSB first) to a 1-based codebook index."""
    bits = np.asarray(m_f, dtype=np.int64).ravel()
    if B_f is not None and bits.size != B_f:
        raise ValueError(f"m_f must have {B_f} bits, got {bits.size}")
    if bits.size == 0 or bits.size > 62:
        raise ValueError(f"m_f must have between 1 and 62 bits, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("m_f must be a 0/1 vector")
    weights = 1 << np.arange(bits.size - 1, -1, -1, dtype=np.int64)
    return int(bits @ weights) + 1


def phi_inverse(index: int, B_f: int) -> np.ndarray:
    """Bits ``m_f`` with ``phi(m_f) == index``."""
    if not 1 <= index <= (1 << B_f):
        raise ValueError(f"index {index} outside [1, 2^{B_f}]")
    value = index - 1
    return ((value >> np.arange(B_f - 1, -1, -1)) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class Codebook:
    config: SystemConfig
    pilot_codes: np.ndarray    # (J, n_p) uint8
    spread_codes: np.ndarray   # (J, T, L) uint8
    frozen: np.ndarray         # (J, n_c - B_c) uint8
    interleavers: np.ndarray   # (J, n_c) permutations

    def __post_init__(self):
        for arr in (self.pilot_codes, self.spread_codes, self.frozen, self.interleavers):
            arr.setflags(write=False)

    @property
    def J(self) -> int:
        return self.pilot_codes.shape[0]

    @property
    def pilot_scale(self) -> float:
        return 1.0 / np.sqrt(2 * self.config.n)

    @property
    def spread_scale(self) -> float:
        return 1.0 / (2 * np.sqrt(self.config.n))

    def pilot(self, j: int) -> np.ndarray:
        return QPSK_POINTS[self.pilot_codes[j]] * self.pilot_scale

    def pilots(self, cols) -> np.ndarray:
        """Pilot matrix restricted to ``cols``, shape ``(n_p, len(cols))``."""
        cols = np.asarray(cols, dtype=np.int64)
        return (QPSK_POINTS[self.pilot_codes[cols]] * self.pilot_scale).T

    def spreading(self, j: int) -> np.ndarray:
        """All ``T`` spreading sequences of column ``j``, shape ``(T, L)``."""
        return QPSK_POINTS[self.spread_codes[j]] * self.spread_scale

    def spreadings(self, cols) -> np.ndarray:
        """Spreading columns for ``cols`` as a stack ``(T, L, len(cols))``."""
        cols = np.asarray(cols, dtype=np.int64)
        return np.transpose(QPSK_POINTS[self.spread_codes[cols]], (1, 2, 0)) * self.spread_scale

    def frozen_values(self, j: int) -> np.ndarray:
        return self.frozen[j]

    def interleaver(self, j: int) -> np.ndarray:
        return self.interleavers[j]


def generate_codebook(config: SystemConfig) -> Codebook:
    """Draw the full random ensemble from ``config.seed``.

    Each component has its own labelled Philox stream, so e.g. changing the
    code rate (which resizes the frozen matrix) leaves pilots and spreading
    sequences untouched.
    """
    config.validate()
    J, T, L, n_c = config.J, config.T, config.L, config.n_c
    seed = config.seed
    pilot_codes = rng_stream(seed, "pilots").integers(0, 4, size=(J, config.n_p), dtype=np.uint8)
    spread_codes = rng_stream(seed, "spreading").integers(0, 4, size=(J, T, L), dtype=np.uint8)
    frozen = rng_stream(seed, "frozen").integers(0, 2, size=(J, n_c - config.B_c), dtype=np.uint8)
    dtype = np.int16 if n_c <= np.iinfo(np.int16).max else np.int32
    interleavers = np.tile(np.arange(n_c, dtype=dtype), (J, 1))
    rng_stream(seed, "interleavers").permuted(interleavers, axis=1, out=interleavers)
    return Codebook(config, pilot_codes, spread_codes, frozen, interleavers)


def save_codebook(cb: Codebook, path) -> None:
    header = dict(
        format=CACHE_FORMAT,
        version=CACHE_VERSION,
        key=cb.config.codebook_key(),
        seed=cb.config.seed,
    )
    with open(path, "wb") as fh:
        np.savez(
            fh,
            header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
            pilot_codes=cb.pilot_codes,
            spread_codes=cb.spread_codes,
            frozen=cb.frozen,
            interleavers=cb.interleavers,
        )


def load_codebook(path, config: SystemConfig) -> Codebook:
    """Load a cached codebook, refusing files built for other parameters."""
    with np.load(path) as data:
        header = json.loads(data["header"].tobytes().decode())
        if header.get("format") != CACHE_FORMAT or header.get("version") != CACHE_VERSION:
            raise ConfigError(f"{path}: not a version-{CACHE_VERSION} codebook cache")
        if header.get("key") != config.codebook_key():
            raise ConfigError(f"{path}: codebook cache was built for different parameters")
        return Codebook(
            config,
            data["pilot_codes"],
            data["spread_codes"],
            data["frozen"],
            data["interleavers"],
        )


def cached_codebook(config: SystemConfig, cache_dir=None) -> Codebook:
    """Generate ``config``'s codebook, reusing ``cache_dir`` when given."""
    if cache_dir is None:
        return generate_codebook(config)
    path = Path(cache_dir) / f"codebook-{config.codebook_key()[:16]}.npz"
    if path.exists():
        return load_codebook(path, config)
    cb = generate_codebook(config)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    save_codebook(cb, tmp)
    tmp.replace(path)
    return cb
