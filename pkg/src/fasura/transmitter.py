"""Message -> unit-energy channel input ``x = [p; s_1 a_1; ...; s_T a_T]``."""

from __future__ import annotations

import numpy as np

from .codebook import Codebook, phi
from .polar import PolarSpec, crc_append, polar_encode, qpsk_modulate


def split_message(bits, B_f: int):
    """Positional split: the first ``B_f`` bits select the codebook column."""
    bits = np.asarray(bits, dtype=np.uint8)
    return bits[..., :B_f], bits[..., B_f:]


def column_of(m_f, B_f: int | None = None) -> int:
    """0-based codebook column of first-part bits ``m_f``."""
    return phi(m_f, B_f) - 1


def coded_symbols(m_s, j: int, cb: Codebook, spec: PolarSpec) -> np.ndarray:
    """CRC -> coset polar encoding -> interleaving -> QPSK for column ``j``."""
    info_crc = crc_append(m_s, spec.crc_len)
    c = polar_encode(info_crc, cb.frozen_values(j), spec)
    return qpsk_modulate(c[..., cb.interleaver(j)])


def rebuild_signal(j: int, symbols, cb: Codebook) -> np.ndarray:
    """Channel input of column ``j`` carrying the given QPSK symbols.

    Shared by the encoder and by the receiver when it re-creates decided or
    temporary signals, so both always agree on what a user sends.
    """
    s = np.asarray(symbols, dtype=np.complex128)
    T = cb.config.T
    if s.shape != (T,):
        raise ValueError(f"expected {T} symbols, got shape {s.shape}")
    if not (np.all(np.abs(np.abs(s.real) - 1) < 1e-12) and np.all(np.abs(np.abs(s.imag) - 1) < 1e-12)):
        raise ValueError("symbols must lie in {+-1 +-1j}")
    q = (cb.spreading(j) * s[:, None]).ravel()
    return np.concatenate([cb.pilot(j), q])


def encode_message(bits, cb: Codebook, spec: PolarSpec) -> np.ndarray:
    cfg = cb.config
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (cfg.B,):
        raise ValueError(f"expected a {cfg.B}-bit message, got shape {bits.shape}")
    if spec.n_c != cfg.n_c or spec.B_c != cfg.B_c:
        raise ValueError("polar spec does not match the codebook configuration")
    m_f, m_s = split_message(bits, cfg.B_f)
    j = column_of(m_f, cfg.B_f)
    return rebuild_signal(j, coded_symbols(m_s, j, cb, spec), cb)


def encode_messages(messages, cb: Codebook, spec: PolarSpec):
    """Encode each row of ``messages``; returns ``(X (n, K), columns (K,))``."""
    messages = np.atleast_2d(np.asarray(messages, dtype=np.uint8))
    cols = np.array([column_of(m[: cb.config.B_f], cb.config.B_f) for m in messages], dtype=np.int64)
    X = np.stack([encode_message(m, cb, spec) for m in messages], axis=1)
    return X, cols
