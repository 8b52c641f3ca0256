"""Iterative multi-user receiver.

One outer (SIC) iteration on the current residual:

1. energy detection of the active codebook columns,
2. pilot-based MMSE channel estimate,
3. per-symbol vectorized MMSE symbol estimate,
4. ``nopice_rounds`` times: temporary list decoding of every detected user,
   re-encoding into full channel inputs, joint channel re-estimation from the
   whole residual with those inputs as known signals, symbol re-estimation,
5. final CRC-aided list decoding,
6. channel re-estimation of every declared user from the *original*
   observation and subtraction, giving the next residual.

Detected columns are 0-based codebook column numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .codebook import Codebook, phi_inverse
from .config import SystemConfig
from .polar import (
    PolarSpec,
    crc_select_batch,
    polar_encode,
    polar_spec_from_config,
    qpsk_modulate,
    scl_decode_batch,
)
from .transmitter import rebuild_signal

MU_EPS = 1e-6
DECODE_BATCH = 128


@dataclass
class DetectionResult:
    indices: np.ndarray   # 0-based columns, by decreasing statistic
    lambdas: np.ndarray


@dataclass
class DecodedUser:
    j_index: int
    message: np.ndarray
    consistent: bool
    x_hat: np.ndarray
    list_rank: int
    info_crc: np.ndarray = field(repr=False, default=None)


@dataclass
class ReceiverOutput:
    declared: list          # distinct B-bit messages, in order of declaration
    iterations_used: int
    users: list = field(default_factory=list)


# ------------------------------------------------------------ energy detection

def _real_form(Yb: np.ndarray) -> np.ndarray:
    """Real matrix ``[[Yr, Yi], [Yi, -Yr]]`` so that ``[ar, ai] @ it`` gives
    ``[Re(a^H Y), Im(a^H Y)]`` for a complex vector ``a = ar + j ai``."""
    yr = Yb.real.astype(np.float32)
    yi = Yb.imag.astype(np.float32)
    top = np.concatenate([yr, yi], axis=-1)
    bottom = np.concatenate([yi, -yr], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def _code_floats(codes: np.ndarray, out: np.ndarray) -> np.ndarray:
    # [re | im] along the last axis from 2-bit QPSK codes
    L = codes.shape[-1]
    out[..., :L] = codes >> 1
    out[..., L:] = codes & 1
    out *= -2.0
    out += 1.0
    return out


def energy_statistics(Y_p, Y_q, cb: Codebook, chunk: int = 256) -> np.ndarray:
    """Matched-filter energy of every codebook column (pilot + all symbol times)."""
    cfg = cb.config
    T, L = cfg.T, cfg.L
    Gp = _real_form(np.asarray(Y_p))                          # (2 n_p, 2M)
    Gq = _real_form(np.asarray(Y_q).reshape(T, L, -1))        # (T, 2L, 2M)
    # with more antennas than chips the quadratic form in Y Y^T is cheaper
    gram = Gq.shape[2] > Gq.shape[1]
    if gram:
        Gq = np.matmul(Gq, Gq.transpose(0, 2, 1))             # (T, 2L, 2L)
    lam = np.empty(cb.J)
    buf_p = np.empty((chunk, 2 * cfg.n_p), dtype=np.float32)
    buf_q = np.empty((T, chunk, 2 * L), dtype=np.float32)
    for s in range(0, cb.J, chunk):
        e = min(s + chunk, cb.J)
        w = e - s
        Pc = _code_floats(cb.pilot_codes[s:e], buf_p[:w])
        R = Pc @ Gp
        lp = np.einsum("jk,jk->j", R, R)
        Ac = _code_floats(cb.spread_codes[s:e].transpose(1, 0, 2), buf_q[:, :w])
        Rq = np.matmul(Ac, Gq)
        lq = np.einsum("tjk,tjk->j", Rq, Ac if gram else Rq)
        lam[s:e] = lp * cb.pilot_scale**2 + lq * cb.spread_scale**2
    return lam


def energy_detect(Y_p, Y_q, cb: Codebook, count: int, exclude=None) -> DetectionResult:
    """The ``count`` columns with the largest energy, ties to the smaller index."""
    lam = energy_statistics(Y_p, Y_q, cb)
    if exclude is not None and len(exclude):
        lam[np.asarray(exclude, dtype=np.int64)] = -np.inf
        count = min(count, cb.J - len(set(np.asarray(exclude).tolist())))
    if not 1 <= count <= cb.J:
        raise ValueError(f"count must lie in [1, {cb.J}], got {count}")
    order = np.argsort(-lam, kind="stable")[:count]
    return DetectionResult(order, lam[order])


# ------------------------------------------------------------------ estimation

def mmse_channel(X_hat, Y, sigma2: float) -> np.ndarray:
    """``(I + X^H X / s2)^{-1} X^H Y / s2`` for known signals ``X_hat`` (n, K)."""
    X_hat = np.asarray(X_hat, dtype=np.complex128)
    Y = np.asarray(Y)
    K = X_hat.shape[1]
    if K == 0:
        return np.zeros((0, Y.shape[1]), dtype=np.complex128)
    C = X_hat.conj().T @ X_hat
    C[np.diag_indices(K)] += sigma2
    return cho_solve(cho_factor(C), X_hat.conj().T @ Y)


def estimate_channel_pilot(Y_p, P_hat, sigma2: float) -> np.ndarray:
    """Pilot MMSE estimate; one filter serves all antennas. Returns ``(K, M)``."""
    return mmse_channel(P_hat, Y_p, sigma2)


def estimate_channel_nopice(Y, X_hat, sigma2: float) -> np.ndarray:
    """Channel re-estimate treating full rebuilt inputs ``X_hat`` (n, K) as pilots."""
    return mmse_channel(X_hat, Y, sigma2)


def estimate_symbols(Y_q, S_hat, H_hat, sigma2: float, prior: float = 2.0):
    """Per-symbol-time MMSE estimate of all detected users' QPSK symbols.

    ``S_hat`` holds the detected spreading columns, shape ``(T, L, K)``. For
    each ``t`` the stacked model is ``y_t = B_t r_t + z_t`` with
    ``B_t = [A_t diag(H[:, m])]_m``; its Gram matrix factors as
    ``(A_t^H A_t) * (conj(H) H^T)`` which avoids forming ``B_t``.

    Returns ``(R_hat, mu)``, both ``(K, T)``; ``mu`` is the diagonal of
    ``W_t B_t`` (the effective gain of each user's own symbol).
    """
    S_hat = np.asarray(S_hat)
    H_hat = np.asarray(H_hat)
    T, L, K = S_hat.shape
    Yt = np.asarray(Y_q).reshape(T, L, -1)
    SH = S_hat.conj().transpose(0, 2, 1)
    AY = np.matmul(SH, Yt)                                   # (T, K, M)
    rhs = np.einsum("km,tkm->tk", H_hat.conj(), AY)
    G = np.matmul(SH, S_hat) * (H_hat.conj() @ H_hat.T)[None]
    reg = prior * sigma2
    R_hat = np.empty((K, T), dtype=np.complex128)
    mu = np.empty((K, T))
    B = np.empty((K, K + 1), dtype=np.complex128)
    eye = np.eye(K)
    for t in range(T):
        C = G[t]
        C[np.diag_indices(K)] += reg
        B[:, 0] = rhs[t]
        B[:, 1:] = eye
        sol = cho_solve(cho_factor(C), B)
        R_hat[:, t] = sol[:, 0]
        mu[:, t] = 1.0 - reg * np.diagonal(sol[:, 1:]).real
    return R_hat, mu


def symbol_llrs(R_hat, mu, interleavers) -> np.ndarray:
    """Gaussian-approximation code-bit LLRs in code (deinterleaved) order.

    Row ``k`` of ``R_hat`` / ``mu`` is one user, ``interleavers[k]`` its
    permutation. Positive LLR favours bit 0.
    """
    R_hat = np.atleast_2d(R_hat)
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    if not (np.all(np.isfinite(R_hat)) and np.all(np.isfinite(mu))):
        raise ValueError("non-finite symbol estimates")
    mu = np.clip(mu, MU_EPS, 1 - MU_EPS)
    nu = 2.0 * mu * (1.0 - mu)
    gain = 2.0 * np.sqrt(2.0) * mu / nu
    K, T = R_hat.shape
    inter = np.empty((K, 2 * T))
    inter[:, 0::2] = gain * R_hat.real
    inter[:, 1::2] = gain * R_hat.imag
    perm = np.atleast_2d(interleavers)
    out = np.empty_like(inter)
    out[np.arange(K)[:, None], perm] = inter
    return out


def llrs_for_user(r_hat, mu, interleaver) -> np.ndarray:
    return symbol_llrs(np.asarray(r_hat)[None], np.asarray(mu)[None], np.asarray(interleaver)[None])[0]


# -------------------------------------------------------------------- decoding

def decode_users(R_hat, mu, cols, cb: Codebook, spec: PolarSpec, list_size: int) -> list[DecodedUser]:
    """List-decode every detected user and rebuild its channel input.

    Users whose list holds no CRC-consistent word still get a rebuilt signal
    from their best (inconsistent) word; it serves as a temporary decision.
    """
    cfg = cb.config
    cols = np.asarray(cols, dtype=np.int64)
    if cols.size == 0:
        return []
    llrs = symbol_llrs(R_hat, mu, cb.interleavers[cols])
    words, ranks, oks = [], [], []
    for s in range(0, cols.size, DECODE_BATCH):
        sl = slice(s, s + DECODE_BATCH)
        cands, _ = scl_decode_batch(llrs[sl], cb.frozen[cols[sl]], spec, list_size)
        rank, ok = crc_select_batch(cands, spec.crc_len)
        words.append(cands[np.arange(cands.shape[0]), rank])
        ranks.append(rank)
        oks.append(ok)
    words = np.concatenate(words)
    ranks = np.concatenate(ranks)
    oks = np.concatenate(oks)
    codewords = polar_encode(words, cb.frozen[cols], spec)
    users = []
    for k, j in enumerate(cols):
        s_hat = qpsk_modulate(codewords[k][cb.interleavers[j]])
        message = np.concatenate([phi_inverse(int(j) + 1, cfg.B_f), words[k, : cfg.B_s]])
        users.append(
            DecodedUser(int(j), message, bool(oks[k]), rebuild_signal(int(j), s_hat, cb), int(ranks[k]), words[k])
        )
    return users


def sic_residual(Y_original, users, sigma2: float, H=None):
    """Re-estimate decoded users' channels from the original observation and subtract.

    ``H`` (one row per user) skips the estimate, e.g. to cancel with the true
    channels. Returns ``(residual, H_used)``.
    """
    Y_original = np.asarray(Y_original)
    if not users:
        return Y_original.copy(), np.zeros((0, Y_original.shape[1]), dtype=np.complex128)
    X = np.stack([u.x_hat for u in users], axis=1)
    if H is None:
        H = estimate_channel_nopice(Y_original, X, sigma2)
    return Y_original - X @ H, H


def _key(message) -> bytes:
    return np.packbits(np.asarray(message, dtype=np.uint8)).tobytes()


def decode_all(
    Y,
    cb: Codebook,
    config: SystemConfig,
    sigma2: float,
    spec: PolarSpec | None = None,
    trace: Callable[[dict], None] | None = None,
) -> ReceiverOutput:
    """Recover up to ``config.K`` messages from observation ``Y`` (n, M)."""
    Y = np.asarray(getattr(Y, "Y", Y))
    if spec is None:
        spec = polar_spec_from_config(config)
    n_p, K = config.n_p, config.K
    residual = Y
    declared: list[DecodedUser] = []
    keys: set[bytes] = set()
    it = 0
    for it in range(1, config.max_sic_iters + 1):
        det = energy_detect(residual[:n_p], residual[n_p:], cb, K - len(declared),
                            exclude=[u.j_index for u in declared])
        cols = det.indices
        S_hat = cb.spreadings(cols)
        H_hat = estimate_channel_pilot(residual[:n_p], cb.pilots(cols), sigma2)
        R_hat, mu = estimate_symbols(residual[n_p:], S_hat, H_hat, sigma2, config.symbol_prior)

        fixed: dict[int, DecodedUser] = {}
        for _ in range(config.nopice_rounds):
            todo = [k for k in range(cols.size) if k not in fixed]
            temp = dict(fixed)
            for k, user in zip(todo, decode_users(R_hat[todo], mu[todo], cols[todo], cb, spec, config.list_size)):
                temp[k] = user
                if user.consistent:
                    fixed[k] = user
            X_hat = np.stack([temp[k].x_hat for k in range(cols.size)], axis=1)
            H_hat = estimate_channel_nopice(residual, X_hat, sigma2)
            R_hat, mu = estimate_symbols(residual[n_p:], S_hat, H_hat, sigma2, config.symbol_prior)

        todo = [k for k in range(cols.size) if k not in fixed]
        final = dict(fixed)
        final.update(zip(todo, decode_users(R_hat[todo], mu[todo], cols[todo], cb, spec, config.list_size)))

        new = 0
        for k in range(cols.size):
            user = final[k]
            if user.consistent and len(declared) < K and _key(user.message) not in keys:
                keys.add(_key(user.message))
                declared.append(user)
                new += 1

        record = dict(
            iteration=it,
            detected=[int(c) for c in cols],
            crc_ok=[bool(final[k].consistent) for k in range(cols.size)],
            new_messages=new,
            declared=len(declared),
        )
        if new:
            residual, _ = sic_residual(Y, declared, sigma2)
        if trace is not None:
            record["residual_energy"] = float(np.sum(np.abs(residual) ** 2))
            trace(record)
        if new == 0 or len(declared) >= K:
            break

    return ReceiverOutput([u.message for u in declared], it, declared)


class JsonlTrace:
    """Callable trace sink writing one JSON object per receiver iteration."""

    def __init__(self, fh, **context):
        self.fh = fh
        self.context = context

    def __call__(self, record: dict) -> None:
        self.fh.write(json.dumps({**self.context, **record}, sort_keys=True) + "\n")
