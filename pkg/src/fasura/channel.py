"""Quasi-static Rayleigh SIMO multiple-access channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sigma2_from_ebn0(ebn0_db: float, B: int) -> float:
    """Noise variance per complex sample for unit-energy codewords of ``B`` bits."""
    if B <= 0:
        raise ValueError("B must be positive")
    return 1.0 / (B * 10.0 ** (ebn0_db / 10.0))


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian with total variance ``var``."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass
class ChannelRealization:
    H: np.ndarray   # (K, M); row k is h_k^T
    sigma2: float


@dataclass
class Observation:
    Y: np.ndarray   # (n, M)
    n_p: int

    @property
    def Y_p(self) -> np.ndarray:
        return self.Y[: self.n_p]

    @property
    def Y_q(self) -> np.ndarray:
        return self.Y[self.n_p:]


def draw_channel(rng: np.random.Generator, K: int, M: int, sigma2: float) -> ChannelRealization:
    return ChannelRealization(complex_normal(rng, (K, M)), sigma2)


def transmit(X, realization: ChannelRealization, rng: np.random.Generator | None, n_p: int):
    """``Y = X H + Z`` for stacked inputs ``X`` of shape ``(n, K)``.

    Returns the observation and the noise matrix that was added.
    """
    X = np.asarray(X, dtype=np.complex128)
    H = np.asarray(realization.H)
    if X.shape[1] != H.shape[0]:
        raise ValueError(f"{X.shape[1]} signals but {H.shape[0]} channel rows")
    clean = X @ H
    if realization.sigma2 > 0:
        if rng is None:
            raise ValueError("noisy channel needs an rng")
        Z = complex_normal(rng, clean.shape, realization.sigma2)
    else:
        Z = np.zeros_like(clean)
    return Observation(clean + Z, n_p), Z
