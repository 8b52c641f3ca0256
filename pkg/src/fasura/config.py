"""System parameters and named presets."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from typing import Any


class ConfigError(ValueError):
    """Raised for inconsistent or out-of-range system parameters."""


def crc_len_for(K: int) -> int:
    """CRC length used for ``K`` active users: 12 bits up to 300 users, 16 above."""
    return 12 if K <= 300 else 16


@dataclass(frozen=True)
class SystemConfig:
    """Parameters shared by transmitter, channel and receiver.

    Field names follow the usual notation of the scheme: ``B`` message bits
    split into ``B_f`` bits that select pilot/spreading/frozen/interleaver
    column and ``B_s = B - B_f`` bits that go through CRC + polar coding.
    ``n = n_p + T * L`` channel uses with ``T = n_c / 2`` QPSK symbols.
    """

    B: int = 100
    B_f: int = 16
    n: int = 3200
    n_p: int = 896
    L: int = 9
    n_c: int = 512
    M: int = 50
    K: int = 100
    list_size: int = 64
    crc_len: int | None = None
    seed: int = 0
    nopice_rounds: int = 1
    max_sic_iters: int = 20
    design_z: float = 0.32
    # prior factor in the symbol MMSE regularizer (2.0 as printed, 0.5 alternative)
    symbol_prior: float = 2.0
    allow_duplicates: bool = False

    def __post_init__(self):
        if self.crc_len is None:
            object.__setattr__(self, "crc_len", crc_len_for(self.K))
        self.validate()

    @property
    def B_s(self) -> int:
        return self.B - self.B_f

    @property
    def B_c(self) -> int:
        return self.B_s + self.crc_len

    @property
    def T(self) -> int:
        return self.n_c // 2

    @property
    def J(self) -> int:
        return 1 << self.B_f

    def validate(self) -> None:
        for name in ("B", "B_f", "n", "n_p", "L", "n_c", "M", "K", "list_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_c & (self.n_c - 1) or self.n_c < 2:
            raise ConfigError(f"n_c must be a power of two >= 2, got {self.n_c}")
        if self.B_f >= self.B:
            raise ConfigError(f"B_f={self.B_f} leaves no bits for the coded part (B={self.B})")
        if self.B_f > 24:
            raise ConfigError(f"B_f={self.B_f} gives an impractically large codebook")
        if self.n != self.n_p + self.T * self.L:
            raise ConfigError(
                f"n={self.n} != n_p + T*L = {self.n_p} + {self.T}*{self.L} = {self.n_p + self.T * self.L}"
            )
        if self.crc_len not in (12, 16):
            raise ConfigError(f"crc_len must be 12 or 16, got {self.crc_len}")
        if self.B_c > self.n_c:
            raise ConfigError(f"B_c={self.B_c} exceeds code length n_c={self.n_c}")
        if self.nopice_rounds < 0 or self.max_sic_iters < 1:
            raise ConfigError("nopice_rounds must be >= 0 and max_sic_iters >= 1")
        if not 0.0 < self.design_z < 1.0:
            raise ConfigError(f"design_z must lie in (0, 1), got {self.design_z}")
        if self.symbol_prior <= 0:
            raise ConfigError("symbol_prior must be positive")

    def replace(self, **changes: Any) -> "SystemConfig":
        if "K" in changes and "crc_len" not in changes:
            changes["crc_len"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SystemConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def codebook_key(self) -> str:
        """Hash of every parameter the shared codebook depends on."""
        relevant = dict(
            J=self.J, n=self.n, n_p=self.n_p, L=self.L, n_c=self.n_c, B_c=self.B_c, seed=self.seed
        )
        return hashlib.sha256(json.dumps(relevant, sort_keys=True).encode()).hexdigest()


def paper_config(K: int = 100, **overrides: Any) -> SystemConfig:
    params: dict[str, Any] = dict(
        B=100, B_f=16, n=3200, n_p=896, L=9, n_c=512, M=50, K=K, list_size=64
    )
    params.update(overrides)
    return SystemConfig(**params)


def smoke_config(**overrides: Any) -> SystemConfig:
    params: dict[str, Any] = dict(
        B=64, B_f=10, n=64 + 64 * 5, n_p=64, L=5, n_c=128, M=8, K=8, list_size=16
    )
    params.update(overrides)
    return SystemConfig(**params)


PRESETS: dict[str, Any] = {
    "smoke": smoke_config,
    **{f"paper-k{k}": (lambda k=k, **kw: paper_config(K=k, **kw)) for k in (100, 200, 300, 400, 500)},
}


def preset(name: str, **overrides: Any) -> SystemConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(**overrides)
