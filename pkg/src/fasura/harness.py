"""Monte Carlo trials, error-probability estimates and Eb/N0 search."""

from __future__ import annotations

import multiprocessing as mp
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .channel import draw_channel, sigma2_from_ebn0, transmit
from .codebook import Codebook, generate_codebook
from .config import SystemConfig
from .polar import polar_spec_from_config
from .receiver import decode_all
from .transmitter import encode_messages

Z95 = 1.959963984540054


class BracketError(RuntimeError):
    """The Eb/N0 bracket does not straddle the target error probability."""

    def __init__(self, message, lo_db, hi_db, pe_lo, pe_hi):
        super().__init__(message)
        self.lo_db, self.hi_db = lo_db, hi_db
        self.pe_lo, self.pe_hi = pe_lo, pe_hi


@dataclass
class TrialResult:
    trial: int
    seed: int
    ebn0_db: float
    K: int
    n_ms: int
    n_fa: int
    K_declared: int
    iterations: int
    wall_time: float = 0.0
    trace: list | None = field(default=None, repr=False)


@dataclass
class CampaignStats:
    ebn0_db: float
    trials: int
    K: int
    P_md: float
    P_fa: float
    P_e: float
    ci_md: tuple[float, float]
    ci_fa: tuple[float, float]
    ci_e: tuple[float, float]


def trial_seed(master_seed: int, t: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(zlib.crc32(b"trial"), t))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def trial_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def draw_messages(rng: np.random.Generator, K: int, B: int, allow_duplicates: bool = False) -> np.ndarray:
    """``K`` uniform ``B``-bit messages; exact duplicates are redrawn unless allowed."""
    msgs = rng.integers(0, 2, size=(K, B), dtype=np.uint8)
    if allow_duplicates:
        return msgs
    while True:
        _, first = np.unique(msgs, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(K), first)
        if dup.size == 0:
            return msgs
        msgs[dup] = rng.integers(0, 2, size=(dup.size, B), dtype=np.uint8)


def score(transmitted: Iterable, declared: Iterable) -> tuple[int, int]:
    """Misses (per transmitting user) and false alarms (per declared message)."""
    sent = {np.asarray(m, dtype=np.uint8).tobytes() for m in transmitted}
    got = {np.asarray(m, dtype=np.uint8).tobytes() for m in declared}
    n_ms = sum(np.asarray(m, dtype=np.uint8).tobytes() not in got for m in transmitted)
    n_fa = sum(d not in sent for d in got)
    return n_ms, n_fa


def run_trial(config: SystemConfig, ebn0_db: float, seed: int, cb: Codebook | None = None,
              trial: int = 0, collect_trace: bool = False) -> TrialResult:
    """One transmission: draw messages and channel, decode, count errors."""
    if cb is None:
        cb = generate_codebook(config)
    spec = polar_spec_from_config(config)
    start = time.perf_counter()
    rng = trial_rng(seed)
    msgs = draw_messages(rng, config.K, config.B, config.allow_duplicates)
    X, _ = encode_messages(msgs, cb, spec)
    sigma2 = sigma2_from_ebn0(ebn0_db, config.B)
    obs, _ = transmit(X, draw_channel(rng, config.K, config.M, sigma2), rng, config.n_p)
    records: list | None = [] if collect_trace else None
    out = decode_all(obs.Y, cb, config, sigma2, spec, trace=records.append if collect_trace else None)
    n_ms, n_fa = score(msgs, out.declared)
    return TrialResult(
        trial, seed, float(ebn0_db), config.K, n_ms, n_fa, len(out.declared), out.iterations_used,
        time.perf_counter() - start, records,
    )


def wilson_interval(p_hat: float, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    p = min(max(p_hat, 0.0), 1.0)
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z / denom * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


def summarize(results: list[TrialResult], ebn0_db: float | None = None) -> CampaignStats:
    """P_md = E[n_ms]/K, P_fa = E[n_fa/K_declared] (0/0 taken as 0), P_e = P_md + P_fa.

    Wilson intervals use K * trials draws for P_md and P_e and the total
    number of declared messages for P_fa.
    """
    if not results:
        raise ValueError("no trials to summarize")
    K = results[0].K
    n = len(results)
    P_md = sum(r.n_ms for r in results) / (n * K)
    P_fa = sum(r.n_fa / r.K_declared if r.K_declared else 0.0 for r in results) / n
    P_e = P_md + P_fa
    declared = sum(r.K_declared for r in results)
    return CampaignStats(
        results[0].ebn0_db if ebn0_db is None else ebn0_db, n, K, P_md, P_fa, P_e,
        wilson_interval(P_md, n * K), wilson_interval(P_fa, declared), wilson_interval(P_e, n * K),
    )


_WORKER_STATE: dict = {}


def _worker_trial(args):
    t, seed, ebn0_db, collect_trace = args
    return run_trial(_WORKER_STATE["config"], ebn0_db, seed, _WORKER_STATE["cb"], t, collect_trace)


def iter_trials(config: SystemConfig, ebn0_db: float, n_trials: int, cb: Codebook | None = None,
                workers: int = 1, first_trial: int = 0, collect_trace: bool = False):
    """Yield :class:`TrialResult` in trial order; results do not depend on ``workers``."""
    if cb is None:
        cb = generate_codebook(config)
    jobs = [(t, trial_seed(config.seed, t), ebn0_db, collect_trace)
            for t in range(first_trial, first_trial + n_trials)]
    if workers <= 1:
        for t, seed, e, tr in jobs:
            yield run_trial(config, e, seed, cb, t, tr)
        return
    # forked workers inherit the codebook instead of receiving a pickled copy
    _WORKER_STATE.update(config=config, cb=cb)
    with ProcessPoolExecutor(workers, mp_context=mp.get_context("fork")) as pool:
        yield from pool.map(_worker_trial, jobs)


def run_campaign(config: SystemConfig, ebn0_db: float, n_trials: int, cb: Codebook | None = None,
                 workers: int = 1, on_result: Callable[[TrialResult], None] | None = None):
    """Run ``n_trials`` seeded trials; returns ``(CampaignStats, [TrialResult])``."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    results = []
    for r in iter_trials(config, ebn0_db, n_trials, cb, workers):
        results.append(r)
        if on_result is not None:
            on_result(r)
    return summarize(results, ebn0_db), results


def find_required_ebn0(config: SystemConfig, target_pe: float, n_trials: int,
                       bracket_db: tuple[float, float], tol_db: float = 0.25,
                       cb: Codebook | None = None, workers: int = 1,
                       on_point: Callable[[CampaignStats, list], None] | None = None) -> float:
    """Smallest Eb/N0 (dB, upper end of the final bracket) with ``P_e <= target_pe``.

    Every point reuses the same trial seeds, so the comparison between points
    is paired. Assumes P_e decreases with Eb/N0; only the endpoints are checked.
    """
    lo, hi = map(float, bracket_db)
    if not lo < hi or tol_db <= 0:
        raise ValueError("need lo < hi and tol_db > 0")
    if cb is None:
        cb = generate_codebook(config)

    def pe_at(ebn0):
        stats, results = run_campaign(config, ebn0, n_trials, cb, workers)
        if on_point is not None:
            on_point(stats, results)
        return stats.P_e

    pe_lo, pe_hi = pe_at(lo), pe_at(hi)
    if not (pe_lo > target_pe and pe_hi <= target_pe):
        raise BracketError(
            f"bracket [{lo}, {hi}] dB does not straddle P_e={target_pe}: "
            f"P_e({lo})={pe_lo:.4g}, P_e({hi})={pe_hi:.4g}",
            lo, hi, pe_lo, pe_hi,
        )
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if pe_at(mid) <= target_pe:
            hi = mid
        else:
            lo = mid
    return hi
