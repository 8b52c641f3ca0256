"""Command-line front end.

Examples::

    fasura --preset smoke --mode campaign --ebn0 6 --trials 50 --out runs/smoke
    fasura --preset paper-k100 --mode sweep --sweep -12.5:0.25:-11 --trials 25
    fasura --preset paper-k100 --mode find-ebn0 --k-list 100,200,300,400,500 \\
           --bracket -13:-9 --tol 0.125 --trials 50

Output files (all in ``--out``, default ``$FASURA_OUT_DIR`` or ``./fasura-out``)
are described in ``docs/formats.md``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .codebook import cached_codebook
from .config import PRESETS, ConfigError, SystemConfig, preset
from .harness import BracketError, find_required_ebn0, iter_trials, summarize
from .receiver import JsonlTrace

SCHEMA_VERSION = 1
TRIAL_FIELDS = ["trial", "seed", "ebn0_db", "K", "n_ms", "n_fa", "K_declared", "iterations"]
TIMING_FIELDS = ["trial", "ebn0_db", "K", "wall_time"]
PLOT_FIELDS = ["P_md", "P_fa", "P_e", "md_lo", "md_hi", "fa_lo", "fa_hi", "e_lo", "e_hi"]
MODES = ("trial", "campaign", "sweep", "find-ebn0")
OUT_ENV = "FASURA_OUT_DIR"


@dataclass
class RunManifest:
    config: SystemConfig = field(default_factory=SystemConfig)
    mode: str = "campaign"
    ebn0_db: float = 0.0
    sweep: tuple[float, float, float] | None = None
    bracket: tuple[float, float] = (-13.0, -9.0)
    tol_db: float = 0.25
    target_pe: float = 0.05
    n_trials: int = 10
    k_list: tuple[int, ...] | None = None
    nopice: bool = True
    out_dir: str = "fasura-out"
    trace: bool = False
    codebook_cache: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_trials < 1:
            raise ConfigError("trials must be >= 1")

    def effective_config(self, K: int | None = None) -> SystemConfig:
        cfg = self.config
        if K is not None and K != cfg.K:
            cfg = cfg.replace(K=K)
        if not self.nopice:
            cfg = cfg.replace(nopice_rounds=0)
        return cfg

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["config"] = self.config.to_dict()
        for key in ("sweep", "bracket", "k_list"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunManifest":
        data = dict(data)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown manifest keys: {sorted(unknown)}")
        if "config" in data:
            data["config"] = SystemConfig.from_dict(data["config"])
        for key in ("sweep", "bracket", "k_list"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunManifest":
        return cls.from_dict(json.loads(text))


def _floats(text: str, count: int, flag: str) -> tuple[float, ...]:
    parts = text.split(":")
    if len(parts) != count:
        raise ConfigError(f"{flag} expects {count} colon-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{flag}: not a number in {text!r}") from None


def sweep_points(sweep: tuple[float, float, float]) -> list[float]:
    start, step, end = sweep
    if step <= 0 or end < start:
        raise ConfigError("sweep needs step > 0 and end >= start")
    count = int(np.floor((end - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fasura", description="Unsourced random access link simulator")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", type=Path, help="manifest file (JSON); flags override it")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--ebn0", type=float, help="Eb/N0 in dB for trial/campaign")
    p.add_argument("--sweep", help="Eb/N0 grid start:step:end (dB)")
    p.add_argument("--bracket", help="find-ebn0 search bracket lo:hi (dB)")
    p.add_argument("--tol", type=float, help="find-ebn0 bracket width tolerance (dB)")
    p.add_argument("--target", type=float, help="target P_e for find-ebn0")
    p.add_argument("--k-list", help="comma-separated K values for find-ebn0")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--K", type=int, help="number of active users")
    p.add_argument("--M", type=int, help="receive antennas")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-nopice", action="store_true")
    p.add_argument("--nopice-rounds", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--trace", action="store_true", help="write per-iteration receiver trace")
    p.add_argument("--codebook-cache", type=Path, help="directory for cached codebooks")
    p.add_argument("--emit-manifest", action="store_true", help="print the resolved manifest and exit")
    return p


RANGE_FLAGS = ("--sweep", "--bracket")


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse ``argv``; ranges such as ``--bracket -13:-9`` may start with a minus sign."""
    argv = list(sys.argv[1:] if argv is None else argv)
    joined, i = [], 0
    while i < len(argv):
        if argv[i] in RANGE_FLAGS and i + 1 < len(argv):
            joined.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            joined.append(argv[i])
            i += 1
    return build_parser().parse_args(joined)


def resolve_manifest(args: argparse.Namespace) -> RunManifest:
    data: dict[str, Any] = {}
    if args.config is not None:
        data = RunManifest.loads(args.config.read_text()).to_dict()
    cfg = dict(data.get("config", {}))
    if args.preset:
        cfg = preset(args.preset).to_dict()
    for flag, key in (("seed", "seed"), ("nopice_rounds", "nopice_rounds"), ("K", "K"), ("M", "M")):
        value = getattr(args, flag)
        if value is not None:
            cfg[key] = value
            if key == "K":
                cfg["crc_len"] = None
    data["config"] = cfg
    if args.mode:
        data["mode"] = args.mode
    if args.ebn0 is not None:
        data["ebn0_db"] = args.ebn0
    if args.sweep:
        data["sweep"] = _floats(args.sweep, 3, "--sweep")
        data.setdefault("mode", "sweep")
    if args.bracket:
        data["bracket"] = _floats(args.bracket, 2, "--bracket")
    if args.tol is not None:
        data["tol_db"] = args.tol
    if args.target is not None:
        data["target_pe"] = args.target
    if args.k_list:
        data["k_list"] = tuple(int(k) for k in args.k_list.split(","))
    if args.trials is not None:
        data["n_trials"] = args.trials
    if args.no_nopice:
        data["nopice"] = False
    if args.trace:
        data["trace"] = True
    if args.codebook_cache is not None:
        data["codebook_cache"] = str(args.codebook_cache)
    if args.out is not None:
        data["out_dir"] = str(args.out)
    elif "out_dir" not in data:
        data["out_dir"] = os.environ.get(OUT_ENV, "fasura-out")
    return RunManifest.from_dict(data)


def _stats_dict(stats) -> dict[str, Any]:
    d = dataclasses.asdict(stats)
    for key in ("ci_md", "ci_fa", "ci_e"):
        d[key] = list(d[key])
    return d


def _plot_row(x_name: str, x, stats, extra: dict | None = None) -> dict[str, Any]:
    row = {x_name: x, **(extra or {})}
    row.update(P_md=stats.P_md, P_fa=stats.P_fa, P_e=stats.P_e,
               md_lo=stats.ci_md[0], md_hi=stats.ci_md[1], fa_lo=stats.ci_fa[0],
               fa_hi=stats.ci_fa[1], e_lo=stats.ci_e[0], e_hi=stats.ci_e[1])
    return row


class Recorder:
    """Writes trial rows, timings and trace as trials complete."""

    def __init__(self, out: Path, trace: bool):
        out.mkdir(parents=True, exist_ok=True)
        self._fh = open(out / "trials.csv", "w", newline="")
        self._tfh = open(out / "timings.csv", "w", newline="")
        self.trials = csv.DictWriter(self._fh, TRIAL_FIELDS, lineterminator="\n")
        self.timings = csv.DictWriter(self._tfh, TIMING_FIELDS, lineterminator="\n")
        self.trials.writeheader()
        self.timings.writeheader()
        self._trace_fh = open(out / "trace.jsonl", "w") if trace else None

    def __call__(self, r) -> None:
        self.trials.writerow({k: getattr(r, k) for k in TRIAL_FIELDS})
        self.timings.writerow({k: getattr(r, k) for k in TIMING_FIELDS})
        if self._trace_fh is not None and r.trace:
            sink = JsonlTrace(self._trace_fh, trial=r.trial, ebn0_db=r.ebn0_db, K=r.K)
            for rec in r.trace:
                sink(rec)
            self._trace_fh.flush()
        self._fh.flush()
        self._tfh.flush()

    def close(self) -> None:
        for fh in (self._fh, self._tfh, self._trace_fh):
            if fh is not None:
                fh.close()


def _write_csv(path: Path, fields: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def execute(m: RunManifest, workers: int = 1) -> dict[str, Any]:
    """Run a manifest, writing all outputs; returns the summary document."""
    out = Path(m.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(m.dumps())
    rec = Recorder(out, m.trace)
    summary: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "mode": m.mode, "points": []}
    try:
        if m.mode in ("trial", "campaign", "sweep"):
            cfg = m.effective_config()
            cb = cached_codebook(cfg, m.codebook_cache)
            n = 1 if m.mode == "trial" else m.n_trials
            grid = sweep_points(m.sweep) if m.mode == "sweep" else [m.ebn0_db]
            rows = []
            for e in grid:
                results = []
                for r in iter_trials(cfg, e, n, cb, workers, collect_trace=m.trace):
                    rec(r)
                    results.append(r)
                stats = summarize(results, e)
                summary["points"].append(_stats_dict(stats))
                rows.append(_plot_row("ebn0_db", e, stats))
            if m.mode == "sweep":
                _write_csv(out / "plot.csv", ["ebn0_db"] + PLOT_FIELDS, rows)
        else:
            ks = m.k_list or (m.config.K,)
            rows, required = [], {}
            for K in ks:
                cfg = m.effective_config(K)
                cb = cached_codebook(cfg, m.codebook_cache)
                points = {}

                def on_point(stats, results, K=K, points=points):
                    for r in results:
                        rec(r)
                    points[stats.ebn0_db] = stats
                    summary["points"].append(_stats_dict(stats))

                try:
                    req = find_required_ebn0(cfg, m.target_pe, m.n_trials, m.bracket, m.tol_db,
                                             cb, workers, on_point)
                except BracketError as exc:
                    summary.setdefault("errors", []).append({"K": K, "message": str(exc)})
                    required[K] = None
                    continue
                required[K] = req
                rows.append(_plot_row("K", K, points[req], {"ebn0_db": req}))
            summary["required_ebn0_db"] = {str(k): v for k, v in required.items()}
            _write_csv(out / "plot.csv", ["K", "ebn0_db"] + PLOT_FIELDS, rows)
    finally:
        rec.close()
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        manifest = resolve_manifest(args)
    except (ConfigError, TypeError, ValueError, OSError) as exc:
        print(f"fasura: invalid configuration: {exc}", file=sys.stderr)
        return 2
    if args.emit_manifest:
        sys.stdout.write(manifest.dumps())
        return 0
    try:
        summary = execute(manifest, max(1, args.workers))
    except KeyboardInterrupt:
        print("fasura: interrupted; completed trials were written", file=sys.stderr)
        return 130
    except ConfigError as exc:
        print(f"fasura: {exc}", file=sys.stderr)
        return 2
    for point in summary["points"]:
        print(f"Eb/N0={point['ebn0_db']:+.3f} dB  K={point['K']}  trials={point['trials']}  "
              f"P_md={point['P_md']:.4f}  P_fa={point['P_fa']:.4f}  P_e={point['P_e']:.4f}")
    for k, v in summary.get("required_ebn0_db", {}).items():
        print(f"K={k}: required Eb/N0 = {v} dB")
    return 1 if summary.get("errors") else 0


if __name__ == "__main__":
    sys.exit(main())
