"""Runs, verdicts, traces and threshold sweeps."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Iterable, Optional

from .adversary import (
    ChainAdversary,
    SilentStrategy,
    build_chain,
    enumerate_adversaries,
    from_descriptor,
    ring_feasible,
)
from .netmodel import Config, Payload, Transcript, bits, bitstr
from .protocol import BroadcastResult, broadcast

ADVERSARY_CLASSES = ("none", "silent", "random", "chain", "exhaustive")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    k: int
    h: int
    f: int
    input: Payload = (1,)
    adversary: dict = field(default_factory=lambda: {"kind": "none"})
    seed: int = 0
    trace: Optional[str] = None
    max_n: int = 4
    override_guard: bool = False

    def __post_init__(self):
        if isinstance(self.input, str):
            self.input = bits(self.input)
        self.input = tuple(self.input)
        if isinstance(self.adversary, str):
            self.adversary = {"kind": self.adversary}
        if self.k < 1:
            raise UsageError(f"--k must be >= 1 (got {self.k})")
        if self.h < 2:
            raise UsageError(f"--h must be >= 2 (got {self.h})")
        if self.f < 0:
            raise UsageError(f"--f must be >= 0 (got {self.f})")
        if not self.input:
            raise UsageError("--input must be a non-empty bit string")

    @property
    def n(self) -> int:
        return self.h + self.f

    @property
    def top(self) -> Config:
        return Config.top(self.k, self.h, self.f)

    def record(self) -> dict:
        return {
            "k": self.k,
            "h": self.h,
            "f": self.f,
            "input": bitstr(self.input),
            "adversary": self.adversary,
            "seed": self.seed,
        }


@dataclass
class Verdict:
    agreement: bool
    validity: Optional[bool]
    anomalies: list
    sub_agreement_violations: list
    casts: int
    wall_time: float = 0.0
    achievable: bool = True

    @classmethod
    def of(cls, res: BroadcastResult, wall_time: float = 0.0) -> Verdict:
        return cls(res.agreement, res.validity, list(res.anomalies), list(res.sub_agreement_violations),
                   res.casts, wall_time, res.cfg.achievable)

    @property
    def defeated(self) -> bool:
        return not self.agreement or self.validity is False

    @property
    def violation(self) -> bool:
        """A failure that must not happen when 2f < kh."""
        return self.achievable and (self.defeated or bool(self.anomalies) or bool(self.sub_agreement_violations))

    def record(self) -> dict:
        # wall time stays out of the trace so traces are byte-stable
        return {
            "agreement": self.agreement,
            "validity": self.validity,
            "anomalies": self.anomalies,
            "sub_agreement_violations": self.sub_agreement_violations,
            "casts": self.casts,
        }


def run(cfg: RunConfig) -> tuple[Verdict, Transcript]:
    strategy = from_descriptor(cfg.adversary, cfg.top, cfg.seed, cfg.max_n, cfg.override_guard)
    return run_strategy(cfg, strategy)


def run_strategy(cfg: RunConfig, strategy) -> tuple[Verdict, Transcript]:
    transcript = Transcript()
    start = time.perf_counter()
    res = broadcast(cfg.k, cfg.h, cfg.f, cfg.input, strategy, transcript=transcript)
    verdict = Verdict.of(res, time.perf_counter() - start)
    record = cfg.record()
    if strategy is not None:
        record["adversary"] = strategy.descriptor()
    record["input"] = bitstr(res.input)
    transcript.verdict({"config": record, **verdict.record()})
    if cfg.trace:
        transcript.write(cfg.trace)
    return verdict, transcript


def verdict_from_events(events: Iterable[dict]) -> dict:
    """Agreement and validity recomputed from output events alone."""
    outs = [e for e in events if e["kind"] == "output"]
    values = {e["value"] for e in outs}
    sender = [e["value"] for e in outs if e["role"] == "sender"]
    validity = None
    if sender:
        validity = all(e["value"] == sender[0] for e in outs)
    return {"agreement": len(values) <= 1, "validity": validity}


@dataclass
class ReplayResult:
    derived: dict
    recorded: dict
    bytes_match: Optional[bool] = None

    @property
    def ok(self) -> bool:
        same = all(self.derived[key] == self.recorded.get(key) for key in self.derived)
        return same and self.bytes_match is not False


def replay(path, rerun: bool = False) -> ReplayResult:
    transcript = Transcript.read(path)
    verdicts = [e for e in transcript.events if e["kind"] == "verdict"]
    if not verdicts:
        raise UsageError(f"{path}: no verdict record")
    recorded = verdicts[-1]
    result = ReplayResult(verdict_from_events(transcript.events), recorded)
    if rerun:
        c = recorded["config"]
        cfg = RunConfig(c["k"], c["h"], c["f"], c["input"], c["adversary"], c["seed"], override_guard=True)
        _, again = run(cfg)
        with open(path, encoding="ascii") as fh:
            result.bytes_match = fh.read() == again.to_jsonl()
    return result


@dataclass(frozen=True)
class Threshold:
    k: int
    h: int
    f: int

    @property
    def achievable(self) -> bool:
        return 2 * self.f < self.k * self.h

    @property
    def label(self) -> str:
        return "achievable" if self.achievable else "impossible"

    def __str__(self):
        op = "<" if self.achievable else ">="
        return f"k={self.k} h={self.h} f={self.f}: 2f={2 * self.f} {op} kh={self.k * self.h} -> {self.label}"


def check_threshold(k: int, h: int, f: int) -> Threshold:
    return Threshold(k, h, f)


def chain_attack(k: int, h: int, f: int) -> list[tuple[int, BroadcastResult]]:
    """Run the chain adversary for every adjacent compliant pair."""
    chain = build_chain(k, h, f)
    results = []
    for pair in range(len(chain.clusters) - 1):
        results.append((pair, broadcast(k, h, f, (0,), ChainAdversary(chain, pair))))
    return results


def silent_strategies(n: int, f: int):
    for cs in combinations(range(n), f):
        yield SilentStrategy(cs)


@dataclass
class SweepRow:
    k: int
    h: int
    f: int
    observed: dict
    runs: int
    anomalies: int

    @property
    def n(self) -> int:
        return self.h + self.f

    @property
    def prediction(self) -> str:
        return check_threshold(self.k, self.h, self.f).label

    @property
    def result(self) -> str:
        defeated = any(v == "defeated" for v in self.observed.values())
        if self.prediction == "achievable":
            return "PASS" if not defeated and not self.anomalies else "FAIL"
        return "PASS" if defeated else "FAIL"


def _observe(verdicts: list[Verdict]) -> str:
    return "defeated" if any(v.defeated for v in verdicts) else "agree"


def sweep_row(k: int, h: int, f: int, classes=ADVERSARY_CLASSES, seeds: int = 50,
              exhaustive_max_n: int = 4) -> SweepRow:
    cfg = Config.top(k, h, f)
    observed, runs, anomalies = {}, 0, 0

    def go(strategy, value):
        nonlocal runs, anomalies
        res = broadcast(k, h, f, value, strategy)
        runs += 1
        anomalies += bool(res.anomalies) and cfg.achievable
        return Verdict.of(res)

    for cls in classes:
        if cls == "none":
            observed[cls] = _observe([go(None, (v,)) for v in (0, 1)])
        elif cls == "silent":
            observed[cls] = _observe([go(s, (v,)) for s in silent_strategies(cfg.n, f) for v in (0, 1)])
        elif cls == "random":
            observed[cls] = _observe([go(from_descriptor({"kind": "random", "seed": s}, cfg), (s % 2,))
                                      for s in range(seeds)])
        elif cls == "chain":
            if not ring_feasible(k, h, f):
                observed[cls] = "n/a"
                continue
            chain = build_chain(k, h, f)
            observed[cls] = _observe([go(ChainAdversary(chain, j), (0,)) for j in range(len(chain.clusters) - 1)])
        elif cls == "exhaustive":
            if cfg.n > exhaustive_max_n:
                observed[cls] = "skipped"
                continue
            observed[cls] = _observe([go(s, (v,)) for v in (0, 1) for s in enumerate_adversaries(cfg, max_n=exhaustive_max_n)])
        else:
            raise UsageError(f"unknown adversary class {cls!r}")
    return SweepRow(k, h, f, observed, runs, anomalies)


def _row_job(args):
    return sweep_row(*args)


def sweep(max_k: int, max_h: int, max_f: int, classes=ADVERSARY_CLASSES, seeds: int = 50,
          max_n: int = 5, exhaustive_max_n: int = 4, jobs: int = 1) -> list[SweepRow]:
    """One row per (k, h, f) with ``h + f <= max_n``, in (k, h, f) order."""
    for cls in classes:
        if cls not in ADVERSARY_CLASSES:
            raise UsageError(f"unknown adversary class {cls!r}")
    grid = [
        (k, h, f, tuple(classes), seeds, exhaustive_max_n)
        for k in range(1, max_k + 1)
        for h in range(2, max_h + 1)
        for f in range(0, max_f + 1)
        if h + f <= max_n
    ]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_row_job, grid))
    return [_row_job(g) for g in grid]


def sweep_table(rows: list[SweepRow], classes=ADVERSARY_CLASSES, delimiter: str = ",") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(["k", "h", "f", "n", "2f", "kh", "prediction", *classes, "runs", "anomalies", "result"])
    for r in rows:
        w.writerow([r.k, r.h, r.f, r.n, 2 * r.f, r.k * r.h, r.prediction,
                    *(r.observed.get(c, "") for c in classes), r.runs, r.anomalies, r.result])
    return buf.getvalue()


def row_dict(row: SweepRow) -> dict:
    d = asdict(row)
    d.update(n=row.n, prediction=row.prediction, result=row.result)
    return d
