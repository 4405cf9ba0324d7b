"""Benchmark ladder for the run-stretch loss implementations: the same
batch workload is fed to the memoized, tabulated, and vectorized engines,
their losses are required to agree before any timing happens, and the
report carries per-engine timings plus speedups against the memoized
baseline.
"""

from __future__ import annotations

import time

import numpy as np

from .numkit import Rng
from .seqloss import STC_IMPLEMENTATIONS, LidVocab

AGREEMENT_TOLERANCE = 1e-9


class BenchError(RuntimeError):
    pass


def build_workload(batch: int, frames: int, profile: str, seed: int) -> dict:
    """Batch of (lattice values, target indices) pairs over a two-language
    vocabulary. `repetitive` targets of length frames/2 repeat their
    predecessor with probability 0.9, mirroring char-level LID statistics;
    `random` targets draw tokens independently."""
    if profile not in ("repetitive", "random"):
        raise ValueError(f"unknown target profile {profile!r}")
    vocab = LidVocab(("GUJ", "ENG"))
    rng = Rng(seed)
    pairs = []
    for b in range(batch):
        r = rng.stream(b)
        logits = r.normal(size=(frames, vocab.size))
        values = logits - np.log(np.sum(np.exp(logits), axis=1, keepdims=True))
        length = max(1, frames // 2)
        target = [r.integers(2)]
        for _ in range(length - 1):
            if profile == "repetitive" and r.uniform() < 0.9:
                target.append(target[-1])
            else:
                target.append(r.integers(2))
        pairs.append((values, target))
    return {
        "vocab": vocab,
        "pairs": pairs,
        "descriptor": {
            "batch": batch,
            "frames": frames,
            "target_profile": profile,
            "target_len": max(1, frames // 2),
            "seed": seed,
        },
    }


def check_agreement(workload: dict, impls: list[str]) -> dict:
    """Per-pair losses across engines; raises BenchError beyond tolerance."""
    losses = {name: [] for name in impls}
    for values, target in workload["pairs"]:
        for name in impls:
            loss, _ = STC_IMPLEMENTATIONS[name](values, target)
            losses[name].append(loss)
    arr = np.asarray([losses[name] for name in impls])
    max_diff = float(np.max(np.abs(arr - arr[0]))) if len(impls) > 1 else 0.0
    if max_diff > AGREEMENT_TOLERANCE:
        raise BenchError(
            f"engine losses disagree by {max_diff:.3e} (> {AGREEMENT_TOLERANCE:.0e}); refusing to time"
        )
    return {
        "max_abs_diff": max_diff,
        "tolerance": AGREEMENT_TOLERANCE,
        "losses": {name: [float(l) for l in vals] for name, vals in losses.items()},
    }


def run_bench(
    impls: list[str], batch: int, frames: int, profile: str, iters: int, seed: int
) -> dict:
    """Time forward+backward per engine over `iters` sweeps of the batch.
    Correctness precedes speed: agreement is checked before timing."""
    unknown = [n for n in impls if n not in STC_IMPLEMENTATIONS]
    if unknown:
        raise ValueError(f"unregistered implementations: {unknown}")
    workload = build_workload(batch, frames, profile, seed)
    agreement = check_agreement(workload, impls)
    timings = {}
    for name in impls:
        fn = STC_IMPLEMENTATIONS[name]
        start = time.perf_counter()
        for _ in range(iters):
            for values, target in workload["pairs"]:
                fn(values, target)
        total = time.perf_counter() - start
        timings[name] = total
    report = {
        "schema_version": "1",
        "workload": workload["descriptor"],
        "agreement": {k: agreement[k] for k in ("max_abs_diff", "tolerance")},
        "implementations": {},
    }
    base = timings.get("memo")
    for name in impls:
        total = timings[name]
        report["implementations"][name] = {
            "iterations": iters,
            "total_seconds": total,
            "seconds_per_iteration": total / iters,
            "speedup_vs_memoized": (base / total) if base is not None else None,
        }
    return report
