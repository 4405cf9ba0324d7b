import numpy as np
import pytest

from stclib.bench import BenchError, build_workload, check_agreement, run_bench
from stclib.seqloss import STC_IMPLEMENTATIONS


class TestWorkload:
    def test_deterministic(self):
        a = build_workload(3, 16, "repetitive", 5)
        b = build_workload(3, 16, "repetitive", 5)
        for (va, ta), (vb, tb) in zip(a["pairs"], b["pairs"]):
            np.testing.assert_array_equal(va, vb)
            assert ta == tb

    def test_repetitive_profile_repeats(self):
        wl = build_workload(20, 40, "repetitive", 1)
        repeats = total = 0
        for _, target in wl["pairs"]:
            repeats += sum(1 for x, y in zip(target, target[1:]) if x == y)
            total += len(target) - 1
        assert repeats / total > 0.8  # 90% repeat probability

    def test_target_length_is_half_the_frames(self):
        wl = build_workload(2, 30, "random", 0)
        assert all(len(t) == 15 for _, t in wl["pairs"])

    def test_unknown_profile(self):
        with pytest.raises(ValueError):
            build_workload(1, 8, "sorted", 0)


class TestAgreement:
    def test_engines_agree_on_random_workloads(self):
        for seed in range(20):
            wl = build_workload(2, 14, "repetitive" if seed % 2 else "random", seed)
            out = check_agreement(wl, list(STC_IMPLEMENTATIONS))
            assert out["max_abs_diff"] <= 1e-9

    def test_disagreement_refused(self, monkeypatch):
        def off_by_a_bit(values, target):
            loss, grad = STC_IMPLEMENTATIONS["vec"](values, target)
            return loss + 5e-9, grad

        monkeypatch.setitem(STC_IMPLEMENTATIONS, "wonky", off_by_a_bit)
        wl = build_workload(1, 10, "random", 0)
        with pytest.raises(BenchError, match="disagree"):
            check_agreement(wl, ["vec", "wonky"])


class TestRunBench:
    def test_report_shape(self):
        rep = run_bench(["memo", "vec"], batch=2, frames=20, profile="repetitive", iters=2, seed=0)
        memo = rep["implementations"]["memo"]
        assert memo["speedup_vs_memoized"] == 1.0
        assert memo["iterations"] == 2
        assert memo["total_seconds"] > 0
        assert rep["workload"]["batch"] == 2

    def test_unregistered_rejected(self):
        with pytest.raises(ValueError, match="warp"):
            run_bench(["warp"], 1, 8, "random", 1, 0)
