"""Word-level edit alignment and the code-switch evaluation metrics:
WER, the error rate restricted to code-switch points (reference words
adjacent to a word of a different language), and its complement over
same-language neighborhoods.
"""

from __future__ import annotations

from dataclasses import dataclass

from .seqloss.types import LidSequence


@dataclass(frozen=True)
class EditOp:
    kind: str  # C | S | D | I
    ref_index: int | None
    hyp_index: int | None


@dataclass(frozen=True)
class EditAlignment:
    ops: tuple[EditOp, ...]

    def count(self, kind: str) -> int:
        return sum(1 for op in self.ops if op.kind == kind)

    @property
    def distance(self) -> int:
        return sum(1 for op in self.ops if op.kind != "C")


@dataclass(frozen=True)
class CsPointSet:
    indices: frozenset[int]

    def __contains__(self, index: int) -> bool:
        return index in self.indices


def edit_align(ref: list[str], hyp: list[str]) -> EditAlignment:
    """Minimal-cost alignment with unit costs; ties in the backtrace break
    deterministically preferring C > S > D > I."""
    n, m = len(ref), len(hyp)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dp[i][0] = i
    for j in range(1, m + 1):
        dp[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = dp[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])
            dp[i][j] = min(sub, dp[i - 1][j] + 1, dp[i][j - 1] + 1)

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            ops.append(EditOp("C", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + 1:
            ops.append(EditOp("S", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            ops.append(EditOp("D", i - 1, None))
            i = i - 1
        else:
            ops.append(EditOp("I", None, j - 1))
            j = j - 1
    return EditAlignment(tuple(reversed(ops)))


def wer(alignment: EditAlignment) -> float:
    """(S + D + I) / (S + D + C); 0/0 is defined as 0."""
    s, d, ins, c = (alignment.count(k) for k in "SDIC")
    denom = s + d + c
    return (s + d + ins) / denom if denom else 0.0


def cs_points(ref: list[str], lids: LidSequence) -> CsPointSet:
    """Reference indices whose left or right neighbor carries a different
    language token."""
    if lids.level != "word":
        raise ValueError("code-switch points need word-level language IDs")
    if len(ref) != len(lids):
        raise ValueError(f"reference has {len(ref)} words but {len(lids)} language IDs")
    toks = lids.tokens
    picked = set()
    for i in range(len(toks)):
        if (i > 0 and toks[i - 1] != toks[i]) or (i + 1 < len(toks) and toks[i + 1] != toks[i]):
            picked.add(i)
    return CsPointSet(frozenset(picked))


def cm_wer(alignment: EditAlignment, points: CsPointSet) -> dict:
    """Error rate M/(M+N) over code-switch reference positions (insertions
    cannot occur there) and the complementary rate over the remaining
    positions, which absorbs all insertion errors."""
    m = n = 0
    other_err = other_ok = 0
    for op in alignment.ops:
        if op.kind == "I":
            other_err += 1
        elif op.ref_index in points:
            if op.kind == "C":
                n += 1
            else:
                m += 1
        else:
            if op.kind == "C":
                other_ok += 1
            else:
                other_err += 1
    cm = m / (m + n) if (m + n) else 0.0
    non_cm = other_err / (other_err + other_ok) if (other_err + other_ok) else 0.0
    return {"cm": cm, "non_cm": non_cm, "M": m, "N": n}


def score_corpus(
    refs: list[tuple[str, list[str]]],
    hyps: list[tuple[str, list[str]]],
    lids: list[tuple[str, list[str]]],
) -> dict:
    """Corpus report over parallel (id, tokens) lists; ids must appear in
    the same order in all three inputs and LID rows must match reference
    lengths."""
    if not (len(refs) == len(hyps) == len(lids)):
        raise ValueError(
            f"utterance counts differ: ref={len(refs)} hyp={len(hyps)} lid={len(lids)}"
        )
    per_utt = []
    totals = dict.fromkeys(("S", "D", "I", "C", "M", "N"), 0)
    other = {"err": 0, "ok": 0}
    for (rid, ref), (hid, hyp), (lid_id, lid) in zip(refs, hyps, lids):
        if rid != hid or rid != lid_id:
            raise ValueError(f"utterance id mismatch: ref={rid!r} hyp={hid!r} lid={lid_id!r}")
        alignment = edit_align(ref, hyp)
        points = cs_points(ref, LidSequence("word", tuple(lid)))
        scores = cm_wer(alignment, points)
        counts = {k: alignment.count(k) for k in "SDIC"}
        per_utt.append(
            {
                "utt": rid,
                "wer": wer(alignment),
                "cm_wer": scores["cm"],
                "non_cm_wer": scores["non_cm"],
                **counts,
                "M": scores["M"],
                "N": scores["N"],
            }
        )
        for k in "SDIC":
            totals[k] += counts[k]
        totals["M"] += scores["M"]
        totals["N"] += scores["N"]
        non_cs_err = counts["S"] + counts["D"] - scores["M"] + counts["I"]
        other["err"] += non_cs_err
        other["ok"] += counts["C"] - scores["N"]
    denom = totals["S"] + totals["D"] + totals["C"]
    corpus = {
        "wer": (totals["S"] + totals["D"] + totals["I"]) / denom if denom else 0.0,
        "cm_wer": totals["M"] / (totals["M"] + totals["N"]) if totals["M"] + totals["N"] else 0.0,
        "non_cm_wer": other["err"] / (other["err"] + other["ok"]) if other["err"] + other["ok"] else 0.0,
        **totals,
    }
    return {"corpus": corpus, "per_utt": per_utt}
