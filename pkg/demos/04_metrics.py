"""WER and code-switch-point error rates on a tiny corpus.

Run: python demos/04_metrics.py
"""

import json

from stclib.cmmetrics import cm_wer, cs_points, edit_align, score_corpus, wer
from stclib.seqloss import LidSequence

ref = ["kale", "match", "pachi", "final", "selection", "thase"]
hyp = ["kale", "mach", "pachi", "final", "selection", "hase"]
lids = LidSequence("word", ("GUJ", "ENG", "GUJ", "ENG", "ENG", "GUJ"))

alignment = edit_align(ref, hyp)
print("alignment:", " ".join(f"{op.kind}" for op in alignment.ops))
print("WER:", round(wer(alignment), 4))

points = cs_points(ref, lids)
print("code-switch points (reference indices):", sorted(points.indices))
scores = cm_wer(alignment, points)
print(f"CM error rate: {scores['cm']:.4f}   non-CM error rate: {scores['non_cm']:.4f}")
print("(insertions always land in the non-CM bucket; CS points cannot host them)")

report = score_corpus(
    refs=[("utt1", ref), ("utt2", ["ek", "be", "tran"])],
    hyps=[("utt1", hyp), ("utt2", ["ek", "be", "tran"])],
    lids=[("utt1", list(lids.tokens)), ("utt2", ["GUJ", "GUJ", "GUJ"])],
)
print("\ncorpus report:")
print(json.dumps(report["corpus"], indent=2, sort_keys=True))
