"""Target trimming for over-long CTC references, and stage-wise gating-loss
weight schedules.

Run: python demos/02_trimming_and_schedules.py
"""

from stclib.numkit import Rng
from stclib.seqloss import LidSequence, WgSchedule, ctc_required_length, trim_target

target = LidSequence("char", tuple("GGGGGGEEGGGG"))
print("target:", " ".join(target.tokens))
print("required input frames:", ctc_required_length(target))

rng = Rng(2024)
for budget in (23, 12, 6, 2):
    out = trim_target(target, budget, rng.stream(budget))
    print(f"budget {budget:2d}: {' '.join(out.tokens):35s} required={ctc_required_length(out)}")

# re-trimming with per-utterance streams is reproducible but varies by epoch,
# which is what makes it act like a regularizer
print("\nepoch-by-epoch trims for one utterance stream:")
stream = Rng(7).stream(42)
for epoch in range(4):
    out = trim_target(target, 8, stream)
    print(f"  epoch {epoch}: {' '.join(out.tokens)}")

print("\nschedule parsing: 'x::y::z' means 10 epochs per stage, last open-ended")
sched = WgSchedule.parse("1.::0.1::0.")
for epoch in (0, 9, 10, 19, 20, 45):
    print(f"  epoch {epoch:2d}: w_g = {sched.weight(epoch)}")
print("round trip:", sched.to_text())
