"""Train a tiny gated encoder on synthetic code-switched data and watch the
gate weights align to the reference language per frame.

A short run for demonstration; the full defaults (400 utterances, 50
epochs) are what the acceptance suite uses.

Run: python demos/05_toy_training.py
"""

import numpy as np

from stclib.seqloss import GateMatrix
from stclib.toyharness import ToyConfig, dump_gates, gate_frame_accuracy, gen_synthetic, train

config = ToyConfig(utterances=120, val_utterances=20, epochs=12)
print("toy config:", config.gate_loss, "gate loss,", config.regime, "regime,",
      config.layers, "gated layers")

dataset = gen_synthetic(config, seed=2024)
utt = dataset.train[0]
print(f"\nfirst utterance: {len(utt.lid_word)} words, {utt.frames} frames")
print("  text:    ", " ".join(utt.text))
print("  word LID:", " ".join(utt.lid_word))

report = train(config, dataset, seed=2024)
print("\nepoch  main   gating  gate-acc  val-TER")
for e in report.epochs:
    if e.epoch % 2 == 0 or e.epoch == config.epochs - 1:
        print(f"{e.epoch:5d}  {e.main_loss:.3f}  {e.gating_loss:.4f}  {e.gate_accuracy:.3f}     {e.val_token_error:.3f}")

# per-frame alignment picture for one held-out utterance
val = dataset.val[0]
_, _, _, _, results = report.model.forward(val)
gates = results[-1].gate_values
acc = gate_frame_accuracy(GateMatrix(gates, validate=False), val)
print(f"\nheld-out utterance {val.utt_id}: top-layer gate accuracy {acc:.3f}")
names = config.language_names
bar = "".join(names[g][0] if g == r else "." for g, r in zip(np.argmax(gates, 1), val.frame_lids))
ref = "".join(names[r][0] for r in val.frame_lids)
print("  reference:", ref)
print("  matches:  ", bar, "(. = wrong)")

dump_gates(report.model, val, "/tmp/toy_gates.csv")
print("\nper-frame gate dump written to /tmp/toy_gates.csv")
