"""Walk through the temporal loss family on tiny hand-checkable lattices.

Run: python demos/01_losses.py
"""

import itertools
import math

import numpy as np

from stclib.seqloss import (
    BLANK,
    LidSequence,
    LidVocab,
    ctc_loss,
    ctc_required_length,
    enumerate_ctc,
    enumerate_stc,
    stc_loss,
    stc_loss_naive,
    uniform_lattice,
)

vocab = LidVocab(("a", "b"))
print("vocabulary:", vocab.tokens)

# --- CTC on a uniform lattice ------------------------------------------------
# three frames, uniform over {a, b, blank}: exactly five strings collapse
# to "a b" (aab, abb, a.b, .ab, ab.) out of 27
lat = uniform_lattice(vocab, 3, support=["a", "b", BLANK])
target = LidSequence("word", ("a", "b"))
res = ctc_loss(lat, target)
print(f"\nCTC loss on uniform 3-frame lattice, target a b: {res.loss:.4f}")
print(f"  closed form -ln(5/27) = {-math.log(5 / 27):.4f}")
print(f"  brute-force enumeration agrees: {-math.log(enumerate_ctc(lat, target)):.4f}")

# repeated tokens need a separating blank frame: 'a a' cannot fit in 2 frames
short = uniform_lattice(vocab, 2, support=["a", "b", BLANK])
rep = LidSequence("word", ("a", "a"))
print(f"\nminimal frames for 'a a': {ctc_required_length(rep)}")
print(f"CTC loss with only 2 frames: {ctc_loss(short, rep).loss}")

# --- STC: no blanks, run-stretch alignments ---------------------------------
lat2 = uniform_lattice(vocab, 3, support=["a", "b"])
print(f"\nSTC loss, uniform 3 frames, target a b: {stc_loss(lat2, target).loss:.4f}")
print(f"  alignments aab and abb, each 1/8, each shared by 2 outputs -> -ln(1/8)")
print(f"  brute-force enumeration agrees: {-math.log(enumerate_stc(lat2, target)):.4f}")
print(f"STC loss, target a a: {stc_loss(lat2, rep).loss:.4f}  (-ln(1/24): one string aaa, run length 3)")

# the per-alignment normalization makes the target probabilities a distribution
total = 0.0
for n in range(1, 4):
    for toks in itertools.product("ab", repeat=n):
        total += math.exp(-stc_loss(lat2, LidSequence("word", toks)).loss)
print(f"\nsum of exp(-STC) over every target of length 1..3: {total:.12f}")

# the naive recursion's target-run normalization does NOT have that property
total_naive = 0.0
for n in range(1, 4):
    for toks in itertools.product("ab", repeat=n):
        total_naive += math.exp(-stc_loss_naive(lat2, LidSequence("word", toks), "listing").loss)
print(f"same sum under the naive listing normalization: {total_naive:.4f}  (not 1)")

# gradients come along for free
res = stc_loss(lat2, target)
print("\nSTC gradient w.r.t. the lattice (columns a, b):")
print(np.round(res.grad[:, :2], 4))
