"""Temporal classification loss family: CTC with and without trimming,
the blank-free STC loss in three implementations, projections from gate
weights to token lattices, the per-frame KL loss, the smoothness penalty,
and stage-weighted per-layer aggregation.
"""

from .ctc import collapse, ctc_loss, ctc_loss_values, ctc_required_length, trim_target
from .framewise import gate_ce_loss, gating_loss_total, smoothness_penalty
from .oracles import (
    enumerate_ctc,
    enumerate_ctc_values,
    enumerate_stc,
    enumerate_stc_values,
)
from .project import alpha_project, alpha_project_vjp, linear_project, linear_project_vjp
from .stc import (
    STC_IMPLEMENTATIONS,
    stc_loss,
    stc_loss_naive,
    stc_loss_values,
    stc_loss_values_memo,
    stc_loss_values_table,
)
from .types import (
    BLANK,
    EOSSOS,
    GateMatrix,
    LidSequence,
    LidVocab,
    LogProbLattice,
    LossResult,
    SPACE,
    SPECIALS,
    UNK,
    VocabError,
    WgSchedule,
    uniform_lattice,
)

__all__ = [
    "BLANK",
    "EOSSOS",
    "GateMatrix",
    "LidSequence",
    "LidVocab",
    "LogProbLattice",
    "LossResult",
    "SPACE",
    "SPECIALS",
    "STC_IMPLEMENTATIONS",
    "UNK",
    "VocabError",
    "WgSchedule",
    "alpha_project",
    "alpha_project_vjp",
    "collapse",
    "ctc_loss",
    "ctc_loss_values",
    "ctc_required_length",
    "enumerate_ctc",
    "enumerate_ctc_values",
    "enumerate_stc",
    "enumerate_stc_values",
    "gate_ce_loss",
    "gating_loss_total",
    "linear_project",
    "linear_project_vjp",
    "smoothness_penalty",
    "stc_loss",
    "stc_loss_naive",
    "stc_loss_values",
    "stc_loss_values_memo",
    "stc_loss_values_table",
    "trim_target",
    "uniform_lattice",
]
