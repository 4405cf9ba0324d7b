"""Synthetic code-switched sequence task and the desk-scale training loop:
a tiny gated-attention encoder with a CTC output head, per-layer gate
supervision (CTC with or without trimming, STC, or per-frame KL), stage
schedules for the gating-loss weight, and joint / disconnected / w=0
training regimes.

Frame-level language truth is available here because the data is
synthetic; the temporal losses are exercised against word- and char-level
references exactly because real data has no frame labels.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .gatedattn import AttentionConfig, GatedAttentionLayer, GatedAttentionParams, Tape
from .numkit import Rng
from .seqloss import (
    GateMatrix,
    LidSequence,
    LidVocab,
    SPACE,
    WgSchedule,
    alpha_project,
    alpha_project_vjp,
    collapse,
    ctc_loss_values,
    ctc_required_length,
    gate_ce_loss,
    gating_loss_total,
    linear_project,
    linear_project_vjp,
    stc_loss_values,
    trim_target,
)
from .seqloss.types import LossResult


class ToyError(ValueError):
    pass


@dataclass(frozen=True)
class ToyConfig:
    langs: int = 2
    tokens_per_lang: int = 5
    feature_dim: int = 8
    frames_per_token: tuple[int, int] = (3, 5)
    noise: float = 2.1
    lang_separability: float = 0.85  # single-frame linear accuracy by construction
    token_scale: float = 3.0  # token scatter orthogonal to the language axes
    switch_prob: float = 0.3
    utterances: int = 400
    val_utterances: int = 50
    words_range: tuple[int, int] = (3, 6)
    tokens_per_word: tuple[int, int] = (1, 4)
    epochs: int = 50
    learning_rate: float = 0.05
    schedule: str = "1.0"
    regime: str = "joint"  # joint | disconnect | unsupervised
    gate_loss: str = "kl"  # ctc | ctc-trim | stc | kl
    lid_level: str = "char"
    model_dim: int = 32
    heads: int = 4
    layers: int = 2
    method: int = 1
    alpha: float = 0.8
    smoothing: float = 0.1
    context_k: int = 0

    def __post_init__(self):
        if self.regime not in ("joint", "disconnect", "unsupervised"):
            raise ToyError(f"unknown regime {self.regime!r}")
        if self.gate_loss not in ("ctc", "ctc-trim", "stc", "kl"):
            raise ToyError(f"unknown gate loss kind {self.gate_loss!r}")
        if self.lid_level not in ("word", "char"):
            raise ToyError(f"unknown lid level {self.lid_level!r}")
        if not 0.0 <= self.switch_prob <= 1.0:
            raise ToyError("switch_prob must lie in [0, 1]")
        if not 0.5 < self.lang_separability < 1.0:
            raise ToyError("lang_separability must lie in (0.5, 1)")
        if self.langs > self.feature_dim:
            raise ToyError("need feature_dim >= langs for orthogonal language means")
        for name in ("langs", "tokens_per_lang", "feature_dim", "utterances", "epochs"):
            if getattr(self, name) < 1:
                raise ToyError(f"{name} must be positive")
        if self.frames_per_token[0] < 1 or self.frames_per_token[0] > self.frames_per_token[1]:
            raise ToyError("bad frames_per_token range")
        if self.gate_loss == "ctc" and self.frames_per_token[0] < 2:
            raise ToyError("untrimmed CTC gate loss needs >= 2 frames per token")

    @property
    def language_names(self) -> tuple[str, ...]:
        if self.langs == 2:
            return ("GUJ", "ENG")
        return tuple(f"LANG{i}" for i in range(self.langs))

    def lid_vocab(self) -> LidVocab:
        return LidVocab(self.language_names)

    def text_vocab(self) -> LidVocab:
        toks = tuple(
            f"{name}.{i}" for name in self.language_names for i in range(self.tokens_per_lang)
        )
        return LidVocab(toks)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key in ("frames_per_token", "words_range", "tokens_per_word"):
            out[key] = list(out[key])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ToyConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ToyError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("frames_per_token", "words_range", "tokens_per_word"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class ToyUtterance:
    utt_id: str
    features: np.ndarray
    text: tuple[str, ...]
    lid_word: tuple[str, ...]
    lid_char: tuple[str, ...]
    frame_lids: np.ndarray | None = None  # per-frame language index; generator-known

    @property
    def frames(self) -> int:
        return self.features.shape[0]


@dataclass
class ToyDataset:
    config: ToyConfig
    train: list[ToyUtterance]
    val: list[ToyUtterance]

    @property
    def lid_vocab(self) -> LidVocab:
        return self.config.lid_vocab()

    @property
    def text_vocab(self) -> LidVocab:
        return self.config.text_vocab()


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


def _sample_utterance(config: ToyConfig, protos: np.ndarray, utt_id: str, rng: Rng) -> ToyUtterance:
    names = config.language_names
    # roughly unit per-dim feature variance (token offset + frame noise)
    feature_scale = 1.0 / np.sqrt(config.token_scale**2 + config.noise**2)
    n_words = rng.integers(config.words_range[0], config.words_range[1] + 1)
    langs = [rng.integers(config.langs)]
    for _ in range(n_words - 1):
        if rng.uniform() < config.switch_prob and config.langs > 1:
            others = [l for l in range(config.langs) if l != langs[-1]]
            langs.append(others[rng.integers(len(others))])
        else:
            langs.append(langs[-1])

    text, lid_char, frame_lids, frames = [], [], [], []
    last = None
    for w, lang in enumerate(langs):
        if w > 0:
            text.append(SPACE)
            lid_char.append(SPACE)
        for _ in range(rng.integers(config.tokens_per_word[0], config.tokens_per_word[1] + 1)):
            tok = rng.integers(config.tokens_per_lang)
            text.append(f"{names[lang]}.{tok}")
            lid_char.append(names[lang])
            n_frames = rng.integers(config.frames_per_token[0], config.frames_per_token[1] + 1)
            mean = protos[lang, tok]
            block = mean + config.noise * rng.normal(size=(n_frames, config.feature_dim))
            frames.append(feature_scale * block)
            frame_lids.extend([lang] * n_frames)
            last = (lang, tok)
    # the main transcription must always fit its own alignment; pad the last
    # token's run with extra frames when short token draws undershoot it
    deficit = ctc_required_length(text) - len(frame_lids)
    if deficit > 0:
        lang, tok = last
        block = protos[lang, tok] + config.noise * rng.normal(size=(deficit, config.feature_dim))
        frames.append(feature_scale * block)
        frame_lids.extend([lang] * deficit)
    return ToyUtterance(
        utt_id,
        np.concatenate(frames, axis=0),
        tuple(text),
        tuple(names[l] for l in langs),
        tuple(lid_char),
        np.asarray(frame_lids, dtype=np.int64),
    )


def gen_synthetic(config: ToyConfig, seed: int) -> ToyDataset:
    """Markov language switching over words, tokens drawn per word, frames
    drawn from language-and-token Gaussian prototypes plus noise. Fully
    reproducible from the seed.

    Language means sit on random orthonormal directions at the exact
    pairwise distance that makes a single-frame linear classifier achieve
    `lang_separability`, so the gate task's difficulty does not depend on
    prototype luck; token offsets and frame noise stay random.
    """
    master = Rng(seed)
    proto_rng = master.stream(0)
    basis, _ = np.linalg.qr(proto_rng.normal(size=(config.feature_dim, config.langs)))
    # half-distance between any two means, in within-class standard deviations
    half_gap = NormalDist().inv_cdf(config.lang_separability) * np.sqrt(1.0 + config.noise**2)
    lang_means = np.sqrt(2.0) * half_gap * basis.T
    token_offsets = proto_rng.normal(
        scale=config.token_scale, size=(config.langs, config.tokens_per_lang, config.feature_dim)
    )
    # centered per language so realized means sit exactly at the constructed
    # gap, and unit-variance along the inter-mean directions so neither the
    # token draw nor the token scale can blur or sharpen the language boundary
    token_offsets -= token_offsets.mean(axis=1, keepdims=True)
    if config.tokens_per_lang > 1:
        for l in range(config.langs):
            comp = token_offsets[l] @ basis  # tokens x langs
            rms = np.sqrt(np.mean(comp**2, axis=0))
            fix = comp * (1.0 / np.maximum(rms, 1e-9) - 1.0)
            token_offsets[l] += fix @ basis.T
    protos = lang_means[:, None, :] + token_offsets
    train = [
        _sample_utterance(config, protos, f"train{i:04d}", master.stream(1, i))
        for i in range(config.utterances)
    ]
    val = [
        _sample_utterance(config, protos, f"val{i:04d}", master.stream(2, i))
        for i in range(config.val_utterances)
    ]
    return ToyDataset(config, train, val)


def write_dataset_jsonl(path, utts: list[ToyUtterance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u in utts:
            fh.write(
                json.dumps(
                    {
                        "id": u.utt_id,
                        "features": [[float(x) for x in row] for row in u.features],
                        "text": list(u.text),
                        "lid_word": list(u.lid_word),
                        "lid_char": list(u.lid_char),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_dataset_jsonl(path) -> list[ToyUtterance]:
    utts = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            utts.append(
                ToyUtterance(
                    d["id"],
                    np.asarray(d["features"], dtype=np.float64),
                    tuple(d["text"]),
                    tuple(d["lid_word"]),
                    tuple(d["lid_char"]),
                    None,
                )
            )
    return utts


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass
class ToyModel:
    config: ToyConfig
    embed: np.ndarray
    layers: list[GatedAttentionLayer]
    head: np.ndarray
    proj: np.ndarray | None

    @classmethod
    def init(cls, config: ToyConfig, rng: Rng) -> "ToyModel":
        d = config.model_dim
        if d <= config.feature_dim:
            raise ToyError("model_dim must exceed feature_dim (passthrough embedding)")
        lid_vocab, text_vocab = config.lid_vocab(), config.text_vocab()

        def xavier(rows, cols, r):
            bound = np.sqrt(6.0 / (rows + cols))
            return r.uniform(-bound, bound, size=(rows, cols))

        # the trailing feature_dim columns pass the raw frame through untouched,
        # so training cannot collapse the per-frame language information
        embed = xavier(config.feature_dim, d - config.feature_dim, rng.stream(0))
        attn_cfg = AttentionConfig(d, config.heads, config.langs, True, config.method)
        layers = [
            GatedAttentionLayer(attn_cfg, GatedAttentionParams.init(attn_cfg, rng.stream(1, i)))
            for i in range(config.layers)
        ]
        head = xavier(d, text_vocab.size, rng.stream(2))
        proj = None
        if config.gate_loss in ("ctc", "ctc-trim"):
            proj = np.zeros(((2 * config.context_k + 1) * config.langs, lid_vocab.size))
        return cls(config, embed, layers, head, proj)

    def forward(self, utt: ToyUtterance, disconnect: bool = False):
        """Returns (tape, embed/head leaf nodes, log-prob node, per-layer
        forward results)."""
        tape = Tape()
        x = tape.leaf(utt.features, "features")
        embed = tape.leaf(self.embed, "embed")
        head = tape.leaf(self.head, "head")
        z = tape.concat_cols([tape.matmul(x, embed), x])
        results = []
        for layer in self.layers:
            res = layer.forward(tape, z, disconnect=disconnect)
            results.append(res)
            z = res.output
        logp = tape.log_softmax_rows(tape.matmul(z, head))
        return tape, embed, head, logp, results

    def greedy_decode(self, logp_values: np.ndarray) -> tuple[str, ...]:
        vocab = self.config.text_vocab()
        best = np.argmax(logp_values, axis=1)
        return tuple(
            vocab.token(i) for i in collapse(best.tolist()) if i != vocab.blank_index
        )


CHECKPOINT_FORMAT = "stclib-toy-checkpoint/1"


def save_checkpoint(model: ToyModel, seed: int, path) -> None:
    blob = {
        "format": CHECKPOINT_FORMAT,
        "seed": seed,
        "config": model.config.to_dict(),
        "params": {
            "embed": model.embed.tolist(),
            "head": model.head.tolist(),
            "proj": None if model.proj is None else model.proj.tolist(),
            "layers": [
                {name: arr.tolist() for name, arr in layer.params.named().items()}
                for layer in model.layers
            ],
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[ToyModel, int]:
    with open(path, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise ToyError(f"unsupported checkpoint format: {blob.get('format')!r}")
    config = ToyConfig.from_dict(blob["config"])
    params = blob["params"]
    attn_cfg = AttentionConfig(config.model_dim, config.heads, config.langs, True, config.method)
    layers = []
    for lp in params["layers"]:
        layers.append(
            GatedAttentionLayer(
                attn_cfg,
                GatedAttentionParams(
                    np.asarray(lp["q"]),
                    np.asarray(lp["k"]),
                    np.asarray(lp["v"]),
                    np.asarray(lp["w"]),
                    np.asarray(lp["gate"]) if "gate" in lp else None,
                ),
            )
        )
    model = ToyModel(
        config,
        np.asarray(params["embed"]),
        layers,
        np.asarray(params["head"]),
        None if params["proj"] is None else np.asarray(params["proj"]),
    )
    return model, int(blob["seed"])


# ---------------------------------------------------------------------------
# gate supervision
# ---------------------------------------------------------------------------


def _gate_target(config: ToyConfig, utt: ToyUtterance) -> LidSequence:
    if config.gate_loss == "kl":
        names = config.language_names
        return LidSequence("char", tuple(names[int(l)] for l in utt.frame_lids))
    if config.lid_level == "word":
        return LidSequence("word", utt.lid_word)
    return LidSequence("char", utt.lid_char)


def _gate_loss_one_layer(
    model: ToyModel,
    gates_values: np.ndarray,
    target: LidSequence,
) -> tuple[LossResult, np.ndarray | None, float]:
    """Gate loss for one layer: returns (loss with grad w.r.t. the gates,
    gradient w.r.t. the shared projection weights or None, fraction of
    frames whose projected-lattice argmax is the blank token)."""
    config = model.config
    lid_vocab = config.lid_vocab()
    gates = GateMatrix(gates_values, validate=False)
    kind = config.gate_loss
    if kind == "kl":
        return gate_ce_loss(gates, target, lid_vocab, config.smoothing), None, 0.0
    if kind == "stc":
        lattice = alpha_project(gates, config.alpha, lid_vocab)
        loss, grad_lat = stc_loss_values(lattice.values, [lid_vocab.index(t) for t in target.tokens])
        blank_frac = float(np.mean(np.argmax(lattice.values, axis=1) == lid_vocab.blank_index))
        return LossResult(loss, alpha_project_vjp(gates, config.alpha, grad_lat)), None, blank_frac
    # ctc / ctc-trim through the trainable projection
    lattice = linear_project(gates, model.proj, config.context_k, lid_vocab)
    loss, grad_lat = ctc_loss_values(
        lattice.values, [lid_vocab.index(t) for t in target.tokens], lid_vocab.blank_index
    )
    blank_frac = float(np.mean(np.argmax(lattice.values, axis=1) == lid_vocab.blank_index))
    ggates, gproj = linear_project_vjp(gates, model.proj, config.context_k, grad_lat)
    return LossResult(loss, ggates), gproj, blank_frac


def gate_frame_accuracy(gates: GateMatrix, utterance: ToyUtterance) -> float:
    """Fraction of frames whose argmax gate language matches the reference
    frame language (non-language frames, if any, are skipped)."""
    if utterance.frame_lids is None:
        raise ToyError(f"utterance {utterance.utt_id} carries no frame-level language truth")
    if gates.frames != len(utterance.frame_lids):
        raise ToyError(
            f"gates have {gates.frames} frames, reference has {len(utterance.frame_lids)}"
        )
    mask = utterance.frame_lids >= 0
    if not np.any(mask):
        return 0.0
    pred = np.argmax(gates.values, axis=1)
    return float(np.mean(pred[mask] == utterance.frame_lids[mask]))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class EpochStats:
    epoch: int
    main_loss: float
    gating_loss: float
    w_g: float
    gate_accuracy: float
    gate_accuracy_per_layer: list[float]
    val_token_error: float
    blank_fraction: float


@dataclass
class TrainReport:
    config: ToyConfig
    seed: int
    epochs: list[EpochStats] = field(default_factory=list)
    gate_params_isolated: bool | None = None
    gate_dump_paths: list[str] = field(default_factory=list)
    model: ToyModel | None = None  # not serialized

    def to_dict(self) -> dict:
        return {
            "schema_version": "1",
            "config": self.config.to_dict(),
            "seed": self.seed,
            "gate_params_isolated": self.gate_params_isolated,
            "gate_dump_paths": list(self.gate_dump_paths),
            "epochs": [
                {
                    "epoch": e.epoch,
                    "main_loss": e.main_loss,
                    "gating_loss": e.gating_loss,
                    "w_g": e.w_g,
                    "gate_accuracy": e.gate_accuracy,
                    "gate_accuracy_per_layer": e.gate_accuracy_per_layer,
                    "val_token_error": e.val_token_error,
                    "blank_fraction": e.blank_fraction,
                }
                for e in self.epochs
            ],
            "final": {
                "main_loss": self.epochs[-1].main_loss,
                "gate_accuracy": self.epochs[-1].gate_accuracy,
                "val_token_error": self.epochs[-1].val_token_error,
                "blank_fraction": self.epochs[-1].blank_fraction,
            }
            if self.epochs
            else None,
        }


def _validation_stats(model: ToyModel, utts: list[ToyUtterance]) -> tuple[float, list[float], float]:
    """One validation pass: gate-frame accuracy of the topmost gated layer
    (plus per-layer values) and the greedy-decode token error rate."""
    from .cmmetrics import edit_align

    per_layer = np.zeros(len(model.layers))
    errs = total = 0
    for utt in utts:
        _, _, _, logp, results = model.forward(utt)
        for i, res in enumerate(results):
            per_layer[i] += gate_frame_accuracy(GateMatrix(res.gate_values, validate=False), utt)
        hyp = model.greedy_decode(logp.value)
        errs += edit_align(list(utt.text), list(hyp)).distance
        total += len(utt.text)
    per_layer /= max(len(utts), 1)
    ter = errs / total if total else 0.0
    return float(per_layer[-1]), [float(a) for a in per_layer], ter


def train(config: ToyConfig, dataset: ToyDataset, seed: int = 0) -> TrainReport:
    """Plain per-utterance SGD. The trained model rides along on the
    returned report (`report.model`)."""
    rng = Rng(seed)
    model = ToyModel.init(config, rng.stream(0))
    # the unsupervised regime is the zero-weight schedule: gating losses are
    # still computed and reported, never optimized
    schedule = WgSchedule((0.0,)) if config.regime == "unsupervised" else WgSchedule.parse(config.schedule)
    text_vocab = config.text_vocab()
    blank = text_vocab.blank_index
    lr = config.learning_rate
    disconnect = config.regime == "disconnect"
    report = TrainReport(config, seed)
    trim_rngs = [rng.stream(3, i) for i in range(len(dataset.train))]

    for epoch in range(config.epochs):
        w_g = schedule.weight(epoch)
        main_sum = gating_sum = blank_sum = 0.0
        blank_layers = 0
        for ui, utt in enumerate(dataset.train):
            tape, embed_node, head_node, logp, results = model.forward(utt, disconnect=disconnect)
            text_idx = [text_vocab.index(t) for t in utt.text]
            # per-frame means keep the SGD step size independent of T
            frames = utt.frames
            main_loss, main_grad = ctc_loss_values(logp.value, text_idx, blank)
            main_loss, main_grad = main_loss / frames, main_grad / frames
            if not np.isfinite(main_loss):
                raise ToyError(f"non-finite main loss on utterance {utt.utt_id}")

            target = _gate_target(config, utt)
            if config.gate_loss == "ctc-trim":
                target = trim_target(target, utt.frames, trim_rngs[ui])
            per_layer, proj_grads = [], []
            for res in results:
                lres, gproj, bfrac = _gate_loss_one_layer(model, res.gate_values, target)
                if config.gate_loss != "kl":
                    lres = LossResult(lres.loss / frames, lres.grad / frames)
                    gproj = None if gproj is None else gproj / frames
                if not np.isfinite(lres.loss):
                    raise ToyError(f"non-finite gating loss on utterance {utt.utt_id}")
                per_layer.append(lres)
                proj_grads.append(gproj)
                blank_sum += bfrac
                blank_layers += 1
            total = gating_loss_total(per_layer, schedule, epoch)
            gating_sum += sum(r.loss for r in per_layer) / len(per_layer)
            main_sum += main_loss

            if epoch == 0 and ui == 0 and disconnect:
                tape.backward({logp: main_grad})
                gate_grads = [
                    res.bound.grads(layer.config)["gate"]
                    for layer, res in zip(model.layers, results)
                ]
                report.gate_params_isolated = all(np.all(g == 0.0) for g in gate_grads)

            seeds = {logp: main_grad}
            if w_g > 0.0:
                for res, layer_grad in zip(results, total.grad):
                    if res.gates is not None and layer_grad is not None:
                        seeds[res.gates] = layer_grad
            tape.backward(seeds)

            model.embed -= lr * (embed_node.grad if embed_node.grad is not None else 0.0)
            model.head -= lr * (head_node.grad if head_node.grad is not None else 0.0)
            for layer, res in zip(model.layers, results):
                grads = res.bound.grads(layer.config)
                for name, arr in layer.params.named().items():
                    arr -= lr * grads[name]
            if model.proj is not None and w_g > 0.0:
                scale = w_g / len(results)
                for gproj in proj_grads:
                    if gproj is not None:
                        model.proj -= lr * scale * gproj

        n = len(dataset.train)
        acc, acc_layers, ter = _validation_stats(model, dataset.val)
        report.epochs.append(
            EpochStats(
                epoch,
                main_sum / n,
                gating_sum / n,
                w_g,
                acc,
                acc_layers,
                ter,
                blank_sum / max(blank_layers, 1),
            )
        )
    report.model = model
    return report


def dump_gates(model: ToyModel, utterance: ToyUtterance, path) -> None:
    """Plot-ready CSV: one row per (gated layer, frame) with the reference
    language and the gate probabilities."""
    if utterance.frame_lids is None:
        raise ToyError(f"utterance {utterance.utt_id} carries no frame-level language truth")
    names = model.config.language_names
    _, _, _, _, results = model.forward(utterance)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("layer,frame,ref_lang," + ",".join(f"g_{n}" for n in names) + "\n")
            for li, res in enumerate(results):
                for t in range(res.gate_values.shape[0]):
                    ref = names[int(utterance.frame_lids[t])]
                    row = ",".join(repr(float(v)) for v in res.gate_values[t])
                    fh.write(f"{li},{t},{ref},{row}\n")
    except OSError as exc:
        raise ToyError(f"cannot write gate dump to {path}: {exc}") from exc
