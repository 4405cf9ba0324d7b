"""Command-line front door: `loss` evaluates temporal losses on lattice
files, `metrics` scores ref/hyp/LID corpora, `train-toy` runs the synthetic
training harness, `gates` dumps per-frame gate weights from a checkpoint,
and `bench` times the loss-implementation ladder.

All reports are JSON with a schema_version field and deterministic
formatting; gate dumps are CSV. Exit codes: 0 success, 2 input error,
3 internal consistency failure. STC_THREADS caps utterance parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from .bench import BenchError, run_bench
from .cmmetrics import score_corpus
from .numkit import Rng
from .seqloss import (
    LidSequence,
    LidVocab,
    LogProbLattice,
    GateMatrix,
    SPECIALS,
    VocabError,
    alpha_project,
    ctc_loss,
    stc_loss,
    trim_target,
)
from .seqloss.fileio import ParseError, read_lattice_csv, read_token_file
from .toyharness import (
    ToyConfig,
    ToyError,
    dump_gates,
    gen_synthetic,
    load_checkpoint,
    save_checkpoint,
    train,
)


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parallel_map(fn, items):
    threads = int(os.environ.get("STC_THREADS", "1"))
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------


def _lattice_from_file(path, alpha: float):
    """Full lattices carry the four specials as their last columns; a
    languages-only file is read as log gate probabilities and alpha-smoothed
    into the full vocabulary."""
    tokens, values = read_lattice_csv(path)
    present = [s for s in SPECIALS if s in tokens]
    if len(present) == 4:
        if tuple(tokens[-4:]) != SPECIALS:
            raise CliError(
                f"{path}: the four special tokens must be the last columns in order "
                f"{', '.join(SPECIALS)}"
            )
        vocab = LidVocab(tuple(tokens[:-4]))
        return LogProbLattice(vocab, values)
    if present:
        raise CliError(f"{path}: lattice carries only some special tokens ({present})")
    vocab = LidVocab(tuple(tokens))
    gates = GateMatrix(np.exp(values))
    return alpha_project(gates, alpha, vocab)


def cmd_loss(args) -> int:
    targets = {utt: toks for utt, toks in read_token_file(args.targets)}
    level = "word" if args.level == "word" else "char"
    rng = Rng(args.seed)
    entries = []
    for index, lattice_path in enumerate(args.lattice):
        utt = Path(lattice_path).stem
        if utt not in targets:
            raise CliError(f"no target line for utterance {utt!r} in {args.targets}")
        lattice = _lattice_from_file(lattice_path, args.alpha)
        target = LidSequence(level, tuple(targets[utt]))
        entries.append((index, utt, lattice, target))

    def one(entry):
        index, utt, lattice, target = entry
        if args.type == "ctc-trim":
            trimmed = trim_target(target, lattice.frames, rng.stream(index))
            res = ctc_loss(lattice, trimmed)
        elif args.type == "ctc":
            res = ctc_loss(lattice, target)
        else:
            res = stc_loss(lattice, target)
        return {
            "utt": utt,
            "loss": res.loss if np.isfinite(res.loss) else None,
            "finite": bool(np.isfinite(res.loss)),
            "frames": lattice.frames,
            "target_len": len(target),
        }

    try:
        utts = _parallel_map(one, entries)
    except VocabError as exc:
        raise CliError(str(exc))
    report = {
        "schema_version": "1",
        "type": args.type,
        "alpha": args.alpha,
        "seed": args.seed,
        "utts": utts,
    }
    _emit(report, args.out)
    return 0


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def cmd_metrics(args) -> int:
    refs = read_token_file(args.ref)
    hyps = read_token_file(args.hyp)
    lids = read_token_file(args.lid)
    ref_ids = [u for u, _ in refs]
    for name, rows in (("hyp", hyps), ("lid", lids)):
        ids = [u for u, _ in rows]
        missing = sorted(set(ref_ids) - set(ids))
        extra = sorted(set(ids) - set(ref_ids))
        if missing:
            raise CliError(f"utterance {missing[0]!r} missing from the {name} file")
        if extra:
            raise CliError(f"utterance {extra[0]!r} in the {name} file has no reference")
        if ids != ref_ids:
            spot = next(i for i, (a, b) in enumerate(zip(ref_ids, ids)) if a != b)
            raise CliError(
                f"{name} file order differs from the reference at line {spot + 1}: "
                f"{ids[spot]!r} vs {ref_ids[spot]!r}"
            )
    try:
        report = score_corpus(refs, hyps, lids)
    except ValueError as exc:
        raise CliError(str(exc))
    report["schema_version"] = "1"
    _emit(report, args.out)
    return 0


# ---------------------------------------------------------------------------
# train-toy / gates
# ---------------------------------------------------------------------------

_RANGE = {
    "type": "array",
    "items": {"type": "integer", "minimum": 1},
    "minItems": 2,
    "maxItems": 2,
}

TOY_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "langs": {"type": "integer", "minimum": 1},
        "tokens_per_lang": {"type": "integer", "minimum": 1},
        "feature_dim": {"type": "integer", "minimum": 1},
        "frames_per_token": _RANGE,
        "noise": {"type": "number", "minimum": 0},
        "lang_separability": {"type": "number", "exclusiveMinimum": 0.5, "exclusiveMaximum": 1},
        "token_scale": {"type": "number", "exclusiveMinimum": 0},
        "switch_prob": {"type": "number", "minimum": 0, "maximum": 1},
        "utterances": {"type": "integer", "minimum": 1},
        "val_utterances": {"type": "integer", "minimum": 0},
        "words_range": _RANGE,
        "tokens_per_word": _RANGE,
        "epochs": {"type": "integer", "minimum": 1},
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "schedule": {"type": "string", "pattern": r"^[0-9.eE+-]+(::[0-9.eE+-]+)*$"},
        "regime": {"enum": ["joint", "disconnect", "unsupervised"]},
        "gate_loss": {"enum": ["ctc", "ctc-trim", "stc", "kl"]},
        "lid_level": {"enum": ["word", "char"]},
        "model_dim": {"type": "integer", "minimum": 1},
        "heads": {"type": "integer", "minimum": 1},
        "layers": {"type": "integer", "minimum": 1},
        "method": {"enum": [1, 2]},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "smoothing": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "context_k": {"type": "integer", "minimum": 0},
    },
}


def _load_toy_config(path) -> ToyConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}")
    try:
        jsonschema.validate(data, TOY_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        pointer = "/" + "/".join(str(p) for p in exc.absolute_path)
        raise CliError(f"config schema violation at {pointer}: {exc.message}")
    try:
        return ToyConfig.from_dict(data)
    except ToyError as exc:
        raise CliError(f"bad config: {exc}")


def cmd_train_toy(args) -> int:
    config = _load_toy_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = gen_synthetic(config, args.seed)
    try:
        report = train(config, dataset, seed=args.seed)
    except ToyError as exc:
        raise CliError(str(exc), code=3)
    model = report.model
    for utt in dataset.val[: args.dump_gates]:
        path = out_dir / f"gates_{utt.utt_id}.csv"
        dump_gates(model, utt, path)
        # relative to the run directory so reports are reproducible byte-for-byte
        report.gate_dump_paths.append(path.name)
    save_checkpoint(model, args.seed, out_dir / "checkpoint.json")
    report_path = out_dir / "report.json"
    _emit(report.to_dict(), str(report_path))
    sys.stdout.write(
        json.dumps(
            {
                "schema_version": "1",
                "report": str(report_path),
                "checkpoint": str(out_dir / "checkpoint.json"),
                "final_gate_accuracy": report.epochs[-1].gate_accuracy,
            },
            sort_keys=True,
        )
        + "\n"
    )
    return 0


def cmd_gates(args) -> int:
    try:
        model, seed = load_checkpoint(args.model)
    except (OSError, json.JSONDecodeError, ToyError, KeyError) as exc:
        raise CliError(f"cannot load checkpoint {args.model}: {exc}")
    dataset = gen_synthetic(model.config, seed)
    pool = {u.utt_id: u for u in dataset.train + dataset.val}
    if args.utt not in pool:
        raise CliError(f"utterance {args.utt!r} not in the dataset regenerated from seed {seed}")
    dump_gates(model, pool[args.utt], args.out)
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def cmd_bench(args) -> int:
    impls = [name.strip() for name in args.impls.split(",") if name.strip()]
    try:
        report = run_bench(impls, args.batch, args.frames, args.target_profile, args.iters, args.seed)
    except ValueError as exc:
        raise CliError(str(exc))
    except BenchError as exc:
        raise CliError(str(exc), code=3)
    _emit(report, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stc-cli",
        description="Temporal classification losses, code-switch metrics, and the toy harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("loss", help="evaluate CTC/STC losses on lattice files")
    p.add_argument("--type", required=True, choices=["ctc", "ctc-trim", "stc"])
    p.add_argument("--lattice", required=True, nargs="+", help="lattice CSV files (utt id = stem)")
    p.add_argument("--targets", required=True, help="kaldi-style targets: 'uttid tok1 tok2 ...'")
    p.add_argument("--alpha", type=float, default=0.8, help="smoothing for languages-only inputs")
    p.add_argument("--seed", type=int, default=0, help="seed for trimming randomness")
    p.add_argument("--level", choices=["word", "char"], default="word")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_loss)

    p = sub.add_parser("metrics", help="corpus WER / code-switch-point error rates")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--lid", required=True, help="word-level language IDs parallel to --ref")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("train-toy", help="train the synthetic code-switched toy model")
    p.add_argument("--config", required=True, help="JSON config (see documented schema)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dump-gates", type=int, default=3, help="gate CSVs for this many val utts")
    p.set_defaults(fn=cmd_train_toy)

    p = sub.add_parser("gates", help="dump per-frame gate weights from a checkpoint")
    p.add_argument("--model", required=True, help="checkpoint.json from train-toy")
    p.add_argument("--utt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gates)

    p = sub.add_parser("bench", help="time the loss-implementation ladder")
    p.add_argument("--impls", default="memo,table,vec")
    p.add_argument("--batch", type=int, default=5)
    p.add_argument("--frames", type=int, default=224)
    p.add_argument("--target-profile", choices=["repetitive", "random"], default="repetitive")
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code
    except (ParseError, VocabError, ToyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
