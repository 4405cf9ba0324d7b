"""File formats owned by the loss family: lattice CSV (one `#vocab:` header
line, then one row of log-probabilities per frame) and kaldi-style token
files (`uttid tok1 tok2 ...`, one utterance per line).
"""

from __future__ import annotations

import numpy as np


class ParseError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


def read_lattice_csv(path) -> tuple[list[str], np.ndarray]:
    """Returns (vocab tokens, T x V array). The caller decides how to
    interpret the token list (full lattice vs language-only gate file)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#vocab:"):
        raise ParseError(path, 1, "expected '#vocab: tok1,tok2,...' header")
    tokens = [t.strip() for t in lines[0][len("#vocab:") :].split(",") if t.strip()]
    if not tokens:
        raise ParseError(path, 1, "empty vocabulary")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(tokens):
            raise ParseError(path, i, f"expected {len(tokens)} values, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ParseError(path, i, str(exc)) from None
    return tokens, np.asarray(rows, dtype=np.float64)


def write_lattice_csv(path, tokens: list[str], values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("#vocab: " + ",".join(tokens) + "\n")
        for row in values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_token_file(path) -> list[tuple[str, list[str]]]:
    """Kaldi-style text: one `uttid tok1 tok2 ...` per line, order kept."""
    utts = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            utt, toks = parts[0], parts[1:]
            if utt in seen:
                raise ParseError(path, i, f"duplicate utterance id {utt!r}")
            seen.add(utt)
            utts.append((utt, toks))
    return utts


def write_token_file(path, utts) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for utt, toks in utts:
            fh.write(utt + " " + " ".join(toks) + "\n")
