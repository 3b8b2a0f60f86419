"""Parsing and validation of participant score files.

A score file is tab-separated UTF-8 with header `modelid segmentid LLR`,
one row per trial, LLR in natural log. A submission is accepted only when
its key set exactly equals the blind trial list; validation never consults
the answer key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable

import numpy as np

from .trialset import TrialSetManifest

SCORE_COLUMNS = ("modelid", "segmentid", "LLR")
MAX_REPORTED = 100


class ScoreFileError(ValueError):
    """Malformed score file; carries the offending 1-based line number."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)


@dataclass(frozen=True)
class Submission:
    """A validated, complete score set for a trial list."""

    team_id: str
    scores: dict[tuple[str, str], float]
    received_at: datetime

    def align(self, manifest: TrialSetManifest) -> np.ndarray:
        """Scores as a float64 array in manifest row order."""
        index = manifest.pair_index()
        out = np.empty(len(manifest), dtype=np.float64)
        for pair, row in index.items():
            out[row] = self.scores[pair]
        return out


@dataclass
class ValidationReport:
    """Why a submission was rejected. Lists are truncated to MAX_REPORTED."""

    missing: list[tuple[str, str]] = field(default_factory=list)
    extra: list[tuple[str, str]] = field(default_factory=list)
    n_missing: int = 0
    n_extra: int = 0

    @property
    def ok(self) -> bool:
        return self.n_missing == 0 and self.n_extra == 0

    def summary(self) -> str:
        return f"{self.n_missing} missing trial(s), {self.n_extra} extra trial(s)"


def _parse_llr(token: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ValueError(f"non-numeric LLR {token!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite LLR {token!r}")
    return value


def parse_scores(path: str) -> dict[tuple[str, str], float]:
    """Read a score file into a {(modelid, segmentid): LLR} mapping.

    Raises ScoreFileError with a line number for a bad column count, a
    non-numeric or non-finite LLR, or a duplicated trial row.
    """
    with open(path, "rb") as f:
        data = f.read()
    return parse_scores_bytes(data, path=path)


def parse_scores_bytes(data: bytes, path: str = "<upload>") -> dict[tuple[str, str], float]:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ScoreFileError(f"not valid UTF-8: {e}", path=path) from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ScoreFileError("missing header row", path=path)
    header = tuple(lines[0].rstrip("\r").split("\t"))
    if header != SCORE_COLUMNS:
        raise ScoreFileError(
            f"bad header: expected {list(SCORE_COLUMNS)}, got {list(header)}", path=path, line=1
        )
    scores: dict[tuple[str, str], float] = {}
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        row = line.rstrip("\r").split("\t")
        if len(row) != 3:
            raise ScoreFileError(f"expected 3 columns, got {len(row)}", path=path, line=lineno)
        key = (row[0], row[1])
        try:
            value = _parse_llr(row[2])
        except ValueError as e:
            raise ScoreFileError(f"{e} at line {lineno}", path=path, line=lineno) from None
        if key in scores:
            raise ScoreFileError(f"duplicate trial ({row[0]}, {row[1]})", path=path, line=lineno)
        scores[key] = value
    if not scores:
        raise ScoreFileError("no score rows", path=path)
    return scores


def validate(
    raw: dict[tuple[str, str], float],
    trials: TrialSetManifest | Iterable[tuple[str, str]],
    team_id: str = "",
    received_at: datetime | None = None,
) -> Submission | ValidationReport:
    """Accept a raw score mapping iff its key set equals the trial list's.

    `trials` may be a manifest or a plain (modelid, segmentid) iterable; only
    trial identity is used, so validation works from the blind list alone.
    """
    if isinstance(trials, TrialSetManifest):
        wanted = set(trials.pairs())
    else:
        wanted = set(trials)
    have = raw.keys()
    missing = sorted(wanted - have)
    extra = sorted(have - wanted)
    if missing or extra:
        return ValidationReport(
            missing=missing[:MAX_REPORTED],
            extra=extra[:MAX_REPORTED],
            n_missing=len(missing),
            n_extra=len(extra),
        )
    return Submission(
        team_id=team_id,
        scores=dict(raw),
        received_at=received_at or datetime.now(timezone.utc),
    )


def save_scores(scores: dict[tuple[str, str], float], path: str) -> None:
    """Write a score mapping in the canonical file form (repr floats, LF)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(SCORE_COLUMNS) + "\n")
        for (m, s), v in scores.items():
            f.write(f"{m}\t{s}\t{float(v)!r}\n")
