"""Trial lists, answer keys, enrollment-model definitions, and partition structure.

All files are tab-separated UTF-8 with LF line endings and a fixed header.
A loaded manifest is immutable and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

SOURCES = ("CMN2", "MLS")
SUBSETS = ("progress", "test")
GENDERS = ("male", "female")
PHONE_MATCHES = ("same", "different", "unknown")
ENROLL_COUNTS = (1, 3)

DURATION_MIN = 10.0
DURATION_MAX = 60.0

KEY_COLUMNS = (
    "modelid",
    "segmentid",
    "targettype",
    "source",
    "subset",
    "gender",
    "n_enroll",
    "phone_match",
    "language",
    "duration_s",
)
TRIAL_COLUMNS = ("modelid", "segmentid")
MODEL_COLUMNS = ("modelid", "speakerid", "gender", "phoneid", "segments")

# Language inventory used for the "unknown language" warning. CMN2 is Tunisian
# Arabic; the MLS codes cover its 20 telephone languages.
KNOWN_LANGUAGES = frozenset(
    {
        "ara-aeb",
        "ara-arz", "ara-acm", "ara-apc", "ara-ary", "ara-arb",
        "zho-cmn", "zho-nan", "zho-wuu", "zho-yue",
        "eng-gbr", "eng-usg", "eng-sas",
        "qsl-pol", "qsl-rus",
        "por-brz", "spa-car", "spa-eur", "spa-lac",
        "fre-hat", "fre-waf",
    }
)

_SOURCE_CODE = {s: i for i, s in enumerate(SOURCES)}
_SUBSET_CODE = {s: i for i, s in enumerate(SUBSETS)}
_GENDER_CODE = {g: i for i, g in enumerate(GENDERS)}
_PHONE_CODE = {p: i for i, p in enumerate(PHONE_MATCHES)}
_ENROLL_CODE = {"1": 0, "3": 1}


class TrialFileError(ValueError):
    """Malformed trial/key/model file. Carries the offending line number (1-based)."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)


@dataclass(frozen=True)
class ConditionCell:
    """One scoring partition: data source x speaker gender x enrollment count."""

    source: str
    gender: str
    n_enroll: int

    def __str__(self) -> str:
        return f"{self.source}/{self.gender}/{self.n_enroll}seg"


ALL_CELLS = tuple(
    ConditionCell(src, g, n) for src in SOURCES for g in GENDERS for n in ENROLL_COUNTS
)
CELLS_PER_SOURCE = {src: tuple(c for c in ALL_CELLS if c.source == src) for src in SOURCES}


@dataclass(frozen=True)
class Trial:
    model_id: str
    segment_id: str
    is_target: bool
    source: str
    subset: str
    gender: str
    n_enroll: int
    phone_match: str
    language: str
    duration_s: float

    @property
    def cell(self) -> ConditionCell:
        return ConditionCell(self.source, self.gender, self.n_enroll)


@dataclass(frozen=True)
class EnrollmentModel:
    model_id: str
    speaker_id: str
    gender: str
    segments: tuple[str, ...]
    phone_ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.segments) not in ENROLL_COUNTS:
            raise ValueError(
                f"model {self.model_id}: {len(self.segments)} enrollment segments, expected 1 or 3"
            )
        if len(self.phone_ids) != len(self.segments):
            raise ValueError(f"model {self.model_id}: phone ids do not align with segments")

    @property
    def n_enroll(self) -> int:
        return len(self.segments)

    @property
    def phone_id(self) -> str:
        return self.phone_ids[0]


def _format_duration(value: float) -> str:
    return repr(float(value))


class TrialSetManifest:
    """Columnar, immutable view of an answer key plus optional enrollment models.

    Row order is preserved from the source file. String columns are stored as
    unique tables plus integer codes so that million-trial keys stay cheap to
    partition and score.
    """

    def __init__(
        self,
        model_table: list[str],
        segment_table: list[str],
        language_table: list[str],
        model_code: np.ndarray,
        segment_code: np.ndarray,
        is_target: np.ndarray,
        source_code: np.ndarray,
        subset_code: np.ndarray,
        gender_code: np.ndarray,
        enroll_code: np.ndarray,
        phone_code: np.ndarray,
        language_code: np.ndarray,
        duration_s: np.ndarray,
        models: dict[str, EnrollmentModel] | None = None,
    ):
        self.model_table = model_table
        self.segment_table = segment_table
        self.language_table = language_table
        self.model_code = model_code
        self.segment_code = segment_code
        self.is_target = is_target
        self.source_code = source_code
        self.subset_code = subset_code
        self.gender_code = gender_code
        self.enroll_code = enroll_code
        self.phone_code = phone_code
        self.language_code = language_code
        self.duration_s = duration_s
        self.models = models or {}
        self._pair_index: dict[tuple[str, str], int] | None = None
        # cell code per trial: source*4 + gender*2 + enroll, in ALL_CELLS order
        self.cell_code = (
            source_code.astype(np.int8) * 4 + gender_code.astype(np.int8) * 2 + enroll_code
        ).astype(np.int8)
        self.counts = self._tally()

    def __len__(self) -> int:
        return int(self.is_target.shape[0])

    def __getitem__(self, i: int) -> Trial:
        return Trial(
            model_id=self.model_table[self.model_code[i]],
            segment_id=self.segment_table[self.segment_code[i]],
            is_target=bool(self.is_target[i]),
            source=SOURCES[self.source_code[i]],
            subset=SUBSETS[self.subset_code[i]],
            gender=GENDERS[self.gender_code[i]],
            n_enroll=ENROLL_COUNTS[self.enroll_code[i]],
            phone_match=PHONE_MATCHES[self.phone_code[i]],
            language=self.language_table[self.language_code[i]],
            duration_s=float(self.duration_s[i]),
        )

    def __iter__(self) -> Iterator[Trial]:
        for i in range(len(self)):
            yield self[i]

    @property
    def trials(self) -> "TrialSetManifest":
        return self

    def pairs(self) -> Iterator[tuple[str, str]]:
        mt, st = self.model_table, self.segment_table
        for mc, sc in zip(self.model_code, self.segment_code):
            yield (mt[mc], st[sc])

    def pair_index(self) -> dict[tuple[str, str], int]:
        """(modelid, segmentid) -> row, built lazily (used by score alignment)."""
        if self._pair_index is None:
            self._pair_index = {pair: i for i, pair in enumerate(self.pairs())}
        return self._pair_index

    def _tally(self) -> dict[ConditionCell, tuple[int, int]]:
        tgt = np.bincount(self.cell_code[self.is_target], minlength=8)
        non = np.bincount(self.cell_code[~self.is_target], minlength=8)
        return {cell: (int(tgt[i]), int(non[i])) for i, cell in enumerate(ALL_CELLS)}

    def select(self, mask: np.ndarray) -> "TrialSetManifest":
        """Row-filtered view sharing the string tables (order preserved)."""
        return TrialSetManifest(
            self.model_table,
            self.segment_table,
            self.language_table,
            self.model_code[mask],
            self.segment_code[mask],
            self.is_target[mask],
            self.source_code[mask],
            self.subset_code[mask],
            self.gender_code[mask],
            self.enroll_code[mask],
            self.phone_code[mask],
            self.language_code[mask],
            self.duration_s[mask],
            models=self.models,
        )

    def filter(self, subset: str | None = None, source: str | None = None) -> "TrialSetManifest":
        mask = np.ones(len(self), dtype=bool)
        if subset is not None:
            if subset not in SUBSETS:
                raise ValueError(f"unknown subset {subset!r}")
            mask &= self.subset_code == _SUBSET_CODE[subset]
        if source is not None:
            if source not in SOURCES:
                raise ValueError(f"unknown source {source!r}")
            mask &= self.source_code == _SOURCE_CODE[source]
        return self.select(mask)

    def with_models(self, models: dict[str, EnrollmentModel]) -> "TrialSetManifest":
        out = self.select(np.ones(len(self), dtype=bool))
        out.models = dict(models)
        return out


def _read_lines(path: str) -> list[str]:
    with open(path, "rb") as f:
        data = f.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise TrialFileError(f"not valid UTF-8: {e}", path=path) from None
    if "\r" in text:
        raise TrialFileError("CR found; files must use LF line endings", path=path)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _check_header(fields: Sequence[str], expected: Sequence[str], path: str) -> list[int]:
    """Validate a header row; returns the column permutation mapping expected -> actual."""
    if sorted(fields) != sorted(expected):
        raise TrialFileError(
            f"bad header: expected columns {list(expected)}, got {list(fields)}", path=path, line=1
        )
    return [fields.index(c) for c in expected]


def load_trials(path: str, models_path: str | None = None) -> TrialSetManifest:
    """Load an answer key (key.tsv) into a manifest.

    Raises TrialFileError with a 1-based line number on any malformed row:
    wrong column count, unknown enum token, out-of-range duration, or a
    duplicate (modelid, segmentid) pair.
    """
    lines = _read_lines(path)
    if not lines:
        raise TrialFileError("missing header row", path=path)
    perm = _check_header(lines[0].split("\t"), KEY_COLUMNS, path)
    if len(lines) == 1:
        raise TrialFileError("empty trial set (header only)", path=path)

    n = len(lines) - 1
    model_table: list[str] = []
    segment_table: list[str] = []
    language_table: list[str] = []
    model_lookup: dict[str, int] = {}
    segment_lookup: dict[str, int] = {}
    language_lookup: dict[str, int] = {}
    model_code = np.empty(n, dtype=np.int32)
    segment_code = np.empty(n, dtype=np.int32)
    is_target = np.empty(n, dtype=bool)
    source_code = np.empty(n, dtype=np.int8)
    subset_code = np.empty(n, dtype=np.int8)
    gender_code = np.empty(n, dtype=np.int8)
    enroll_code = np.empty(n, dtype=np.int8)
    phone_code = np.empty(n, dtype=np.int8)
    language_code = np.empty(n, dtype=np.int16)
    duration_s = np.empty(n, dtype=np.float64)
    seen: set[tuple[int, int]] = set()

    ncols = len(KEY_COLUMNS)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        raw = line.split("\t")
        if len(raw) != ncols:
            raise TrialFileError(
                f"expected {ncols} columns, got {len(raw)}", path=path, line=lineno
            )
        row = [raw[j] for j in perm]
        mid, sid, tgt, src, sub, gen, nen, pm, lang, dur = row
        if not mid or not sid or " " in mid or " " in sid:
            raise TrialFileError("empty or whitespace-bearing id token", path=path, line=lineno)
        try:
            is_target[i] = {"target": True, "nontarget": False}[tgt]
            source_code[i] = _SOURCE_CODE[src]
            subset_code[i] = _SUBSET_CODE[sub]
            gender_code[i] = _GENDER_CODE[gen]
            enroll_code[i] = _ENROLL_CODE[nen]
            phone_code[i] = _PHONE_CODE[pm]
        except KeyError as e:
            raise TrialFileError(f"unknown enum token {e.args[0]!r}", path=path, line=lineno) from None
        try:
            d = float(dur)
        except ValueError:
            raise TrialFileError(f"bad duration {dur!r}", path=path, line=lineno) from None
        if not (DURATION_MIN <= d <= DURATION_MAX):
            raise TrialFileError(
                f"duration {d} outside [{DURATION_MIN:g}, {DURATION_MAX:g}]", path=path, line=lineno
            )
        duration_s[i] = d

        mc = model_lookup.get(mid)
        if mc is None:
            mc = model_lookup[mid] = len(model_table)
            model_table.append(mid)
        sc = segment_lookup.get(sid)
        if sc is None:
            sc = segment_lookup[sid] = len(segment_table)
            segment_table.append(sid)
        lc = language_lookup.get(lang)
        if lc is None:
            lc = language_lookup[lang] = len(language_table)
            language_table.append(lang)
        pair = (mc, sc)
        if pair in seen:
            raise TrialFileError(f"duplicate trial ({mid}, {sid})", path=path, line=lineno)
        seen.add(pair)
        model_code[i] = mc
        segment_code[i] = sc
        language_code[i] = lc

    models = load_models(models_path) if models_path else None
    return TrialSetManifest(
        model_table, segment_table, language_table,
        model_code, segment_code, is_target,
        source_code, subset_code, gender_code, enroll_code,
        phone_code, language_code, duration_s,
        models=models,
    )


def save_trials(manifest: TrialSetManifest, path: str) -> None:
    """Write the canonical key.tsv: fixed column order, LF, trailing newline."""
    mt, st, lt = manifest.model_table, manifest.segment_table, manifest.language_table
    out = ["\t".join(KEY_COLUMNS)]
    for i in range(len(manifest)):
        out.append(
            "\t".join(
                (
                    mt[manifest.model_code[i]],
                    st[manifest.segment_code[i]],
                    "target" if manifest.is_target[i] else "nontarget",
                    SOURCES[manifest.source_code[i]],
                    SUBSETS[manifest.subset_code[i]],
                    GENDERS[manifest.gender_code[i]],
                    str(ENROLL_COUNTS[manifest.enroll_code[i]]),
                    PHONE_MATCHES[manifest.phone_code[i]],
                    lt[manifest.language_code[i]],
                    _format_duration(manifest.duration_s[i]),
                )
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(out) + "\n")


def save_blind_trials(manifest: TrialSetManifest, path: str) -> None:
    """Write the participant-visible trial list (modelid, segmentid only)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(TRIAL_COLUMNS) + "\n")
        for m, s in manifest.pairs():
            f.write(f"{m}\t{s}\n")


def load_blind_trials(path: str) -> list[tuple[str, str]]:
    lines = _read_lines(path)
    if not lines:
        raise TrialFileError("missing header row", path=path)
    perm = _check_header(lines[0].split("\t"), TRIAL_COLUMNS, path)
    pairs = []
    for i, line in enumerate(lines[1:]):
        raw = line.split("\t")
        if len(raw) != 2:
            raise TrialFileError(f"expected 2 columns, got {len(raw)}", path=path, line=i + 2)
        pairs.append((raw[perm[0]], raw[perm[1]]))
    if not pairs:
        raise TrialFileError("empty trial set (header only)", path=path)
    return pairs


def load_models(path: str) -> dict[str, EnrollmentModel]:
    lines = _read_lines(path)
    if not lines:
        raise TrialFileError("missing header row", path=path)
    perm = _check_header(lines[0].split("\t"), MODEL_COLUMNS, path)
    models: dict[str, EnrollmentModel] = {}
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        raw = line.split("\t")
        if len(raw) != len(MODEL_COLUMNS):
            raise TrialFileError(
                f"expected {len(MODEL_COLUMNS)} columns, got {len(raw)}", path=path, line=lineno
            )
        mid, spk, gen, phone, segs = (raw[j] for j in perm)
        if mid in models:
            raise TrialFileError(f"duplicate model {mid}", path=path, line=lineno)
        if gen not in GENDERS:
            raise TrialFileError(f"unknown enum token {gen!r}", path=path, line=lineno)
        segments = tuple(s for s in segs.split(",") if s)
        if len(segments) not in ENROLL_COUNTS:
            raise TrialFileError(
                f"model {mid} has {len(segments)} segments, expected 1 or 3", path=path, line=lineno
            )
        phones = tuple(p for p in phone.split(",") if p)
        if len(phones) == 1:
            phones = phones * len(segments)
        if len(phones) != len(segments):
            raise TrialFileError(
                f"model {mid}: phone list does not align with segments", path=path, line=lineno
            )
        models[mid] = EnrollmentModel(mid, spk, gen, segments, phones)
    return models


def save_models(models: Iterable[EnrollmentModel], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(MODEL_COLUMNS) + "\n")
        for m in models:
            phones = (
                m.phone_ids[0] if len(set(m.phone_ids)) == 1 else ",".join(m.phone_ids)
            )
            f.write(f"{m.model_id}\t{m.speaker_id}\t{m.gender}\t{phones}\t{','.join(m.segments)}\n")


def build_manifest(
    trials: Sequence[Trial], models: dict[str, EnrollmentModel] | None = None
) -> TrialSetManifest:
    """Construct a manifest from in-memory trials (generator/test path).

    Applies the same token validation as the file loader but no duplicate
    or duration screening; callers own the rows they build.
    """
    n = len(trials)
    model_table: list[str] = []
    segment_table: list[str] = []
    language_table: list[str] = []
    model_lookup: dict[str, int] = {}
    segment_lookup: dict[str, int] = {}
    language_lookup: dict[str, int] = {}
    model_code = np.empty(n, dtype=np.int32)
    segment_code = np.empty(n, dtype=np.int32)
    is_target = np.empty(n, dtype=bool)
    source_code = np.empty(n, dtype=np.int8)
    subset_code = np.empty(n, dtype=np.int8)
    gender_code = np.empty(n, dtype=np.int8)
    enroll_code = np.empty(n, dtype=np.int8)
    phone_code = np.empty(n, dtype=np.int8)
    language_code = np.empty(n, dtype=np.int16)
    duration_s = np.empty(n, dtype=np.float64)
    for i, t in enumerate(trials):
        is_target[i] = t.is_target
        source_code[i] = _SOURCE_CODE[t.source]
        subset_code[i] = _SUBSET_CODE[t.subset]
        gender_code[i] = _GENDER_CODE[t.gender]
        enroll_code[i] = _ENROLL_CODE[str(t.n_enroll)]
        phone_code[i] = _PHONE_CODE[t.phone_match]
        duration_s[i] = t.duration_s
        mc = model_lookup.setdefault(t.model_id, len(model_table))
        if mc == len(model_table):
            model_table.append(t.model_id)
        sc = segment_lookup.setdefault(t.segment_id, len(segment_table))
        if sc == len(segment_table):
            segment_table.append(t.segment_id)
        lc = language_lookup.setdefault(t.language, len(language_table))
        if lc == len(language_table):
            language_table.append(t.language)
        model_code[i] = mc
        segment_code[i] = sc
        language_code[i] = lc
    return TrialSetManifest(
        model_table, segment_table, language_table,
        model_code, segment_code, is_target,
        source_code, subset_code, gender_code, enroll_code,
        phone_code, language_code, duration_s,
        models=models,
    )


def partition(manifest: TrialSetManifest) -> dict[ConditionCell, TrialSetManifest]:
    """Split a manifest into its 8 condition cells (empty cells included)."""
    return {
        cell: manifest.select(manifest.cell_code == i) for i, cell in enumerate(ALL_CELLS)
    }


def marginal_counts(
    manifest: TrialSetManifest, by: str
) -> dict[tuple[str, str | int], tuple[int, int]]:
    """Target/nontarget tallies per (source, value-of-`by`); by is 'gender' or 'n_enroll'."""
    if by == "gender":
        codes, values = manifest.gender_code, GENDERS
    elif by == "n_enroll":
        codes, values = manifest.enroll_code, ENROLL_COUNTS
    else:
        raise ValueError(f"unsupported marginal {by!r}")
    out: dict[tuple[str, str | int], tuple[int, int]] = {}
    for si, src in enumerate(SOURCES):
        src_mask = manifest.source_code == si
        for vi, val in enumerate(values):
            mask = src_mask & (codes == vi)
            n_tgt = int(np.count_nonzero(mask & manifest.is_target))
            n_non = int(np.count_nonzero(mask & ~manifest.is_target))
            out[(src, val)] = (n_tgt, n_non)
    return out


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    message: str
    severity: str = "error"  # "error" | "warning"


@dataclass
class ConditionReport:
    violations: list[Violation]
    warnings: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def empty(self) -> bool:
        return not self.violations and not self.warnings


def check_conditions(manifest: TrialSetManifest) -> ConditionReport:
    """Audit a manifest against the test-condition rules.

    Errors: cross-gender trials, cross-lingual trials, enrollment-count or
    gender mismatches against the model table, 3-segment models spanning
    phone numbers, and phone_match=unknown outside MLS. Unknown language
    codes and non-unknown MLS phone_match are reported as warnings.
    """
    violations: list[Violation] = []
    warnings: list[Violation] = []

    def spanning_ids(codes: np.ndarray, attr_codes: np.ndarray) -> np.ndarray:
        """Ids whose trials carry more than one distinct attribute value."""
        pairs = np.unique(
            np.stack([codes.astype(np.int64), attr_codes.astype(np.int64)]), axis=1
        )
        ids, n_values = np.unique(pairs[0], return_counts=True)
        return ids[n_values > 1]

    # per-model and per-segment consistency over the trial rows: one speaker
    # (hence one gender, one language) per model and per test segment
    for name, codes, table in (
        ("model", manifest.model_code, manifest.model_table),
        ("segment", manifest.segment_code, manifest.segment_table),
    ):
        for rule, attr, attr_codes in (
            ("cross-gender", "gender", manifest.gender_code),
            ("cross-lingual", "language", manifest.language_code),
        ):
            for c in spanning_ids(codes, attr_codes):
                violations.append(
                    Violation(
                        rule,
                        f"{name} {table[int(c)]}",
                        f"{name} {table[int(c)]} appears with multiple {attr} values",
                    )
                )

    # phone_match vs source
    bad = (manifest.phone_code == _PHONE_CODE["unknown"]) & (
        manifest.source_code == _SOURCE_CODE["CMN2"]
    )
    for i in np.nonzero(bad)[0]:
        t = manifest[int(i)]
        violations.append(
            Violation(
                "phone-match-unknown-source",
                f"trial ({t.model_id}, {t.segment_id})",
                "phone_match=unknown is only valid for MLS trials",
            )
        )
    known_mls = (manifest.phone_code != _PHONE_CODE["unknown"]) & (
        manifest.source_code == _SOURCE_CODE["MLS"]
    )
    for i in np.nonzero(known_mls)[0]:
        t = manifest[int(i)]
        warnings.append(
            Violation(
                "mls-phone-match-known",
                f"trial ({t.model_id}, {t.segment_id})",
                "phone information is not expected for MLS trials",
                severity="warning",
            )
        )

    # language inventory
    for li, lang in enumerate(manifest.language_table):
        if lang not in KNOWN_LANGUAGES and np.any(manifest.language_code == li):
            warnings.append(
                Violation(
                    "unknown-language",
                    f"language {lang}",
                    f"language code {lang!r} is not in the known inventory",
                    severity="warning",
                )
            )

    # checks against the enrollment-model table, when present
    if manifest.models:
        seen_models: set[int] = set()
        for i in range(len(manifest)):
            mc = int(manifest.model_code[i])
            if mc in seen_models:
                continue
            seen_models.add(mc)
            mid = manifest.model_table[mc]
            model = manifest.models.get(mid)
            t = manifest[i]
            if model is None:
                violations.append(
                    Violation("missing-model", f"model {mid}", "model not in the model table")
                )
                continue
            if model.gender != t.gender:
                violations.append(
                    Violation(
                        "cross-gender",
                        f"trial ({t.model_id}, {t.segment_id})",
                        f"trial gender {t.gender} != model gender {model.gender}",
                    )
                )
            if model.n_enroll != t.n_enroll:
                violations.append(
                    Violation(
                        "n-enroll-mismatch",
                        f"model {mid}",
                        f"trial n_enroll {t.n_enroll} != model segment count {model.n_enroll}",
                    )
                )
        for model in manifest.models.values():
            if model.n_enroll == 3 and len(set(model.phone_ids)) > 1:
                violations.append(
                    Violation(
                        "enrollment-phone-mismatch",
                        f"model {model.model_id}",
                        "3-segment enrollment spans multiple phone numbers",
                    )
                )

    return ConditionReport(violations, warnings)
