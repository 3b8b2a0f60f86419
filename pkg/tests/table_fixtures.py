"""Deterministic full-scale trial-set fixtures.

Builds answer keys whose per-subset target/nontarget tallies and the
gender / enrollment-count marginals match the published challenge layout
exactly, with every trial-set rule intact (distinct pairs, no cross-gender,
single language per source, 3-segment models on one phone). Speaker and
model counts also match; test-segment counts are whatever pair capacity
requires, since the four other constraints pin everything else down.

No randomness: every id, phone, and duration is a deterministic function
of its index.
"""

from __future__ import annotations

from dataclasses import dataclass

from ctseval.trialset import EnrollmentModel, Trial

# (source, subset) -> speakers (m, f), 1-seg models, 3-seg models,
#                     gender marginals {g: (tgt, non)}, enroll marginals {n: (tgt, non)}
LAYOUT: dict[tuple[str, str], dict] = {
    ("CMN2", "progress"): {
        "speakers": (25, 58),
        "models": (141, 29),
        "gender": {"male": (501, 40552), "female": (1303, 214626)},
        "enroll": {1: (1461, 213768), 3: (343, 41410)},
    },
    ("CMN2", "test"): {
        "speakers": (61, 137),
        "models": (308, 55),
        "gender": {"male": (898, 68421), "female": (3225, 511835)},
        "enroll": {1: (3375, 490361), 3: (748, 89895)},
    },
    ("MLS", "progress"): {
        "speakers": (22, 25),
        "models": (141, 47),
        "gender": {"male": (8668, 52300), "female": (9324, 89284)},
        "enroll": {1: (13494, 106188), 3: (4498, 35396)},
    },
    ("MLS", "test"): {
        "speakers": (48, 81),
        "models": (387, 129),
        "gender": {"male": (18904, 119008), "female": (34180, 232904)},
        "enroll": {1: (39813, 263934), 3: (13271, 87978)},
    },
}

TOTALS = {  # (source, subset) -> (targets, nontargets); row sums of the layout
    key: (
        sum(v[0] for v in spec["gender"].values()),
        sum(v[1] for v in spec["gender"].values()),
    )
    for key, spec in LAYOUT.items()
}

LANGUAGE = {"CMN2": "ara-aeb", "MLS": "zho-cmn"}


def _cross_tab(gender: dict, enroll: dict, which: int) -> dict[tuple[str, int], int]:
    """2x2 cell counts with exact marginals (rounded male/1-segment pivot)."""
    t_m = gender["male"][which]
    t_f = gender["female"][which]
    t_1 = enroll[1][which]
    t_3 = enroll[3][which]
    total = t_m + t_f
    pivot = round(t_m * t_1 / total)
    pivot = min(max(pivot, max(0, t_m + t_1 - total)), min(t_m, t_1))
    cells = {
        ("male", 1): pivot,
        ("male", 3): t_m - pivot,
        ("female", 1): t_1 - pivot,
        ("female", 3): t_3 - (t_m - pivot),
    }
    assert all(v >= 0 for v in cells.values())
    assert cells[("female", 1)] + cells[("female", 3)] == t_f
    return cells


@dataclass
class _FixtureSpeaker:
    speaker_id: str
    gender: str
    phones: tuple[str, str]
    segments: list[tuple[str, str, float]]  # (segment_id, phone, duration)


def build_subset(source: str, subset: str) -> tuple[list[Trial], dict[str, EnrollmentModel]]:
    spec = LAYOUT[(source, subset)]
    tgt_cells = _cross_tab(spec["gender"], spec["enroll"], 0)
    non_cells = _cross_tab(spec["gender"], spec["enroll"], 1)
    n1_total, n3_total = spec["models"]
    language = LANGUAGE[source]
    tag = f"{source.lower()}-{subset[:4]}"

    # gender split of models, proportional to nontarget load
    non_m = spec["gender"]["male"][1]
    non_f = spec["gender"]["female"][1]
    m1 = min(max(round(n1_total * non_m / (non_m + non_f)), 1), n1_total - 1)
    m3 = min(max(round(n3_total * non_m / (non_m + non_f)), 1), n3_total - 1)
    models_per_cell = {
        ("male", 1): m1,
        ("male", 3): m3,
        ("female", 1): n1_total - m1,
        ("female", 3): n3_total - m3,
    }

    trials: list[Trial] = []
    models: dict[str, EnrollmentModel] = {}

    for g_i, g in enumerate(("male", "female")):
        n_spk = spec["speakers"][g_i]
        cells = [(g, 1), (g, 3)]
        n_models = {c: models_per_cell[c] for c in cells}
        # per-model ceilings drive how many segments each speaker must own
        max_tgt = max(-(-tgt_cells[c] // n_models[c]) for c in cells)
        req_pool = max(-(-non_cells[c] // n_models[c]) for c in cells)
        total_models = sum(n_models.values())
        total_targets = sum(tgt_cells[c] for c in cells)
        n_seg = max(req_pool + max_tgt + 4, -(-total_targets * n_spk // total_models) + n_spk)
        for _ in range(20):  # fixed point: ownership raises the pool requirement
            own_max = -(-n_seg // n_spk)
            need = max(req_pool + own_max + 4, n_spk * max_tgt)
            if need <= n_seg:
                break
            n_seg = need

        speakers = [
            _FixtureSpeaker(
                speaker_id=f"{tag}-{g[0]}spk{i:04d}",
                gender=g,
                phones=(f"{tag}-{g[0]}{i:04d}-pa", f"{tag}-{g[0]}{i:04d}-pb"),
                segments=[],
            )
            for i in range(n_spk)
        ]
        for j in range(n_seg):
            spk = speakers[j % n_spk]
            phone = spk.phones[(j // n_spk) % 2]
            duration = 10.0 + (j * 17 % 500) / 10.0
            spk.segments.append((f"{tag}-{g[0]}seg{j:06d}", phone, duration))
        pool = [(s, seg) for s in speakers for seg in s.segments]

        for n_en in (1, 3):
            cell = (g, n_en)
            cell_models = []
            for k in range(n_models[cell]):
                spk = speakers[k % n_spk]
                mid = f"{tag}-{g[0]}m{n_en}-{k:04d}"
                model = EnrollmentModel(
                    model_id=mid,
                    speaker_id=spk.speaker_id,
                    gender=g,
                    segments=tuple(f"{mid}-e{j}" for j in range(n_en)),
                    phone_ids=(spk.phones[0],) * n_en,
                )
                models[mid] = model
                cell_models.append((model, spk))

            def emit(model: EnrollmentModel, spk: _FixtureSpeaker,
                     seg: tuple[str, str, float], is_target: bool) -> None:
                seg_id, phone, duration = seg
                if source == "MLS":
                    match = "unknown"
                else:
                    match = "same" if phone == model.phone_id else "different"
                trials.append(
                    Trial(
                        model_id=model.model_id,
                        segment_id=seg_id,
                        is_target=is_target,
                        source=source,
                        subset=subset,
                        gender=g,
                        n_enroll=n_en,
                        phone_match=match,
                        language=language,
                        duration_s=duration,
                    )
                )

            # targets: cycle cell models over their own speaker's segments
            cursors = [0] * len(cell_models)
            assigned = 0
            while assigned < tgt_cells[cell]:
                progressed = False
                for m_i, (model, spk) in enumerate(cell_models):
                    if assigned >= tgt_cells[cell]:
                        break
                    if cursors[m_i] < len(spk.segments):
                        emit(model, spk, spk.segments[cursors[m_i]], True)
                        cursors[m_i] += 1
                        assigned += 1
                        progressed = True
                if not progressed:
                    raise RuntimeError(f"target assignment ran dry in {source}/{subset} {cell}")

            # nontargets: cycle models over the gender pool, skipping own segments
            cursors = [0] * len(cell_models)
            starts = [(m_i * 7919) % len(pool) for m_i in range(len(cell_models))]
            assigned = 0
            while assigned < non_cells[cell]:
                progressed = False
                for m_i, (model, spk) in enumerate(cell_models):
                    if assigned >= non_cells[cell]:
                        break
                    while cursors[m_i] < len(pool):
                        owner, seg = pool[(starts[m_i] + cursors[m_i]) % len(pool)]
                        cursors[m_i] += 1
                        if owner is spk:
                            continue
                        emit(model, spk, seg, False)
                        assigned += 1
                        progressed = True
                        break
                if not progressed:
                    raise RuntimeError(f"nontarget assignment ran dry in {source}/{subset} {cell}")

    return trials, models


def build_key_text(keys: list[tuple[str, str]] | None = None) -> tuple[str, dict[str, EnrollmentModel]]:
    """Canonical key.tsv text (plus models) covering the requested subsets."""
    from ctseval.trialset import KEY_COLUMNS

    keys = keys or sorted(LAYOUT)
    lines = ["\t".join(KEY_COLUMNS)]
    all_models: dict[str, EnrollmentModel] = {}
    for source, subset in keys:
        trials, models = build_subset(source, subset)
        all_models.update(models)
        for t in trials:
            lines.append(
                "\t".join(
                    (
                        t.model_id,
                        t.segment_id,
                        "target" if t.is_target else "nontarget",
                        t.source,
                        t.subset,
                        t.gender,
                        str(t.n_enroll),
                        t.phone_match,
                        t.language,
                        repr(t.duration_s),
                    )
                )
            )
    return "\n".join(lines) + "\n", all_models
