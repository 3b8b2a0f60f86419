"""Deterministic synthetic populations, trial sets, and calibrated oracle scores.

Speaker means are drawn from N(0, B) and segment embeddings from
N(mean, W). Trials are assembled to satisfy every trial-set rule: no
cross-gender or cross-lingual pairs, 1- or 3-segment enrollment from one
phone number, phone_match known only for CMN2. The oracle LLR for each
trial is the exact generative log-likelihood ratio, so oracle scores are
calibrated by construction.

Entity counts default to the full-scale CMN2/MLS challenge layout; scaled
variants shrink trial counts linearly and entity counts by the square root
so that pair density stays constant.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .backend import EmbeddingSet, save_embeddings
from .submission import save_scores
from .trialset import (
    ENROLL_COUNTS,
    GENDERS,
    SOURCES,
    SUBSETS,
    EnrollmentModel,
    Trial,
    TrialSetManifest,
    build_manifest,
    save_blind_trials,
    save_models,
    save_trials,
)


class InfeasibleSpecError(ValueError):
    pass


# Full-scale layout per (source, subset): speakers (m, f), 1-segment models,
# 3-segment models, test segments, target trials, nontarget trials.
FULL_SCALE: dict[tuple[str, str], tuple] = {
    ("CMN2", "progress"): ((25, 58), 141, 29, 2654, 1804, 255178),
    ("CMN2", "test"): ((61, 137), 308, 55, 2654, 4123, 580256),
    ("MLS", "progress"): ((22, 25), 141, 47, 12249, 17992, 141584),
    ("MLS", "test"): ((48, 81), 387, 129, 17769, 53084, 351912),
}

SOURCE_LANGUAGES = {
    "CMN2": ("ara-aeb",),
    "MLS": ("zho-cmn", "eng-usg", "spa-car", "qsl-rus"),
}


@dataclass(frozen=True)
class SubsetPlan:
    n_speakers: tuple[int, int]  # (male, female)
    n_models_1seg: int
    n_models_3seg: int
    n_test_segments: int
    n_targets: int
    n_nontargets: int
    languages: tuple[str, ...] = ("ara-aeb",)


@dataclass(frozen=True)
class PopulationSpec:
    plans: dict[tuple[str, str], SubsetPlan]
    dim: int = 16
    between: float | np.ndarray = 1.0
    within: float | np.ndarray = 1.0
    seed: int = 0

    @classmethod
    def scaled(
        cls,
        fraction: float = 0.01,
        sources: tuple[str, ...] = ("CMN2", "MLS"),
        subsets: tuple[str, ...] = ("progress", "test"),
        **kwargs,
    ) -> "PopulationSpec":
        """Layout at `fraction` of full trial scale.

        Entity counts shrink with the square root of the fraction (keeping
        pair density roughly constant) plus a margin that absorbs the
        same-speaker and same-language exclusions at small scales.
        """
        entity = 1.4 * np.sqrt(fraction)
        plans = {}
        for key, (spk, n1, n3, segs, tgt, non) in FULL_SCALE.items():
            src, sub = key
            if src not in sources or sub not in subsets:
                continue
            n_spk = (max(2, round(entity * spk[0])), max(2, round(entity * spk[1])))
            languages = SOURCE_LANGUAGES[src]
            languages = languages[: max(1, min(n_spk) // 2)]
            plans[key] = SubsetPlan(
                n_speakers=n_spk,
                n_models_1seg=max(2, round(entity * n1)),
                n_models_3seg=max(2, round(entity * n3)),
                n_test_segments=max(4, round(entity * segs)),
                n_targets=max(4, round(fraction * tgt)),
                n_nontargets=max(4, round(fraction * non)),
                languages=languages,
            )
        return cls(plans=plans, **kwargs)


def _as_cov(spec: float | np.ndarray, dim: int) -> np.ndarray:
    if np.isscalar(spec):
        return float(spec) * np.eye(dim)
    arr = np.asarray(spec, dtype=np.float64)
    if arr.ndim == 1:
        return np.diag(arr)
    return arr


def _largest_remainder(total: int, shares: np.ndarray, minimum: int = 0) -> np.ndarray:
    """Integer allocation of `total` proportional to shares, exact sum, floor `minimum`."""
    shares = np.asarray(shares, dtype=np.float64)
    if shares.sum() <= 0:
        raise InfeasibleSpecError("allocation shares sum to zero")
    if total < minimum * len(shares):
        raise InfeasibleSpecError(
            f"cannot allocate {total} items across {len(shares)} bins with floor {minimum}"
        )
    raw = total * shares / shares.sum()
    alloc = np.maximum(np.floor(raw).astype(np.int64), minimum)
    while alloc.sum() > total:
        candidates = np.nonzero(alloc > minimum)[0]
        j = candidates[int(np.argmax(alloc[candidates]))]
        alloc[j] -= 1
    rem = raw - np.floor(raw)
    order = np.argsort(-rem, kind="stable")
    i = 0
    while alloc.sum() < total:
        alloc[order[i % len(alloc)]] += 1
        i += 1
    return alloc


def _allocate_capped(total: int, capacities: np.ndarray, minimum: int = 1) -> np.ndarray:
    """Proportional allocation that never exceeds per-bin capacity."""
    caps = np.asarray(capacities, dtype=np.int64)
    if np.any(caps < minimum):
        raise InfeasibleSpecError("a condition cell has no available trial pairs")
    if total > caps.sum():
        raise InfeasibleSpecError(
            f"requested {total} trials but only {caps.sum()} pairs are available"
        )
    alloc = _largest_remainder(total, caps.astype(float), minimum=minimum)
    while True:
        over = alloc - caps
        if not np.any(over > 0):
            return alloc
        j = int(np.argmax(over))
        slack = caps - alloc
        k = int(np.argmax(slack))
        move = min(int(over[j]), int(slack[k]))
        alloc[j] -= move
        alloc[k] += move


@dataclass
class _Speaker:
    speaker_id: str
    gender: str
    language: str
    phones: tuple[str, str]
    mean: np.ndarray


@dataclass
class _Segment:
    segment_id: str
    speaker: _Speaker
    phone: str
    duration: float
    vector: np.ndarray


@dataclass
class SynthResult:
    manifest: TrialSetManifest
    models: dict[str, EnrollmentModel]
    embeddings: EmbeddingSet
    oracle_llr: np.ndarray
    between: np.ndarray
    within: np.ndarray
    spec: PopulationSpec


def sample_population(
    n_speakers: int,
    segments_per_speaker: int,
    dim: int,
    between: float | np.ndarray,
    within: float | np.ndarray,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Plain labeled population (vectors, integer labels) for backend training."""
    rng = np.random.default_rng(seed)
    b = _as_cov(between, dim)
    w = _as_cov(within, dim)
    lb = np.linalg.cholesky(b)
    lw = np.linalg.cholesky(w)
    means = rng.standard_normal((n_speakers, dim)) @ lb.T
    x = np.repeat(means, segments_per_speaker, axis=0) + rng.standard_normal(
        (n_speakers * segments_per_speaker, dim)
    ) @ lw.T
    labels = np.repeat(np.arange(n_speakers), segments_per_speaker)
    return x, labels


def _log_gauss(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Row-wise ln N(x; mean, cov); mean may be a matrix of per-row means."""
    d = cov.shape[0]
    diff = x - mean
    cov_inv = np.linalg.inv(cov)
    _, logdet = np.linalg.slogdet(cov)
    quad = np.einsum("ij,jk,ik->i", diff, cov_inv, diff)
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + quad)


def oracle_llr(
    between: np.ndarray,
    within: np.ndarray,
    enroll_sums: np.ndarray,
    n_enroll: np.ndarray,
    test_vecs: np.ndarray,
) -> np.ndarray:
    """Exact generative LLR for trials under the zero-mean population model.

    enroll_sums[i] is the sum of trial i's enrollment-segment embeddings,
    n_enroll[i] how many segments went into it. The same-speaker hypothesis
    integrates the shared latent speaker analytically:

        LLR = ln N(t; y_post, W + S_post) - ln N(t; 0, B + W)

    with posterior N(y_post, S_post) of the speaker given the enrollment.
    """
    b_inv = np.linalg.inv(between)
    w_inv = np.linalg.inv(within)
    out = np.empty(test_vecs.shape[0], dtype=np.float64)
    denom = _log_gauss(test_vecs, np.zeros(between.shape[0]), between + within)
    for n in np.unique(n_enroll):
        idx = n_enroll == n
        lam = b_inv + float(n) * w_inv
        s_post = np.linalg.inv(lam)
        s_post = 0.5 * (s_post + s_post.T)
        y_post = enroll_sums[idx] @ w_inv @ s_post
        out[idx] = _log_gauss(test_vecs[idx], y_post, within + s_post) - denom[idx]
    return out


def generate(spec: PopulationSpec) -> SynthResult:
    """Build the full synthetic artifact: manifest, models, embeddings, oracle LLRs."""
    rng = np.random.default_rng(spec.seed)
    b = _as_cov(spec.between, spec.dim)
    w = _as_cov(spec.within, spec.dim)
    lb = np.linalg.cholesky(b)
    lw = np.linalg.cholesky(w)

    trials: list[Trial] = []
    oracle: list[np.ndarray] = []
    all_models: dict[str, EnrollmentModel] = {}
    emb_ids: list[str] = []
    emb_rows: list[np.ndarray] = []
    emb_speakers: list[str] = []

    for key in sorted(spec.plans):
        source, subset = key
        plan = spec.plans[key]
        tag = f"{source.lower()}-{subset[:4]}"

        # speakers with language round-robin inside each gender
        speakers: dict[str, list[_Speaker]] = {g: [] for g in GENDERS}
        for g_i, gender in enumerate(GENDERS):
            n_spk = plan.n_speakers[g_i]
            langs = plan.languages
            means = rng.standard_normal((n_spk, spec.dim)) @ lb.T
            for i in range(n_spk):
                sid = f"{tag}-{gender[0]}{i:04d}"
                speakers[gender].append(
                    _Speaker(
                        speaker_id=sid,
                        gender=gender,
                        language=langs[i % len(langs)],
                        phones=(f"{sid}-pa", f"{sid}-pb"),
                        mean=means[i],
                    )
                )

        # test segments: split across genders by speaker share, round-robin speakers
        seg_split = _largest_remainder(
            plan.n_test_segments, np.array(plan.n_speakers, dtype=float), minimum=2
        )
        segments: dict[str, list[_Segment]] = {g: [] for g in GENDERS}
        for g_i, gender in enumerate(GENDERS):
            n_seg = int(seg_split[g_i])
            spk_list = speakers[gender]
            phones = rng.random(n_seg) < 0.5
            durations = rng.uniform(10.0, 60.0, size=n_seg)
            noise = rng.standard_normal((n_seg, spec.dim)) @ lw.T
            for i in range(n_seg):
                spk = spk_list[i % len(spk_list)]
                seg_id = f"{tag}-seg-{gender[0]}{i:05d}"
                vec = spk.mean + noise[i]
                segments[gender].append(
                    _Segment(seg_id, spk, spk.phones[0] if phones[i] else spk.phones[1],
                             float(durations[i]), vec)
                )
                emb_ids.append(seg_id)
                emb_rows.append(vec)
                emb_speakers.append(spk.speaker_id)

        # enrollment models: gender split by speaker share, one phone per model
        models_by_cell: dict[tuple[str, int], list[tuple[EnrollmentModel, _Speaker, np.ndarray]]] = {}
        for n_en, n_models in ((1, plan.n_models_1seg), (3, plan.n_models_3seg)):
            g_split = _largest_remainder(
                n_models, np.array(plan.n_speakers, dtype=float), minimum=1
            )
            for g_i, gender in enumerate(GENDERS):
                cell_models = []
                spk_list = speakers[gender]
                for i in range(int(g_split[g_i])):
                    spk = spk_list[i % len(spk_list)]
                    mid = f"{tag}-mod{n_en}-{gender[0]}{i:04d}"
                    seg_ids = tuple(f"{mid}-e{j}" for j in range(n_en))
                    vecs = spk.mean + rng.standard_normal((n_en, spec.dim)) @ lw.T
                    model = EnrollmentModel(
                        model_id=mid,
                        speaker_id=spk.speaker_id,
                        gender=gender,
                        segments=seg_ids,
                        phone_ids=(spk.phones[0],) * n_en,
                    )
                    all_models[mid] = model
                    cell_models.append((model, spk, vecs.sum(axis=0)))
                    for j, sid in enumerate(seg_ids):
                        emb_ids.append(sid)
                        emb_rows.append(vecs[j])
                        emb_speakers.append(spk.speaker_id)
                models_by_cell[(gender, n_en)] = cell_models

        def phone_match_of(model: EnrollmentModel, seg: _Segment) -> str:
            if source == "MLS":
                return "unknown"
            return "same" if seg.phone == model.phone_id else "different"

        segs_by_speaker: dict[str, list[_Segment]] = {}
        segs_by_lang: dict[tuple[str, str], list[_Segment]] = {}
        for gender in GENDERS:
            for s in segments[gender]:
                segs_by_speaker.setdefault(s.speaker.speaker_id, []).append(s)
                segs_by_lang.setdefault((gender, s.speaker.language), []).append(s)

        # per-cell trial counts allocated proportionally to available pairs
        cells = [(g, n) for g in GENDERS for n in ENROLL_COUNTS]
        tgt_caps = []
        non_caps = []
        for gender, n_en in cells:
            tgt_cap = 0
            non_cap = 0
            for _, spk, _ in models_by_cell[(gender, n_en)]:
                n_own = len(segs_by_speaker.get(spk.speaker_id, []))
                tgt_cap += n_own
                non_cap += len(segs_by_lang.get((gender, spk.language), [])) - n_own
            tgt_caps.append(tgt_cap)
            non_caps.append(non_cap)
        tgt_alloc = _allocate_capped(plan.n_targets, np.array(tgt_caps), minimum=1)
        non_alloc = _allocate_capped(plan.n_nontargets, np.array(non_caps), minimum=1)

        def emit(model: EnrollmentModel, spk: _Speaker, e_sum: np.ndarray,
                 seg: _Segment, is_target: bool, gender: str, n_en: int) -> None:
            trials.append(
                Trial(
                    model_id=model.model_id,
                    segment_id=seg.segment_id,
                    is_target=is_target,
                    source=source,
                    subset=subset,
                    gender=gender,
                    n_enroll=n_en,
                    phone_match=phone_match_of(model, seg),
                    language=spk.language,
                    duration_s=seg.duration,
                )
            )
            oracle.append((e_sum, n_en, seg.vector))

        for c_i, (gender, n_en) in enumerate(cells):
            cell_models = models_by_cell[(gender, n_en)]
            if not cell_models:
                raise InfeasibleSpecError(f"no models for cell {gender}/{n_en} in {key}")

            # targets: cycle models, pairing each with its own speaker's segments
            own = [segs_by_speaker.get(spk.speaker_id, []) for _, spk, _ in cell_models]
            for kind, want, is_target in (
                ("target", int(tgt_alloc[c_i]), True),
                ("nontarget", int(non_alloc[c_i]), False),
            ):
                if is_target:
                    pools = own
                    starts = [0] * len(cell_models)
                else:
                    # same-gender, same-language segments of other speakers,
                    # iterated from a rotated start so pairs spread out
                    pools = []
                    starts = []
                    for m_i, (_, spk, _) in enumerate(cell_models):
                        pool = segs_by_lang.get((gender, spk.language), [])
                        pools.append(pool)
                        starts.append((m_i * 7919) % max(1, len(pool)))
                cursors = [0] * len(cell_models)
                assigned = 0
                while assigned < want:
                    progressed = False
                    for m_i, (model, spk, e_sum) in enumerate(cell_models):
                        if assigned >= want:
                            break
                        pool = pools[m_i]
                        while cursors[m_i] < len(pool):
                            seg = pool[(starts[m_i] + cursors[m_i]) % len(pool)]
                            cursors[m_i] += 1
                            if not is_target and seg.speaker is spk:
                                continue  # own segments are target material only
                            emit(model, spk, e_sum, seg, is_target, gender, n_en)
                            assigned += 1
                            progressed = True
                            break
                    if not progressed:
                        raise InfeasibleSpecError(
                            f"cell {gender}/{n_en} in {key}: only {assigned} of {want} "
                            f"{kind} pairs available; add test segments or speakers"
                        )

    manifest = build_manifest(trials, models=all_models)
    enroll_sums = np.stack([e for e, _, _ in oracle])
    n_enroll_arr = np.array([n for _, n, _ in oracle], dtype=np.int64)
    test_mat = np.stack([t for _, _, t in oracle])
    llr = oracle_llr(b, w, enroll_sums, n_enroll_arr, test_mat)
    embeddings = EmbeddingSet(
        emb_ids,
        np.stack(emb_rows),
        emb_speakers,
        np.zeros(len(emb_ids), dtype=bool),
    )
    return SynthResult(manifest, all_models, embeddings, llr, b, w, spec)


def write_outputs(result: SynthResult, out_dir: str) -> dict[str, str]:
    """Emit the artifact in the formats the other modules consume."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "key": os.path.join(out_dir, "key.tsv"),
        "trials": os.path.join(out_dir, "trials.tsv"),
        "models": os.path.join(out_dir, "models.tsv"),
        "embeddings": os.path.join(out_dir, "embeddings.tsv"),
        "embeddings_meta": os.path.join(out_dir, "embeddings.meta.tsv"),
        "scores": os.path.join(out_dir, "oracle_scores.tsv"),
    }
    save_trials(result.manifest, paths["key"])
    save_blind_trials(result.manifest, paths["trials"])
    save_models(result.models.values(), paths["models"])
    save_embeddings(result.embeddings, paths["embeddings"], paths["embeddings_meta"])
    score_map = {
        pair: float(result.oracle_llr[i])
        for i, pair in enumerate(result.manifest.pairs())
    }
    save_scores(score_map, paths["scores"])
    return paths
