import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ctseval import synthgen
from ctseval.trialset import ConditionCell, EnrollmentModel, Trial, build_manifest

# spec toy set: three targets, three nontargets
TOY_SCORES = np.array([2.0, 3.5, -1.0, 0.5, -2.0, 3.0])
TOY_LABELS = np.array([True, True, True, False, False, False])


@pytest.fixture
def toy_set():
    return TOY_SCORES.copy(), TOY_LABELS.copy()


@pytest.fixture(scope="session")
def small_synth():
    """Both sources/subsets, ~7k trials, well separated; used across service
    and metrics tests."""
    spec = synthgen.PopulationSpec.scaled(
        fraction=0.005, dim=12, between=4.0, within=0.5, seed=5
    )
    return synthgen.generate(spec)


@pytest.fixture(scope="session")
def progress_synth():
    """Progress-only set with ~86 models for bootstrap-shaped tests."""
    spec = synthgen.PopulationSpec.scaled(
        fraction=0.03, dim=12, seed=3, subsets=("progress",)
    )
    return synthgen.generate(spec)


def balanced_spec(n_models: int, seed: int, dim: int = 8,
                  targets_per_model: int = 6, nons_per_model: int = 60,
                  between: float = 1.0, within: float = 1.0) -> synthgen.PopulationSpec:
    """Single-source plan with n_models spread evenly over the four cells.

    Every cell is carried by several models, so model resampling rarely
    empties a cell; sized for bootstrap-shaped tests.
    """
    q = max(2, n_models // 4)
    n_spk = q + 2
    seg_per_gender = max(6 * n_spk, int(1.3 * nons_per_model * n_spk / (n_spk - 1)) + 8)
    plan = synthgen.SubsetPlan(
        n_speakers=(n_spk, n_spk),
        n_models_1seg=2 * q,
        n_models_3seg=2 * q,
        n_test_segments=2 * seg_per_gender,
        n_targets=4 * q * targets_per_model,
        n_nontargets=4 * q * nons_per_model,
    )
    return synthgen.PopulationSpec(
        plans={("CMN2", "progress"): plan},
        dim=dim,
        between=between,
        within=within,
        seed=seed,
    )


def calibration_spec(seed: int = 11, dim: int = 16) -> synthgen.PopulationSpec:
    """Two balanced sources, ~137k trials, every cell carrying real target mass.

    Balanced cells keep the sweep's finite-sample advantage over the fixed
    threshold well under the 0.02 calibration budget at any seed.
    """
    plans = {}
    for src in ("CMN2", "MLS"):
        plans[(src, "progress")] = synthgen.SubsetPlan(
            n_speakers=(60, 60),
            n_models_1seg=160,
            n_models_3seg=160,
            n_test_segments=4000,
            n_targets=8000,
            n_nontargets=60000,
            languages=synthgen.SOURCE_LANGUAGES[src][:2],
        )
    return synthgen.PopulationSpec(plans=plans, dim=dim, between=1.0, within=1.0, seed=seed)


@pytest.fixture(scope="session")
def calibration_synth():
    """Large calibrated set (~137k trials) for oracle-calibration checks."""
    return synthgen.generate(calibration_spec())


def make_trial(
    model_id="m1",
    segment_id="s1",
    is_target=True,
    source="CMN2",
    subset="progress",
    gender="male",
    n_enroll=1,
    phone_match="same",
    language="ara-aeb",
    duration_s=30.0,
) -> Trial:
    return Trial(
        model_id=model_id,
        segment_id=segment_id,
        is_target=is_target,
        source=source,
        subset=subset,
        gender=gender,
        n_enroll=n_enroll,
        phone_match=phone_match,
        language=language,
        duration_s=duration_s,
    )


def make_model(model_id="m1", speaker_id="spk1", gender="male", n_enroll=1,
               phone_ids=None) -> EnrollmentModel:
    segments = tuple(f"{model_id}-e{i}" for i in range(n_enroll))
    if phone_ids is None:
        phone_ids = (f"{speaker_id}-pa",) * n_enroll
    return EnrollmentModel(model_id, speaker_id, gender, segments, tuple(phone_ids))


def score_file_bytes(manifest, llr) -> bytes:
    lines = ["modelid\tsegmentid\tLLR"]
    for (m, s), v in zip(manifest.pairs(), llr):
        lines.append(f"{m}\t{s}\t{float(v)!r}")
    return ("\n".join(lines) + "\n").encode()


__all__ = [
    "ConditionCell",
    "build_manifest",
    "make_model",
    "make_trial",
    "score_file_bytes",
]
