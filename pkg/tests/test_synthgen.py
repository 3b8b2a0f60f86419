import numpy as np
import pytest

from ctseval import metrics, synthgen
from ctseval.synthgen import InfeasibleSpecError, PopulationSpec, SubsetPlan, generate
from ctseval.trialset import check_conditions


class TestScaledPlan:
    def test_one_percent_trial_counts(self):
        spec = PopulationSpec.scaled(fraction=0.01, sources=("CMN2",), subsets=("progress",))
        plan = spec.plans[("CMN2", "progress")]
        assert plan.n_targets == 18
        assert plan.n_nontargets == 2552

    def test_generated_tallies(self, small_synth):
        m = small_synth.manifest.filter(subset="progress", source="CMN2")
        n_tgt = int(np.count_nonzero(m.is_target))
        want = round(0.005 * 1804)
        assert n_tgt == want


class TestGenerate:
    def test_deterministic_bytes(self, tmp_path):
        spec = PopulationSpec.scaled(fraction=0.004, dim=6, seed=21,
                                     sources=("CMN2",), subsets=("progress",))
        a = generate(spec)
        b = generate(spec)
        dir_a = str(tmp_path / "a")
        dir_b = str(tmp_path / "b")
        paths_a = synthgen.write_outputs(a, dir_a)
        paths_b = synthgen.write_outputs(b, dir_b)
        for kind in paths_a:
            assert open(paths_a[kind], "rb").read() == open(paths_b[kind], "rb").read()

    def test_passes_check_conditions(self, small_synth):
        report = check_conditions(small_synth.manifest)
        assert report.empty, [str(v) for v in report.violations + report.warnings]

    def test_no_duplicate_pairs(self, small_synth):
        pairs = list(small_synth.manifest.pairs())
        assert len(pairs) == len(set(pairs))

    def test_all_cells_populated_per_subset(self, small_synth):
        for subset in ("progress", "test"):
            sub = small_synth.manifest.filter(subset=subset)
            for cell, (n_t, n_n) in sub.counts.items():
                assert n_t >= 1 and n_n >= 1, f"{subset} {cell}"

    def test_oracle_separates(self, small_synth):
        llr = small_synth.oracle_llr
        m = small_synth.manifest
        assert llr[m.is_target].mean() > llr[~m.is_target].mean()

    def test_min_cost_below_one_and_ratio_trend(self):
        finals = []
        for ratio in (0.5, 2.0, 8.0):
            spec = PopulationSpec.scaled(
                fraction=0.02, dim=10, between=ratio, within=1.0, seed=17,
                subsets=("progress",),
            )
            res = generate(spec)
            final = metrics.aggregate_min(res.oracle_llr, res.manifest).final
            finals.append(final)
            assert final < 1.0
        assert finals[0] > finals[1] > finals[2]

    def test_infeasible_spec(self):
        plan = SubsetPlan(
            n_speakers=(2, 2),
            n_models_1seg=2,
            n_models_3seg=2,
            n_test_segments=4,
            n_targets=4,
            n_nontargets=10_000,
        )
        spec = PopulationSpec(plans={("CMN2", "progress"): plan}, dim=4, seed=0)
        with pytest.raises(InfeasibleSpecError):
            generate(spec)

    def test_embeddings_cover_all_segments(self, small_synth):
        ids = set(small_synth.embeddings.segment_ids)
        for t in small_synth.manifest:
            assert t.segment_id in ids
        for model in small_synth.models.values():
            for seg in model.segments:
                assert seg in ids

    def test_durations_in_range(self, small_synth):
        d = small_synth.manifest.duration_s
        assert d.min() >= 10.0 and d.max() <= 60.0


class TestOracleCalibration:
    def test_actual_close_to_min_on_large_sample(self, calibration_synth):
        res = calibration_synth
        assert len(res.manifest) >= 100_000
        actual = metrics.aggregate_actual(res.oracle_llr, res.manifest).final
        mn = metrics.aggregate_min(res.oracle_llr, res.manifest).final
        assert actual - mn <= 0.02
        assert actual >= mn - 1e-12

    def test_shuffled_labels_min_near_one(self, calibration_synth):
        res = calibration_synth
        rng = np.random.default_rng(0)
        llr = res.oracle_llr.copy()
        rng.shuffle(llr)
        mn = metrics.aggregate_min(llr, res.manifest).final
        assert abs(mn - 1.0) <= 0.05
