import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctseval import trialset
from ctseval.trialset import (
    ALL_CELLS,
    ConditionCell,
    TrialFileError,
    build_manifest,
    check_conditions,
    load_models,
    load_trials,
    marginal_counts,
    partition,
    save_models,
    save_trials,
)

from conftest import make_model, make_trial

HEADER = "\t".join(trialset.KEY_COLUMNS)


def key_line(model="m1", seg="s1", label="target", source="CMN2", subset="progress",
             gender="male", n_enroll="1", phone="same", lang="ara-aeb", dur="30.0"):
    return "\t".join((model, seg, label, source, subset, gender, n_enroll, phone, lang, dur))


def write_key(tmp_path, lines, name="key.tsv"):
    path = tmp_path / name
    path.write_bytes(("\n".join([HEADER] + lines) + "\n").encode())
    return str(path)


class TestLoader:
    def test_basic_load(self, tmp_path):
        path = write_key(tmp_path, [key_line(), key_line(seg="s2", label="nontarget")])
        m = load_trials(path)
        assert len(m) == 2
        assert m[0].model_id == "m1" and m[0].is_target
        assert m[1].phone_match == "same"
        assert m.counts[ConditionCell("CMN2", "male", 1)] == (1, 1)

    def test_empty_trial_set(self, tmp_path):
        path = write_key(tmp_path, [])
        with pytest.raises(TrialFileError, match="empty trial set"):
            load_trials(path)

    def test_duplicate_trial_names_pair_and_line(self, tmp_path):
        path = write_key(tmp_path, [key_line(), key_line()])
        with pytest.raises(TrialFileError, match=r"duplicate trial \(m1, s1\)") as e:
            load_trials(path)
        assert e.value.line == 3

    def test_unknown_enum_token(self, tmp_path):
        path = write_key(tmp_path, [key_line(gender="other")])
        with pytest.raises(TrialFileError, match="unknown enum token 'other'"):
            load_trials(path)

    def test_duration_out_of_range(self, tmp_path):
        for bad in ("9.5", "60.5"):
            path = write_key(tmp_path, [key_line(dur=bad)])
            with pytest.raises(TrialFileError, match="duration"):
                load_trials(path)

    def test_bad_column_count(self, tmp_path):
        path = tmp_path / "key.tsv"
        path.write_bytes((HEADER + "\n" + "m1\ts1\ttarget\n").encode())
        with pytest.raises(TrialFileError, match="expected 10 columns, got 3"):
            load_trials(str(path))

    def test_crlf_rejected(self, tmp_path):
        path = tmp_path / "key.tsv"
        path.write_bytes((HEADER + "\r\n" + key_line() + "\r\n").encode())
        with pytest.raises(TrialFileError, match="LF"):
            load_trials(str(path))

    def test_column_permutation_accepted(self, tmp_path):
        cols = list(trialset.KEY_COLUMNS)
        perm = cols[::-1]
        row = dict(zip(cols, key_line().split("\t")))
        path = tmp_path / "key.tsv"
        path.write_bytes(
            ("\t".join(perm) + "\n" + "\t".join(row[c] for c in perm) + "\n").encode()
        )
        m = load_trials(str(path))
        assert m[0].model_id == "m1" and m[0].duration_s == 30.0


class TestRoundTrip:
    def test_serialize_load_byte_identical(self, tmp_path):
        lines = [
            key_line(),
            key_line(seg="s2", label="nontarget", dur="12.25"),
            key_line(model="m2", seg="s1", label="nontarget", source="MLS",
                     phone="unknown", lang="zho-cmn", dur="59.9"),
        ]
        path = write_key(tmp_path, lines)
        canonical = open(path, "rb").read()
        m = load_trials(path)
        out = str(tmp_path / "round.tsv")
        save_trials(m, out)
        assert open(out, "rb").read() == canonical
        # idempotent: loading the serialization serializes identically
        out2 = str(tmp_path / "round2.tsv")
        save_trials(load_trials(out), out2)
        assert open(out2, "rb").read() == canonical

    def test_permuted_columns_canonicalize(self, tmp_path):
        cols = list(trialset.KEY_COLUMNS)
        row = dict(zip(cols, key_line().split("\t")))
        perm = sorted(cols)
        path = tmp_path / "key.tsv"
        path.write_bytes(
            ("\t".join(perm) + "\n" + "\t".join(row[c] for c in perm) + "\n").encode()
        )
        out = str(tmp_path / "canon.tsv")
        save_trials(load_trials(str(path)), out)
        assert open(out, "rb").read() == (HEADER + "\n" + key_line() + "\n").encode()

    def test_models_round_trip(self, tmp_path):
        models = [make_model("m1"), make_model("m3", n_enroll=3, speaker_id="spk2")]
        path = str(tmp_path / "models.tsv")
        save_models(models, path)
        loaded = load_models(path)
        assert loaded["m1"] == models[0]
        assert loaded["m3"] == models[1]

    def test_model_phone_list_round_trip(self, tmp_path):
        bad = make_model("mx", n_enroll=3, phone_ids=("pa", "pb", "pa"))
        path = str(tmp_path / "models.tsv")
        save_models([bad], path)
        assert load_models(path)["mx"].phone_ids == ("pa", "pb", "pa")


class TestPartition:
    def test_single_trial_one_cell(self):
        m = build_manifest([make_trial()])
        parts = partition(m)
        assert len(parts) == 8
        sizes = {cell: len(sub) for cell, sub in parts.items()}
        assert sizes[ConditionCell("CMN2", "male", 1)] == 1
        assert sum(sizes.values()) == 1

    def test_partition_is_a_partition(self, small_synth):
        m = small_synth.manifest
        parts = partition(m)
        total = sum(len(sub) for sub in parts.values())
        assert total == len(m)
        # disjoint and exhaustive via the cell code itself
        for i, cell in enumerate(ALL_CELLS):
            assert len(parts[cell]) == int(np.count_nonzero(m.cell_code == i))

    def test_partition_counts_match_linear_recount(self, small_synth):
        m = small_synth.manifest
        recount = {cell: [0, 0] for cell in ALL_CELLS}
        for t in m:
            recount[t.cell][0 if t.is_target else 1] += 1
        for cell, (n_tgt, n_non) in m.counts.items():
            assert recount[cell] == [n_tgt, n_non]

    def test_marginals(self, small_synth):
        m = small_synth.manifest
        marg = marginal_counts(m, "gender")
        for (src, g), (n_t, n_n) in marg.items():
            cells = [c for c in ALL_CELLS if c.source == src and c.gender == g]
            assert n_t == sum(m.counts[c][0] for c in cells)
            assert n_n == sum(m.counts[c][1] for c in cells)
        with pytest.raises(ValueError):
            marginal_counts(m, "duration")


class TestCheckConditions:
    def test_clean_synth_is_empty(self, small_synth):
        report = check_conditions(small_synth.manifest)
        assert report.ok and report.empty

    def test_cross_gender_injection(self):
        trials = [
            make_trial(segment_id="s1"),
            make_trial(segment_id="s2", is_target=False),
        ]
        models = {"m1": make_model("m1", gender="female")}
        report = check_conditions(build_manifest(trials, models))
        rules = [v.rule for v in report.violations]
        assert rules.count("cross-gender") == 1

    def test_segment_spanning_genders(self):
        trials = [
            make_trial(model_id="m1", segment_id="shared"),
            make_trial(model_id="m2", segment_id="shared", gender="female", is_target=False),
        ]
        report = check_conditions(build_manifest(trials))
        assert any(
            v.rule == "cross-gender" and "segment shared" in v.subject
            for v in report.violations
        )

    def test_cross_lingual_model(self):
        trials = [
            make_trial(segment_id="s1", language="ara-aeb"),
            make_trial(segment_id="s2", language="eng-usg", is_target=False),
        ]
        report = check_conditions(build_manifest(trials))
        assert any(v.rule == "cross-lingual" for v in report.violations)

    def test_enrollment_phone_mismatch(self):
        model = make_model("m1", n_enroll=3, phone_ids=("pa", "pb", "pa"))
        trials = [make_trial(n_enroll=3)]
        report = check_conditions(build_manifest(trials, {"m1": model}))
        assert any(v.rule == "enrollment-phone-mismatch" for v in report.violations)

    def test_phone_match_unknown_on_cmn2(self):
        report = check_conditions(build_manifest([make_trial(phone_match="unknown")]))
        assert any(v.rule == "phone-match-unknown-source" for v in report.violations)

    def test_mls_known_phone_is_warning(self):
        t = make_trial(source="MLS", phone_match="same", language="zho-cmn")
        report = check_conditions(build_manifest([t]))
        assert report.ok
        assert any(v.rule == "mls-phone-match-known" for v in report.warnings)

    def test_unknown_language_is_warning(self):
        report = check_conditions(build_manifest([make_trial(language="xx-none")]))
        assert report.ok
        assert any(v.rule == "unknown-language" for v in report.warnings)

    def test_n_enroll_mismatch(self):
        models = {"m1": make_model("m1", n_enroll=3)}
        report = check_conditions(build_manifest([make_trial(n_enroll=1)], models))
        assert any(v.rule == "n-enroll-mismatch" for v in report.violations)


@settings(max_examples=30, deadline=None)
@given(
    n_trials=st.integers(1, 40),
    seed=st.integers(0, 2**31),
)
def test_build_partition_property(n_trials, seed):
    rng = np.random.default_rng(seed)
    trials = []
    used = set()
    for i in range(n_trials):
        pair = (f"m{rng.integers(5)}", f"s{i}")
        if pair in used:
            continue
        used.add(pair)
        source = ("CMN2", "MLS")[rng.integers(2)]
        trials.append(
            make_trial(
                model_id=pair[0],
                segment_id=pair[1],
                is_target=bool(rng.random() < 0.5),
                source=source,
                gender=("male", "female")[rng.integers(2)],
                n_enroll=(1, 3)[rng.integers(2)],
                phone_match="unknown" if source == "MLS" else "same",
            )
        )
    m = build_manifest(trials)
    parts = partition(m)
    assert sum(len(p) for p in parts.values()) == len(m)
    assert set(parts) == set(ALL_CELLS)
