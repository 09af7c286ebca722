import json

import pytest

from disctok import experiment as exp
from disctok.errors import ConfigError, InsufficientDataError
from disctok.feature_store import Manifest, UtteranceRecord


def tiny_config(seeds=(0,), languages=("T", "X")):
    plan = exp.default_isib_plan_dict(
        n_eval_sentences=5,
        n_template_speakers=2,
        n_native_eval_speakers=2,
        n_accented_speakers=3,
        n_tok_sentences=6,
        n_tok_speakers=1,
        n_categories=8,
        dim=8,
    )
    return exp.config_from_dict({
        "name": "tiny",
        "corpus": plan,
        "codebook_languages": list(languages),
        "cluster_sizes": [16],
        "seeds": list(seeds),
        "worst_n": 2,
    })


def accented_record(uid, speaker, alpha):
    return UtteranceRecord(
        utterance_id=uid, speaker_id=speaker, native_language="X",
        spoken_language="T", sentence_id="s0", transcript="w",
        accent_strength=alpha, feature_path=f"{uid}.dtkf",
    )


class TestSelectWorstSpeakers:
    def _manifest(self):
        records = []
        for i, alpha in enumerate([0.2, 0.5, 0.9]):
            for j in range(2):
                records.append(accented_record(f"u{i}_{j}", f"spk{i}", alpha))
        return Manifest(records)

    def test_all_accented(self):
        out = exp.select_worst_speakers(self._manifest(), 3)
        assert len(out) == 6

    def test_zero_rejected(self):
        with pytest.raises(ConfigError):
            exp.select_worst_speakers(self._manifest(), 0)

    def test_picks_highest_alpha(self):
        out = exp.select_worst_speakers(self._manifest(), 1)
        assert {r.speaker_id for r in out} == {"spk2"}
        assert all(r.accent_strength == 0.9 for r in out)

    def test_too_few_speakers(self):
        with pytest.raises(InsufficientDataError):
            exp.select_worst_speakers(self._manifest(), 4)

    def test_native_speakers_never_selected(self):
        manifest = Manifest(self._manifest().records + [UtteranceRecord(
            utterance_id="nat", speaker_id="native", native_language="T",
            spoken_language="T", sentence_id="s0", transcript="w",
            accent_strength=0.0, feature_path="nat.dtkf",
        )])
        out = exp.select_worst_speakers(manifest, 3)
        assert "native" not in {r.speaker_id for r in out}


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            exp.config_from_dict({"name": "x", "corpus": {}, "seeds": [0],
                                  "codebook_languages": ["T"],
                                  "cluster_sizes": [8], "bogus": 1})

    def test_missing_key_rejected(self):
        with pytest.raises(ConfigError, match="missing"):
            exp.config_from_dict({"name": "x"})

    def test_needs_a_seed(self):
        with pytest.raises(ConfigError):
            exp.config_from_dict({"name": "x", "corpus": {}, "seeds": [],
                                  "codebook_languages": ["T"],
                                  "cluster_sizes": [8]})

    def test_roundtrip_through_file(self, tmp_path):
        cfg = tiny_config()
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({
            "name": cfg.name, "corpus": cfg.corpus,
            "codebook_languages": cfg.codebook_languages,
            "cluster_sizes": cfg.cluster_sizes, "seeds": cfg.seeds,
            "worst_n": cfg.worst_n,
        }))
        assert exp.load_config(path).name == "tiny"


@pytest.fixture(scope="module")
def tiny_report(tmp_path_factory):
    config = tiny_config()
    work = tmp_path_factory.mktemp("tiny_exp")
    return config, exp.run_experiment(config, work), work


class TestRunExperiment:
    def test_grid_shape(self, tiny_report):
        config, report, _ = tiny_report
        # 2 languages x 1 K x 1 seed x 3 subsets
        assert len(report.cells) == 6
        subsets = {c.subset for c in report.cells}
        assert subsets == set(exp.EVAL_SUBSETS)

    def test_condition_labels(self, tiny_report):
        _, report, _ = tiny_report
        for c in report.cells:
            if c.subset == "eval_native":
                expected = "matched" if c.codebook_language == "T" else "mismatched"
            else:
                expected = {"T": "spoken-language", "X": "matched"}[c.codebook_language]
            assert c.condition == expected

    def test_delta_rows_recomputable(self, tiny_report):
        config, report, _ = tiny_report
        for d in report.deltas:
            lang_a, lang_b = d["pair"].split("-")
            a = report.cell(lang_a, d["cluster_size"], d["seed"], d["subset"])
            b = report.cell(lang_b, d["cluster_size"], d["seed"], d["subset"])
            assert d["delta_wer"] == a.wer - b.wer
            assert d["delta_qe"] == a.qe - b.qe
            assert d["delta_mter"] == a.mter - b.mter

    def test_identical_training_data_gives_zero_delta(self, tmp_path):
        # the same tokenizer-training split under two language names must
        # produce identical codebooks, hence all-zero delta rows
        import shutil

        config = tiny_config()
        work = tmp_path / "seeded"
        exp.run_experiment(config, work, save_artifacts=False)
        corpus = work / "seed0" / "corpus"
        shutil.copy(corpus / "tokenizer_T.jsonl", corpus / "tokenizer_Tbis.jsonl")
        twin_config = tiny_config(languages=("T", "Tbis"))
        report = exp.run_experiment(twin_config, work)
        for d in report.deltas:
            assert d["delta_wer"] == 0.0
            assert d["delta_qe"] == 0.0
            assert d["delta_mter"] == 0.0
            assert d["delta_accuracy"] == 0.0

    def test_artifacts_preserved(self, tiny_report):
        _, _, work = tiny_report
        assert (work / "seed0" / "corpus" / "eval_native.jsonl").exists()
        assert (work / "seed0" / "T_k16" / "codebook.dtkc").exists()
        assert (work / "seed0" / "T_k16" / "eval_accented.tokens").exists()

    def test_training_isolation(self, tiny_report):
        # accented eval features never appear in codebook or template splits
        _, _, work = tiny_report
        from disctok.feature_store import load_manifest

        corpus = work / "seed0" / "corpus"
        eval_files = {r.feature_path
                      for r in load_manifest(corpus / "eval_accented.jsonl")}
        for split in ("templates", "tokenizer_T", "tokenizer_X"):
            train_files = {r.feature_path
                           for r in load_manifest(corpus / f"{split}.jsonl")}
            assert not (train_files & eval_files)

    def test_dump_deterministic(self, tmp_path):
        config = tiny_config()
        r1 = exp.run_experiment(config, tmp_path / "run1")
        r2 = exp.run_experiment(config, tmp_path / "run2")
        p1, p2 = tmp_path / "r1.json", tmp_path / "r2.json"
        exp.dump_report(r1, p1)
        exp.dump_report(r2, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_single_language_no_deltas(self, tmp_path):
        config = tiny_config(languages=("T",))
        report = exp.run_experiment(config, tmp_path, save_artifacts=False)
        assert len(report.cells) == 3
        assert report.deltas == []


class TestRenderReport:
    def test_tsv_roundtrip(self, tiny_report):
        _, report, _ = tiny_report
        text = exp.render_report(report, "tsv")
        lines = text.strip().split("\n")
        header = lines[0].split("\t")
        assert len(lines) == len(report.cells) + 1
        for line, cell in zip(lines[1:], report.cells):
            row = dict(zip(header, line.split("\t")))
            assert float(row["wer"]) == pytest.approx(cell.wer, abs=5e-7)
            assert float(row["qe"]) == pytest.approx(cell.qe, abs=5e-7)
            assert row["codebook_language"] == cell.codebook_language

    def test_table_contains_summary(self, tiny_report):
        _, report, _ = tiny_report
        text = exp.render_report(report, "table")
        assert "delta summary" in text
        assert "T-X" in text

    def test_unknown_format(self, tiny_report):
        _, report, _ = tiny_report
        with pytest.raises(ConfigError):
            exp.render_report(report, "xml")

    def test_delta_in_table_matches_recomputation(self, tiny_report):
        _, report, _ = tiny_report
        for s in report.summary:
            per_seed = [d["delta_wer"] for d in report.deltas
                        if d["pair"] == s["pair"] and d["subset"] == s["subset"]
                        and d["cluster_size"] == s["cluster_size"]]
            assert s["mean_delta_wer"] == pytest.approx(
                sum(per_seed) / len(per_seed)
            )
