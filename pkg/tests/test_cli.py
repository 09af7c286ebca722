import json

from disctok import cli
from disctok.experiment import default_isib_plan_dict


def run(capsys, *args):
    code = cli.main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def small_plan():
    plan = default_isib_plan_dict(
        n_eval_sentences=4, n_template_speakers=1, n_native_eval_speakers=2,
        n_accented_speakers=2, n_tok_sentences=4, n_tok_speakers=1,
        n_categories=6, dim=6,
    )
    plan["seed"] = 1
    return plan


def test_usage_error_exit_code(capsys):
    code, _, _ = run(capsys, "no-such-command")
    assert code == 1


def test_data_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"not": "a record"}\n')
    out = tmp_path / "cb.dtkc"
    code, _, err = run(capsys, "train-kmeans", str(bad), str(out), "-k", "4")
    assert code == 2
    assert "error" in err


def test_full_cli_pipeline(tmp_path, capsys):
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps(small_plan()))
    corpus = tmp_path / "corpus"

    code, out, _ = run(capsys, "gen-synthetic", str(plan_path), str(corpus))
    assert code == 0
    assert "eval_native" in out

    cb = tmp_path / "cb.dtkc"
    code, out, _ = run(capsys, "train-kmeans", str(corpus / "tokenizer_T.jsonl"),
                       str(cb), "-k", "12", "--language", "T")
    assert code == 0

    toks = tmp_path / "native.tokens"
    code, _, _ = run(capsys, "tokenize", str(corpus / "eval_native.jsonl"),
                     str(cb), str(toks))
    assert code == 0

    tmpl_toks = tmp_path / "templates.tokens"
    code, _, _ = run(capsys, "tokenize", str(corpus / "templates.jsonl"),
                     str(cb), str(tmpl_toks))
    assert code == 0

    code, out, _ = run(capsys, "eval-qe", str(corpus / "eval_native.jsonl"), str(cb))
    assert code == 0
    assert out.startswith("QE\t")

    code, out, _ = run(capsys, "eval-mter", str(toks), str(toks),
                       str(corpus / "eval_native.jsonl"))
    assert code == 0
    assert out.startswith("MTER\t")

    index = tmp_path / "index.json"
    code, _, _ = run(capsys, "build-index", str(tmpl_toks),
                     str(corpus / "templates.jsonl"), str(index))
    assert code == 0

    rec = tmp_path / "rec.tsv"
    code, out, _ = run(capsys, "recognize", str(toks),
                       str(corpus / "eval_native.jsonl"), str(index), str(rec))
    assert code == 0
    assert "WER" in out
    assert rec.exists()


def test_run_experiment_and_render(tmp_path, capsys):
    config = {
        "name": "cli_test",
        "corpus": small_plan(),
        "codebook_languages": ["T", "X"],
        "cluster_sizes": [12],
        "seeds": [0],
        "worst_n": 1,
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    work = tmp_path / "work"
    code, out, _ = run(capsys, "run-experiment", str(cfg_path), str(work))
    assert code == 0
    report = work / "report.json"
    assert report.exists()

    code, out, _ = run(capsys, "render-report", str(report), "--format", "tsv")
    assert code == 0
    assert out.splitlines()[0].startswith("codebook_language\t")

    code, out, _ = run(capsys, "render-report", str(report), "--format", "table")
    assert code == 0
    assert "delta summary" in out


def test_config_error_is_data_error(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"name": "x", "bogus": True}))
    code, _, err = run(capsys, "run-experiment", str(cfg_path), str(tmp_path / "w"))
    assert code == 2


def test_threads_env_var(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DISCTOK_THREADS", "3")
    assert cli._default_threads() == 3
    monkeypatch.setenv("DISCTOK_THREADS", "junk")
    assert cli._default_threads() == 1
