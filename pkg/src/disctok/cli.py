"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
DISCTOK_THREADS sets the default worker count; --threads overrides it.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import click

from . import experiment as exp
from . import kmeans, metrics, recognizer
from .accent_sim import build_corpus, load_plan
from .errors import DisctokError
from .feature_store import load_manifest, load_record_features
from .tokenizer import load_token_corpus, save_token_corpus, tokenize_corpus


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("DISCTOK_THREADS", "1")))
    except ValueError:
        return 1


@click.group()
def cli():
    """Discrete speech token toolkit."""


@cli.command("gen-synthetic")
@click.argument("plan_path", type=click.Path(exists=True))
@click.argument("out_dir", type=click.Path())
def gen_synthetic(plan_path, out_dir):
    """Generate a synthetic corpus from a plan file."""
    plan = load_plan(plan_path)
    manifests = build_corpus(plan, out_dir)
    for split in sorted(manifests):
        click.echo(f"{split}: {len(manifests[split])} utterances")


@cli.command("train-kmeans")
@click.argument("manifest_path", type=click.Path(exists=True))
@click.argument("out_path", type=click.Path())
@click.option("--clusters", "-k", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--language", default="", help="Training language tag for provenance.")
@click.option("--layer", type=int, default=-1, help="Feature layer tag for provenance.")
@click.option("--root", type=click.Path(), default=None,
              help="Root for feature paths (default: manifest directory).")
def train_kmeans(manifest_path, out_path, clusters, seed, language, layer, root):
    """Train a codebook on all frames of a manifest."""
    import numpy as np

    manifest = load_manifest(manifest_path)
    root = root or Path(manifest_path).parent
    frames = np.concatenate(
        [load_record_features(r, root) for r in manifest], axis=0
    )
    codebook = kmeans.train(frames, clusters, seed=seed,
                            train_language=language, ssl_layer=layer)
    kmeans.save_codebook(codebook, out_path)
    click.echo(f"trained K={clusters} on {codebook.n_train_frames} frames, "
               f"inertia {codebook.final_inertia:.3f}")


@cli.command("tokenize")
@click.argument("manifest_path", type=click.Path(exists=True))
@click.argument("codebook_path", type=click.Path(exists=True))
@click.argument("out_path", type=click.Path())
@click.option("--dedup/--no-dedup", default=True, show_default=True)
@click.option("--root", type=click.Path(), default=None)
@click.option("--threads", type=int, default=None)
def tokenize_cmd(manifest_path, codebook_path, out_path, dedup, root, threads):
    """Tokenize every utterance of a manifest with a codebook."""
    manifest = load_manifest(manifest_path)
    codebook = kmeans.load_codebook(codebook_path)
    root = root or Path(manifest_path).parent
    corpus = tokenize_corpus(manifest, codebook, root, dedup=dedup,
                             n_threads=threads or _default_threads())
    save_token_corpus(corpus, out_path)
    click.echo(f"tokenized {len(corpus)} utterances")


@cli.command("eval-qe")
@click.argument("manifest_path", type=click.Path(exists=True))
@click.argument("codebook_path", type=click.Path(exists=True))
@click.option("--root", type=click.Path(), default=None)
def eval_qe(manifest_path, codebook_path, root):
    """Mean squared quantization error of a corpus under a codebook."""
    manifest = load_manifest(manifest_path)
    codebook = kmeans.load_codebook(codebook_path)
    root = root or Path(manifest_path).parent
    qe = kmeans.quantization_error(
        (load_record_features(r, root) for r in manifest), codebook
    )
    click.echo(f"QE\t{qe:.6f}")


@cli.command("eval-mter")
@click.argument("eval_tokens", type=click.Path(exists=True))
@click.argument("reference_tokens", type=click.Path(exists=True))
@click.argument("manifest_path", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["native_refs", "all_pairs"]),
              default="native_refs", show_default=True)
@click.option("--per-utterance", "per_utt", type=click.Path(), default=None,
              help="Also write per-utterance TER as TSV.")
def eval_mter(eval_tokens, reference_tokens, manifest_path, mode, per_utt):
    """Mean token error rate of eval tokens against same-content references."""
    report = metrics.mter(
        load_token_corpus(eval_tokens),
        load_token_corpus(reference_tokens),
        load_manifest(manifest_path),
        mode=mode,
    )
    if per_utt:
        with open(per_utt, "w", encoding="utf-8") as fh:
            fh.write("utterance_id\tter\n")
            for uid, value in report.per_utterance.items():
                fh.write(f"{uid}\t{value:.6f}\n")
    click.echo(f"MTER\t{report.corpus_mter:.6f}")


@cli.command("build-index")
@click.argument("token_corpus", type=click.Path(exists=True))
@click.argument("manifest_path", type=click.Path(exists=True))
@click.argument("out_path", type=click.Path())
def build_index(token_corpus, manifest_path, out_path):
    """Build a template index from a tokenized training corpus."""
    index = recognizer.build_template_index(
        load_token_corpus(token_corpus), load_manifest(manifest_path)
    )
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump({
            "codebook_fingerprint": index.codebook_fingerprint,
            "entries": [asdict(e) for e in index.entries],
        }, fh, sort_keys=True)
    click.echo(f"indexed {len(index.entries)} templates")


def _load_index(path) -> recognizer.TemplateIndex:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    entries = [recognizer.TemplateEntry(
        utterance_id=e["utterance_id"],
        tokens=tuple(e["tokens"]),
        transcript=e["transcript"],
        sentence_id=e["sentence_id"],
    ) for e in obj["entries"]]
    return recognizer.TemplateIndex(entries=entries,
                                    codebook_fingerprint=obj["codebook_fingerprint"])


@cli.command("recognize")
@click.argument("eval_tokens", type=click.Path(exists=True))
@click.argument("manifest_path", type=click.Path(exists=True))
@click.argument("index_path", type=click.Path(exists=True))
@click.argument("out_path", type=click.Path())
@click.option("--leave-one-out/--no-leave-one-out", default=True, show_default=True)
def recognize_cmd(eval_tokens, manifest_path, index_path, out_path, leave_one_out):
    """Recognize a tokenized eval corpus against a template index."""
    result = recognizer.evaluate(
        load_token_corpus(eval_tokens),
        load_manifest(manifest_path),
        _load_index(index_path),
        leave_one_out=leave_one_out,
    )
    recognizer.save_recognition(result, out_path)
    click.echo(f"WER\t{result.corpus_wer:.6f}")
    click.echo(f"sentence_accuracy\t{result.sentence_accuracy:.6f}")


@cli.command("run-experiment")
@click.argument("config_path", type=click.Path(exists=True))
@click.argument("work_dir", type=click.Path())
@click.option("--report", type=click.Path(), default=None,
              help="Structured report dump path (default: work_dir/report.json).")
def run_experiment_cmd(config_path, work_dir, report):
    """Run the full experiment grid described by a config file."""
    config = exp.load_config(config_path)
    result = exp.run_experiment(config, work_dir)
    report_path = report or (Path(work_dir) / "report.json")
    exp.dump_report(result, report_path)
    click.echo(exp.render_report(result, "table"))
    click.echo(f"report written to {report_path}")


@cli.command("render-report")
@click.argument("report_path", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["tsv", "table"]),
              default="tsv", show_default=True)
@click.option("--out", type=click.Path(), default=None)
def render_report_cmd(report_path, fmt, out):
    """Render a structured report dump as TSV or a readable table."""
    with open(report_path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    report = exp.ExperimentReport(
        name=obj["name"],
        cells=[exp.ReportCell(**c) for c in obj["cells"]],
        deltas=obj["deltas"],
        summary=obj["summary"],
    )
    text = exp.render_report(report, fmt)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except DisctokError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort internal error
        click.echo(f"internal error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
