"""End-to-end experiment harness.

One config drives: synthetic corpus generation, per-language codebook
training, tokenization, template recognition, and the QE/MTER metrics,
over a grid of (codebook language x cluster size x seed). The report grid
carries per-cell WER / sentence accuracy / QE / MTER plus delta rows
between codebook languages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import kmeans, metrics, recognizer
from .accent_sim import CorpusPlan, build_corpus, plan_from_dict
from .errors import ConfigError, DisctokError, InsufficientDataError
from .feature_store import Manifest, load_manifest, load_record_features
from .tokenizer import TokenCorpus, save_token_corpus, tokenize_corpus

EVAL_SUBSETS = ("eval_native", "eval_accented", "eval_accented_worst")


@dataclass
class ExperimentConfig:
    name: str
    corpus: dict                      # CorpusPlan as a dict (seed is overridden per run seed)
    codebook_languages: list[str]
    cluster_sizes: list[int]
    seeds: list[int]
    ssl_layer: int = -1
    worst_n: int = 6
    mter_mode: str = "native_refs"
    dedup: bool = True

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not self.codebook_languages:
            raise ConfigError("need at least one codebook language")
        if not self.cluster_sizes:
            raise ConfigError("need at least one cluster size")

    def plan_for_seed(self, seed: int) -> CorpusPlan:
        obj = dict(self.corpus)
        obj["seed"] = int(seed)
        return plan_from_dict(obj)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return config_from_dict(obj)


def config_from_dict(obj: dict) -> ExperimentConfig:
    known = {"name", "corpus", "codebook_languages", "cluster_sizes", "seeds",
             "ssl_layer", "worst_n", "mter_mode", "dedup"}
    extra = set(obj) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    missing = {"name", "corpus", "codebook_languages", "cluster_sizes", "seeds"} - set(obj)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    return ExperimentConfig(**obj)


def select_worst_speakers(manifest: Manifest, n: int) -> Manifest:
    """Utterances of the n accented speakers with the highest accent strength."""
    if n < 1:
        raise ConfigError("worst-speaker subset size must be >= 1")
    by_speaker = {}
    for rec in manifest:
        if rec.accent_strength > 0:
            by_speaker.setdefault(rec.speaker_id, rec.accent_strength)
    if len(by_speaker) < n:
        raise InsufficientDataError(
            f"only {len(by_speaker)} accented speakers, need {n}"
        )
    ranked = sorted(by_speaker, key=lambda s: (-by_speaker[s], s))
    keep = set(ranked[:n])
    return manifest.subset(lambda r: r.speaker_id in keep,
                           corpus_name=f"{manifest.corpus_name}_worst{n}")


@dataclass
class ReportCell:
    codebook_language: str
    cluster_size: int
    seed: int
    subset: str
    condition: str
    wer: float
    sentence_accuracy: float
    qe: float
    mter: float


@dataclass
class ExperimentReport:
    name: str
    cells: list[ReportCell] = field(default_factory=list)
    deltas: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)

    def cell(self, language, cluster_size, seed, subset) -> ReportCell:
        for c in self.cells:
            if (c.codebook_language == language and c.cluster_size == cluster_size
                    and c.seed == seed and c.subset == subset):
                return c
        raise KeyError((language, cluster_size, seed, subset))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "cells": [asdict(c) for c in self.cells],
            "deltas": self.deltas,
            "summary": self.summary,
        }


class StageError(DisctokError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _condition_label(codebook_language, subset_native, spoken_language):
    if codebook_language == subset_native:
        return "matched"
    if codebook_language == spoken_language:
        return "spoken-language"
    return "mismatched"


def _subset_native_language(manifest: Manifest) -> str:
    langs = {r.native_language for r in manifest}
    if len(langs) != 1:
        raise DisctokError(f"subset mixes native languages: {sorted(langs)}")
    return next(iter(langs))


def _load_frames(manifest: Manifest, root) -> np.ndarray:
    return np.concatenate(
        [load_record_features(r, root) for r in manifest], axis=0
    ).astype(np.float64)


def run_experiment(config: ExperimentConfig, work_dir,
                   save_artifacts: bool = True) -> ExperimentReport:
    """Run the full grid. Intermediate artifacts land under work_dir so a
    failed run leaves its completed stages inspectable."""
    work_dir = Path(work_dir)
    report = ExperimentReport(name=config.name)

    for seed in config.seeds:
        seed_dir = work_dir / f"seed{seed}"
        corpus_dir = seed_dir / "corpus"
        try:
            if (corpus_dir / "eval_native.jsonl").exists():
                manifests = {
                    p.stem: load_manifest(p)
                    for p in sorted(corpus_dir.glob("*.jsonl"))
                }
            else:
                manifests = build_corpus(config.plan_for_seed(seed), corpus_dir)
        except Exception as exc:
            raise StageError("corpus", exc) from exc

        for split in ("templates", "eval_native", "eval_accented"):
            if split not in manifests:
                raise StageError("corpus", f"missing split {split!r}")
        manifests["eval_accented_worst"] = select_worst_speakers(
            manifests["eval_accented"], config.worst_n
        )
        # MTER reference lookups need eval-native and accented records together.
        combined = Manifest(
            manifests["eval_native"].records + manifests["eval_accented"].records,
            corpus_name="eval_combined",
        )

        for language in config.codebook_languages:
            tok_split = f"tokenizer_{language}"
            if tok_split not in manifests:
                raise StageError("tokenizer-train", f"missing split {tok_split!r}")
            try:
                frames = _load_frames(manifests[tok_split], corpus_dir)
            except Exception as exc:
                raise StageError("tokenizer-train", exc) from exc

            for cluster_size in config.cluster_sizes:
                cell_dir = seed_dir / f"{language}_k{cluster_size}"
                try:
                    codebook = kmeans.train(
                        frames, cluster_size, seed=seed,
                        train_language=language, ssl_layer=config.ssl_layer,
                    )
                except Exception as exc:
                    raise StageError("kmeans", exc) from exc

                try:
                    tokens = {
                        split: tokenize_corpus(
                            manifests[split], codebook, corpus_dir,
                            dedup=config.dedup,
                        )
                        for split in ("templates", "eval_native", "eval_accented")
                    }
                except Exception as exc:
                    raise StageError("tokenize", exc) from exc
                worst_ids = {r.utterance_id
                             for r in manifests["eval_accented_worst"]}
                tokens["eval_accented_worst"] = TokenCorpus(
                    [s for s in tokens["eval_accented"].sequences
                     if s.utterance_id in worst_ids],
                    codebook_fingerprint=tokens["eval_accented"].codebook_fingerprint,
                    deduplicated=tokens["eval_accented"].deduplicated,
                )

                if save_artifacts:
                    cell_dir.mkdir(parents=True, exist_ok=True)
                    kmeans.save_codebook(codebook, cell_dir / "codebook.dtkc")
                    for split, corpus in tokens.items():
                        save_token_corpus(corpus, cell_dir / f"{split}.tokens")

                try:
                    index = recognizer.build_template_index(
                        tokens["templates"], manifests["templates"]
                    )
                except Exception as exc:
                    raise StageError("build-index", exc) from exc

                for subset in EVAL_SUBSETS:
                    try:
                        result = recognizer.evaluate(
                            tokens[subset], manifests[subset], index
                        )
                        qe = kmeans.quantization_error(
                            (load_record_features(r, corpus_dir)
                             for r in manifests[subset]),
                            codebook,
                        )
                        mrep = metrics.mter(
                            tokens[subset], tokens["eval_native"], combined,
                            mode=config.mter_mode,
                        )
                    except Exception as exc:
                        raise StageError(f"evaluate:{subset}", exc) from exc
                    report.cells.append(ReportCell(
                        codebook_language=language,
                        cluster_size=cluster_size,
                        seed=seed,
                        subset=subset,
                        condition=_condition_label(
                            language,
                            _subset_native_language(manifests[subset]),
                            manifests[subset].records[0].spoken_language,
                        ),
                        wer=result.corpus_wer,
                        sentence_accuracy=result.sentence_accuracy,
                        qe=qe,
                        mter=mrep.corpus_mter,
                    ))

    _add_deltas(report, config)
    return report


def _add_deltas(report: ExperimentReport, config: ExperimentConfig) -> None:
    langs = config.codebook_languages
    subsets = sorted({c.subset for c in report.cells})
    for i, lang_a in enumerate(langs):
        for lang_b in langs[i + 1:]:
            for cluster_size in config.cluster_sizes:
                for subset in subsets:
                    per_seed = []
                    for seed in config.seeds:
                        a = report.cell(lang_a, cluster_size, seed, subset)
                        b = report.cell(lang_b, cluster_size, seed, subset)
                        delta = {
                            "pair": f"{lang_a}-{lang_b}",
                            "cluster_size": cluster_size,
                            "seed": seed,
                            "subset": subset,
                            "delta_wer": a.wer - b.wer,
                            "delta_accuracy": a.sentence_accuracy - b.sentence_accuracy,
                            "delta_qe": a.qe - b.qe,
                            "delta_mter": a.mter - b.mter,
                        }
                        report.deltas.append(delta)
                        per_seed.append(delta["delta_wer"])
                    arr = np.array(per_seed)
                    report.summary.append({
                        "pair": f"{lang_a}-{lang_b}",
                        "cluster_size": cluster_size,
                        "subset": subset,
                        "mean_delta_wer": float(arr.mean()),
                        "std_delta_wer": float(arr.std()),
                        "wins_first_lower_wer": int((arr < 0).sum()),
                        "wins_second_lower_wer": int((arr > 0).sum()),
                        "n_seeds": len(per_seed),
                    })


def dump_report(report: ExperimentReport, path) -> None:
    """Deterministic structured dump: identical reports give identical bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


_CELL_COLUMNS = ("codebook_language", "cluster_size", "seed", "subset",
                 "condition", "wer", "sentence_accuracy", "qe", "mter")


def render_report(report: ExperimentReport, fmt: str = "tsv") -> str:
    if fmt == "tsv":
        lines = ["\t".join(_CELL_COLUMNS)]
        for c in report.cells:
            d = asdict(c)
            lines.append("\t".join(
                f"{d[k]:.6f}" if isinstance(d[k], float) else str(d[k])
                for k in _CELL_COLUMNS
            ))
        return "\n".join(lines) + "\n"
    if fmt == "table":
        widths = [max(len(str(x)) for x in col) for col in zip(
            _CELL_COLUMNS,
            *[[f"{asdict(c)[k]:.4f}" if isinstance(asdict(c)[k], float)
               else str(asdict(c)[k]) for k in _CELL_COLUMNS]
              for c in report.cells],
        )]
        def fmt_row(values):
            return "  ".join(str(v).ljust(w) for v, w in zip(values, widths))
        lines = [fmt_row(_CELL_COLUMNS)]
        lines.append("  ".join("-" * w for w in widths))
        for c in report.cells:
            d = asdict(c)
            lines.append(fmt_row([
                f"{d[k]:.4f}" if isinstance(d[k], float) else d[k]
                for k in _CELL_COLUMNS
            ]))
        lines.append("")
        lines.append("delta summary (first minus second, WER):")
        for s in report.summary:
            lines.append(
                f"  {s['pair']} K={s['cluster_size']} {s['subset']}: "
                f"mean {s['mean_delta_wer']:+.4f} +- {s['std_delta_wer']:.4f}, "
                f"wins {s['wins_first_lower_wer']}/{s['n_seeds']}"
            )
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown report format {fmt!r}")


def default_isib_plan_dict(target="T", accent="X", mismatched=None,
                           n_categories=24, dim=16, separation=4.0,
                           spread=1.0, jitter=0.75,
                           n_eval_sentences=20,
                           n_template_speakers=4,
                           n_native_eval_speakers=6,
                           n_accented_speakers=12,
                           alpha_range=(0.6, 0.95),
                           n_tok_sentences=25,
                           n_tok_speakers=3,
                           sentence_length=(5, 12)) -> dict:
    """Corpus plan for the standard accent-benefit experiment.

    Natives of `target` provide templates, the native eval subset, and one
    tokenizer-training split; natives of `accent` read target-language
    sentences with per-speaker accent strengths spanning alpha_range, and
    provide their own tokenizer-training split. `mismatched`, if given,
    adds a third language as a perturbed copy of `accent`.
    """
    inventories = {
        target: {},
        accent: {},
    }
    length = list(sentence_length)
    sentence_sets = {
        "eval": {"inventory": target, "n_sentences": n_eval_sentences,
                 "length_range": length},
        f"tok_{target}": {"inventory": target, "n_sentences": n_tok_sentences,
                          "length_range": length},
        f"tok_{accent}": {"inventory": accent, "n_sentences": n_tok_sentences,
                          "length_range": length},
    }
    alphas = list(np.round(np.linspace(alpha_range[0], alpha_range[1],
                                       n_accented_speakers), 4))
    groups = [
        {"split": "templates", "n_speakers": n_template_speakers,
         "native_inventory": target, "target_inventory": target,
         "sentences": "eval"},
        {"split": f"tokenizer_{target}", "n_speakers": n_tok_speakers,
         "native_inventory": target, "target_inventory": target,
         "sentences": f"tok_{target}"},
        {"split": f"tokenizer_{accent}", "n_speakers": n_tok_speakers,
         "native_inventory": accent, "target_inventory": accent,
         "sentences": f"tok_{accent}"},
        {"split": "eval_native", "n_speakers": n_native_eval_speakers,
         "native_inventory": target, "target_inventory": target,
         "sentences": "eval"},
        {"split": "eval_accented", "n_speakers": n_accented_speakers,
         "native_inventory": accent, "target_inventory": target,
         "sentences": "eval", "alphas": [float(a) for a in alphas]},
    ]
    if mismatched:
        inventories[mismatched] = {"perturb_of": accent, "jitter": jitter}
        sentence_sets[f"tok_{mismatched}"] = {
            "inventory": mismatched, "n_sentences": n_tok_sentences,
            "length_range": length,
        }
        groups.append({
            "split": f"tokenizer_{mismatched}", "n_speakers": n_tok_speakers,
            "native_inventory": mismatched, "target_inventory": mismatched,
            "sentences": f"tok_{mismatched}",
        })
    return {
        "name": "isib_synthetic",
        "seed": 0,
        "dim": dim,
        "n_categories": n_categories,
        "spread": spread,
        "separation": separation,
        "inventories": inventories,
        "sentence_sets": sentence_sets,
        "groups": groups,
    }
