"""Template-matching recognizer over token sequences.

Stands in for a trained ASR model at desk scale: a test utterance is
classified as the training template with the smallest length-normalized
edit distance. Multiple templates per sentence are allowed; ties break to
the lexicographically smallest sentence_id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metrics
from .errors import EmptyInputError, FingerprintMismatchError, ManifestError
from .feature_store import Manifest
from .tokenizer import TokenCorpus, TokenSequence


@dataclass(frozen=True)
class TemplateEntry:
    utterance_id: str
    tokens: tuple[int, ...]
    transcript: str
    sentence_id: str


@dataclass
class TemplateIndex:
    entries: list[TemplateEntry]
    codebook_fingerprint: str


def build_template_index(corpus: TokenCorpus, manifest: Manifest) -> TemplateIndex:
    if len(corpus) == 0:
        raise EmptyInputError("template corpus is empty")
    records = manifest.by_id()
    entries = []
    for seq in corpus:
        rec = records.get(seq.utterance_id)
        if rec is None:
            raise ManifestError(f"template utterance {seq.utterance_id!r} not in manifest")
        if seq.codebook_fingerprint != corpus.codebook_fingerprint:
            raise FingerprintMismatchError(
                f"utterance {seq.utterance_id!r} tokenized with a different codebook"
            )
        entries.append(TemplateEntry(
            utterance_id=seq.utterance_id,
            tokens=seq.tokens,
            transcript=rec.transcript,
            sentence_id=rec.sentence_id,
        ))
    return TemplateIndex(entries=entries,
                         codebook_fingerprint=corpus.codebook_fingerprint)


def _normalized_distances(tokens, index: TemplateIndex,
                          exclude_id: str | None = None) -> tuple[list, np.ndarray]:
    entries = [e for e in index.entries if e.utterance_id != exclude_id]
    if not entries:
        raise EmptyInputError("no templates left to match against")
    dists = metrics.levenshtein_one_vs_many(tokens, [e.tokens for e in entries])
    norms = np.array([max(len(tokens), len(e.tokens), 1) for e in entries],
                     dtype=np.float64)
    return entries, dists / norms


def recognize(seq: TokenSequence, index: TemplateIndex,
              exclude_id: str | None = None) -> tuple[str, str, float]:
    """Return (transcript, sentence_id, score) of the best template."""
    if seq.codebook_fingerprint != index.codebook_fingerprint:
        raise FingerprintMismatchError(
            "test sequence and template index use different codebooks"
        )
    entries, scores = _normalized_distances(seq.tokens, index, exclude_id)
    best = min(range(len(entries)), key=lambda i: (scores[i], entries[i].sentence_id))
    e = entries[best]
    return e.transcript, e.sentence_id, float(scores[best])


@dataclass
class EvaluationResult:
    per_utterance: dict  # utterance_id -> (predicted sentence_id, score, transcript)
    corpus_wer: float
    sentence_accuracy: float


def evaluate(eval_corpus: TokenCorpus, manifest: Manifest,
             index: TemplateIndex, leave_one_out: bool = True) -> EvaluationResult:
    """Recognize every eval utterance; aggregate WER and sentence accuracy.

    WER is the total word edit distance over total reference words. With
    leave_one_out an utterance never matches its own template entry.
    """
    if len(eval_corpus) == 0:
        raise EmptyInputError("evaluation corpus is empty")
    records = manifest.by_id()
    per_utterance = {}
    total_dist = 0
    total_words = 0
    correct = 0
    for seq in eval_corpus:
        rec = records.get(seq.utterance_id)
        if rec is None:
            raise ManifestError(f"eval utterance {seq.utterance_id!r} not in manifest")
        exclude = seq.utterance_id if leave_one_out else None
        transcript, sentence_id, score = recognize(seq, index, exclude_id=exclude)
        per_utterance[seq.utterance_id] = (sentence_id, score, transcript)
        ref_words = rec.transcript.lower().split()
        if not ref_words:
            raise EmptyInputError(f"empty reference transcript for {seq.utterance_id}")
        total_dist += metrics.levenshtein(transcript.lower().split(), ref_words)
        total_words += len(ref_words)
        correct += int(sentence_id == rec.sentence_id)
    return EvaluationResult(
        per_utterance=per_utterance,
        corpus_wer=total_dist / total_words,
        sentence_accuracy=correct / len(eval_corpus),
    )


def save_recognition(result: EvaluationResult, path) -> None:
    """Line format: utterance_id, predicted sentence_id, score, transcript."""
    with open(path, "w", encoding="utf-8") as fh:
        for uid, (sid, score, transcript) in result.per_utterance.items():
            fh.write(f"{uid}\t{sid}\t{score:.6f}\t{transcript}\n")
