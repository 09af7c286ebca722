"""Edit-distance machinery and evaluation metrics (TER, MTER, WER).

edit_distance(hyp, ref) follows the ASR convention: insertions are extra
symbols in the hypothesis, deletions are reference symbols the hypothesis
missed. TER and MTER are never clipped and may exceed 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, ManifestError
from .feature_store import Manifest
from .tokenizer import TokenCorpus, TokenSequence


@dataclass(frozen=True)
class AlignmentCost:
    distance: int
    substitutions: int
    insertions: int
    deletions: int


def levenshtein(a, b) -> int:
    """Distance-only Levenshtein with a rolling row; unit costs."""
    a = list(a)
    b = list(b)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, sa in enumerate(a, start=1):
        curr = [i] + [0] * len(b)
        for j, sb in enumerate(b, start=1):
            curr[j] = min(
                prev[j - 1] + (sa != sb),
                prev[j] + 1,
                curr[j - 1] + 1,
            )
        prev = curr
    return prev[len(b)]


def edit_distance(hyp, ref) -> AlignmentCost:
    """Levenshtein alignment with S/I/D counts from one optimal backtrace.

    Backtrace tie-break: substitution/match first, then insertion, then
    deletion.
    """
    hyp = list(hyp)
    ref = list(ref)
    n, m = len(hyp), len(ref)
    dp = np.zeros((n + 1, m + 1), dtype=np.int64)
    dp[:, 0] = np.arange(n + 1)
    dp[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            dp[i, j] = min(
                dp[i - 1, j - 1] + (hyp[i - 1] != ref[j - 1]),
                dp[i - 1, j] + 1,
                dp[i, j - 1] + 1,
            )
    s = ins = dele = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i, j] == dp[i - 1, j - 1] + (hyp[i - 1] != ref[j - 1]):
            if hyp[i - 1] != ref[j - 1]:
                s += 1
            i -= 1
            j -= 1
        elif i > 0 and dp[i, j] == dp[i - 1, j] + 1:
            ins += 1
            i -= 1
        else:
            dele += 1
            j -= 1
    return AlignmentCost(distance=int(dp[n, m]), substitutions=s,
                         insertions=ins, deletions=dele)


def levenshtein_one_vs_many(query, refs: list) -> np.ndarray:
    """Distances from one sequence to many, vectorized over the references.

    Runs the DP with the reference axis batched, so the inner loop is over
    the (short) padded reference length only.
    """
    n_refs = len(refs)
    if n_refs == 0:
        return np.zeros(0, dtype=np.int64)
    lengths = np.array([len(r) for r in refs], dtype=np.int64)
    max_len = int(lengths.max())
    query = list(query)
    if max_len == 0:
        return np.full(n_refs, len(query), dtype=np.int64)
    padded = np.full((n_refs, max_len), -1, dtype=np.int64)
    for r, seq in enumerate(refs):
        padded[r, : len(seq)] = list(seq)

    dp = np.tile(np.arange(max_len + 1, dtype=np.int64), (n_refs, 1))
    for i, q in enumerate(query, start=1):
        new = np.empty_like(dp)
        new[:, 0] = i
        sub = dp[:, :-1] + (padded != q)
        ins = dp[:, 1:] + 1
        best = np.minimum(sub, ins)
        for j in range(1, max_len + 1):
            new[:, j] = np.minimum(best[:, j - 1], new[:, j - 1] + 1)
        dp = new
    return dp[np.arange(n_refs), lengths]


def ter(hyp: TokenSequence, ref: TokenSequence) -> float:
    """Token error rate: edit distance over reference length; unclipped."""
    if len(ref.tokens) == 0:
        raise EmptyInputError("TER reference is empty")
    return levenshtein(hyp.tokens, ref.tokens) / len(ref.tokens)


@dataclass
class MterReport:
    per_utterance: dict[str, float] = field(default_factory=dict)
    corpus_mter: float = float("nan")


def mter(eval_corpus: TokenCorpus, reference_corpus: TokenCorpus,
         manifest: Manifest, mode: str = "native_refs") -> MterReport:
    """Mean token error rate against same-content references.

    mode="native_refs": references are utterances of the same sentence read
    by native speakers of the spoken language (self excluded).
    mode="all_pairs": every same-content utterance in the reference corpus
    counts as a reference (self excluded).
    """
    if mode not in ("native_refs", "all_pairs"):
        raise ValueError(f"unknown MTER mode {mode!r}")
    records = manifest.by_id()

    def is_native_ref(uid: str) -> bool:
        rec = records.get(uid)
        if rec is None:
            raise ManifestError(f"reference utterance {uid!r} not in manifest")
        return rec.native_language == rec.spoken_language

    refs_by_sentence: dict[str, list[TokenSequence]] = {}
    for seq in reference_corpus:
        if mode == "native_refs" and not is_native_ref(seq.utterance_id):
            continue
        sid = records[seq.utterance_id].sentence_id
        refs_by_sentence.setdefault(sid, []).append(seq)

    report = MterReport()
    missing = []
    values = []
    for seq in eval_corpus:
        rec = records.get(seq.utterance_id)
        if rec is None:
            raise ManifestError(f"eval utterance {seq.utterance_id!r} not in manifest")
        refs = [r for r in refs_by_sentence.get(rec.sentence_id, [])
                if r.utterance_id != seq.utterance_id]
        if not refs:
            missing.append(rec.sentence_id)
            continue
        ref_lengths = np.array([len(r.tokens) for r in refs], dtype=np.float64)
        if (ref_lengths == 0).any():
            raise EmptyInputError(f"empty reference for sentence {rec.sentence_id!r}")
        dists = levenshtein_one_vs_many(seq.tokens, [r.tokens for r in refs])
        value = float(np.mean(dists / ref_lengths))
        report.per_utterance[seq.utterance_id] = value
        values.append(value)
    if missing:
        raise ManifestError(
            "sentences without references after self-exclusion: "
            + ", ".join(sorted(set(missing)))
        )
    report.corpus_mter = float(np.mean(values)) if values else float("nan")
    return report


def _normalize_words(transcript: str) -> list[str]:
    return transcript.lower().split()


def wer(hyp_transcript: str, ref_transcript: str) -> float:
    """Word error rate after lowercasing and whitespace tokenization."""
    ref = _normalize_words(ref_transcript)
    if not ref:
        raise EmptyInputError("WER reference transcript is empty")
    hyp = _normalize_words(hyp_transcript)
    return levenshtein(hyp, ref) / len(ref)
