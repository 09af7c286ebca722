"""Feature matrices -> discrete token sequences.

Token corpus files are plain text: a header line carrying the codebook
fingerprint and dedup flag, then one line per utterance with the id and
space-separated integer tokens.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from .errors import DisctokError, FingerprintMismatchError
from .feature_store import Manifest, load_record_features
from .kmeans import Codebook, assign_batch


@dataclass(frozen=True)
class TokenSequence:
    utterance_id: str
    tokens: tuple[int, ...]
    deduplicated: bool
    codebook_fingerprint: str


def tokenize(matrix, codebook: Codebook, utterance_id="") -> TokenSequence:
    """Assign each frame to its nearest centroid; no dedup."""
    ids, _ = assign_batch(matrix, codebook)
    return TokenSequence(
        utterance_id=utterance_id,
        tokens=tuple(int(t) for t in ids),
        deduplicated=False,
        codebook_fingerprint=codebook.fingerprint,
    )


def deduplicate(seq: TokenSequence) -> TokenSequence:
    """Collapse runs of consecutive identical tokens; idempotent."""
    out = []
    prev = None
    for t in seq.tokens:
        if t != prev:
            out.append(t)
        prev = t
    return replace(seq, tokens=tuple(out), deduplicated=True)


@dataclass
class TokenCorpus:
    sequences: list[TokenSequence]
    codebook_fingerprint: str
    deduplicated: bool

    def __iter__(self):
        return iter(self.sequences)

    def __len__(self):
        return len(self.sequences)

    def by_id(self) -> dict[str, TokenSequence]:
        return {s.utterance_id: s for s in self.sequences}


def tokenize_corpus(manifest: Manifest, codebook: Codebook, root,
                    dedup: bool = True, n_threads: int = 1) -> TokenCorpus:
    """Tokenize every manifest record; order preserved.

    Per-utterance failures are collected and re-raised together so a single
    bad file does not hide the rest.
    """
    def work(record):
        matrix = load_record_features(record, root)
        seq = tokenize(matrix, codebook, utterance_id=record.utterance_id)
        return deduplicate(seq) if dedup else seq

    failures = []
    sequences = []
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = [pool.submit(work, r) for r in manifest.records]
            for record, fut in zip(manifest.records, futures):
                try:
                    sequences.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - reported per utterance
                    failures.append((record.utterance_id, exc))
    else:
        for record in manifest.records:
            try:
                sequences.append(work(record))
            except Exception as exc:  # noqa: BLE001
                failures.append((record.utterance_id, exc))
    if failures:
        detail = "; ".join(f"{uid}: {exc}" for uid, exc in failures)
        raise DisctokError(f"{len(failures)} utterance(s) failed to tokenize: {detail}")
    return TokenCorpus(
        sequences=sequences,
        codebook_fingerprint=codebook.fingerprint,
        deduplicated=dedup,
    )


def save_token_corpus(corpus: TokenCorpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"#codebook={corpus.codebook_fingerprint} "
            f"dedup={'1' if corpus.deduplicated else '0'}\n"
        )
        for seq in corpus.sequences:
            toks = " ".join(str(t) for t in seq.tokens)
            fh.write(f"{seq.utterance_id} {toks}".rstrip() + "\n")


def load_token_corpus(path) -> TokenCorpus:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#codebook="):
            raise DisctokError(f"{path}: missing token corpus header")
        fields = dict(part.split("=", 1) for part in header[1:].split())
        fingerprint = fields["codebook"]
        dedup = fields.get("dedup", "0") == "1"
        sequences = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            sequences.append(TokenSequence(
                utterance_id=parts[0],
                tokens=tuple(int(t) for t in parts[1:]),
                deduplicated=dedup,
                codebook_fingerprint=fingerprint,
            ))
    return TokenCorpus(sequences=sequences, codebook_fingerprint=fingerprint,
                       deduplicated=dedup)


def check_same_codebook(*corpora: TokenCorpus) -> str:
    fps = {c.codebook_fingerprint for c in corpora}
    if len(fps) > 1:
        raise FingerprintMismatchError(f"mixed codebook fingerprints: {sorted(fps)}")
    return next(iter(fps))
