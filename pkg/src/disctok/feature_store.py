"""Binary feature storage and corpus manifests.

Feature container (".dtkf"):
    bytes 0-3   magic b"DTKF"
    bytes 4-7   version, uint32 little-endian (currently 1)
    bytes 8-11  n_frames, uint32 little-endian
    bytes 12-15 dim, uint32 little-endian
    bytes 16-   n_frames * dim float32 little-endian, row-major

Manifests are JSON-lines: one object per line with exactly the fields of
UtteranceRecord. Both formats are the wire contract for external feature
producers; see README for the byte-level description.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .errors import (
    FeatureFormatError,
    FeatureVersionError,
    ManifestError,
    NonFiniteValueError,
    TruncatedFileError,
)

MAGIC = b"DTKF"
VERSION = 1
_HEADER = struct.Struct("<4sIII")

RECORD_FIELDS = (
    "utterance_id",
    "speaker_id",
    "native_language",
    "spoken_language",
    "sentence_id",
    "transcript",
    "accent_strength",
    "feature_path",
)


def _check_finite(data: np.ndarray) -> None:
    if not np.isfinite(data).all():
        raise NonFiniteValueError("feature matrix contains NaN or Inf")


def write_features(matrix: np.ndarray, path) -> None:
    """Write a feature matrix to `path` in the DTKF container format."""
    data = np.asarray(matrix, dtype=np.float32)
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise ValueError(f"expected a nonempty 2-D matrix, got shape {data.shape}")
    _check_finite(data)
    n_frames, dim = data.shape
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n_frames, dim))
        fh.write(payload)


def read_features(path) -> np.ndarray:
    """Read a DTKF container; exact inverse of write_features."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise TruncatedFileError(f"{path}: file shorter than header")
        magic, version, n_frames, dim = _HEADER.unpack(header)
        if magic != MAGIC:
            raise FeatureFormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FeatureVersionError(f"{path}: unsupported version {version}")
        if n_frames < 1 or dim < 1:
            raise FeatureFormatError(f"{path}: invalid shape {n_frames}x{dim}")
        expected = n_frames * dim * 4
        payload = fh.read(expected)
        if len(payload) < expected:
            raise TruncatedFileError(
                f"{path}: expected {expected} payload bytes, got {len(payload)}"
            )
    data = np.frombuffer(payload, dtype="<f4").reshape(n_frames, dim)
    _check_finite(data)
    return data.astype(np.float32, copy=True)


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    speaker_id: str
    native_language: str
    spoken_language: str
    sentence_id: str
    transcript: str
    accent_strength: float
    feature_path: str

    def validate(self, line=None):
        if not 0.0 <= self.accent_strength <= 1.0:
            raise ManifestError(
                f"accent_strength {self.accent_strength} outside [0, 1]", line=line
            )


@dataclass
class Manifest:
    records: list[UtteranceRecord]
    corpus_name: str = ""

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def by_id(self) -> dict[str, UtteranceRecord]:
        return {r.utterance_id: r for r in self.records}

    def subset(self, predicate, corpus_name=None) -> "Manifest":
        return Manifest(
            [r for r in self.records if predicate(r)],
            corpus_name if corpus_name is not None else self.corpus_name,
        )


def load_manifest(path, corpus_name=None) -> Manifest:
    """Parse a JSON-lines manifest, rejecting duplicate ids and bad fields."""
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            missing = [f for f in RECORD_FIELDS if f not in obj]
            if missing:
                raise ManifestError(f"missing fields {missing}", line=lineno)
            extra = [k for k in obj if k not in RECORD_FIELDS]
            if extra:
                raise ManifestError(f"unknown fields {extra}", line=lineno)
            record = UtteranceRecord(
                utterance_id=str(obj["utterance_id"]),
                speaker_id=str(obj["speaker_id"]),
                native_language=str(obj["native_language"]),
                spoken_language=str(obj["spoken_language"]),
                sentence_id=str(obj["sentence_id"]),
                transcript=str(obj["transcript"]),
                accent_strength=float(obj["accent_strength"]),
                feature_path=str(obj["feature_path"]),
            )
            record.validate(line=lineno)
            if record.utterance_id in seen:
                raise ManifestError(
                    f"duplicate utterance_id {record.utterance_id!r}", line=lineno
                )
            seen.add(record.utterance_id)
            records.append(record)
    name = corpus_name if corpus_name is not None else Path(path).stem
    return Manifest(records, corpus_name=name)


def save_manifest(manifest: Manifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in manifest.records:
            fh.write(json.dumps(asdict(record), sort_keys=True) + "\n")


def load_record_features(record: UtteranceRecord, root) -> np.ndarray:
    """Resolve a record's feature_path relative to `root` and load it."""
    return read_features(Path(root) / record.feature_path)
