"""Synthetic native / foreign-accented feature generation.

Each language is an inventory of Gaussian sound categories plus a Markov
chain over them. A sentence is a category sequence; an utterance emits a
few frames per category. Accented speech substitutes, with probability
alpha per phone, the target category by the speaker-native category whose
mean is nearest (perceptual assimilation). alpha=0 reproduces the native
generative path bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, DisctokError
from .feature_store import Manifest, UtteranceRecord, save_manifest, write_features


@dataclass(frozen=True)
class LanguageInventory:
    language_tag: str
    means: np.ndarray          # (C, D)
    spreads: np.ndarray        # (C,) isotropic std dev per category
    transition_matrix: np.ndarray  # (C, C) row-stochastic
    category_labels: tuple[str, ...]

    @property
    def n_categories(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def validate(self):
        rows = self.transition_matrix.sum(axis=1)
        if not np.allclose(rows, 1.0, atol=1e-9):
            raise DisctokError("transition matrix rows must sum to 1")
        if len(set(self.category_labels)) != self.n_categories:
            raise DisctokError("category labels must be distinct")


@dataclass(frozen=True)
class SimulatedSentence:
    sentence_id: str
    category_indices: tuple[int, ...]
    transcript: str


@dataclass(frozen=True)
class AccentSpec:
    speaker_native: str
    target: str
    strength: float  # alpha in [0, 1]
    frames_per_phone: tuple[int, int] = (2, 5)

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"accent strength {self.strength} outside [0, 1]")


def make_inventory(language_tag: str, n_categories: int, dim: int,
                   separation: float, seed, spread: float = 1.0,
                   mean_scale: float | None = None,
                   max_retries: int = 200) -> LanguageInventory:
    """Sample category means with min pairwise distance >= separation*spread."""
    if n_categories < 2 or dim < 1 or separation <= 0:
        raise ValueError("need n_categories >= 2, dim >= 1, separation > 0")
    rng = np.random.default_rng(seed)
    scale = mean_scale if mean_scale is not None else separation
    min_dist = separation * spread
    for _ in range(max_retries):
        means = rng.normal(0.0, scale, size=(n_categories, dim))
        diffs = means[:, None, :] - means[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs))
        np.fill_diagonal(d, np.inf)
        if d.min() >= min_dist:
            break
    else:
        raise DisctokError(
            f"could not place {n_categories} means with separation {min_dist}"
        )
    transitions = rng.gamma(5.0, size=(n_categories, n_categories))
    transitions /= transitions.sum(axis=1, keepdims=True)
    labels = tuple(f"{language_tag}{i:02d}" for i in range(n_categories))
    inv = LanguageInventory(
        language_tag=language_tag,
        means=means,
        spreads=np.full(n_categories, float(spread)),
        transition_matrix=transitions,
        category_labels=labels,
    )
    inv.validate()
    return inv


def perturb_inventory(inventory: LanguageInventory, language_tag: str,
                      jitter: float, seed) -> LanguageInventory:
    """A nearby language: same categories with jittered means.

    Controls how 'close' two accents are for mismatched-benefit tests.
    """
    rng = np.random.default_rng(seed)
    means = inventory.means + rng.normal(0.0, jitter, size=inventory.means.shape)
    labels = tuple(f"{language_tag}{i:02d}" for i in range(inventory.n_categories))
    inv = LanguageInventory(
        language_tag=language_tag,
        means=means,
        spreads=inventory.spreads.copy(),
        transition_matrix=inventory.transition_matrix.copy(),
        category_labels=labels,
    )
    inv.validate()
    return inv


def sample_sentences(inventory: LanguageInventory, n_sentences: int,
                     length_range: tuple[int, int], seed,
                     id_prefix: str = "s") -> list[SimulatedSentence]:
    """Sample category sequences from the inventory's Markov chain."""
    if n_sentences < 1:
        raise ValueError("n_sentences must be >= 1")
    lo, hi = length_range
    if lo < 1 or hi < lo:
        raise ValueError(f"bad length range {length_range}")
    rng = np.random.default_rng(seed)
    c = inventory.n_categories
    sentences = []
    for s in range(n_sentences):
        length = int(rng.integers(lo, hi + 1))
        seq = [int(rng.integers(c))]
        for _ in range(length - 1):
            seq.append(int(rng.choice(c, p=inventory.transition_matrix[seq[-1]])))
        transcript = " ".join(inventory.category_labels[i] for i in seq)
        sentences.append(SimulatedSentence(
            sentence_id=f"{id_prefix}{s:04d}",
            category_indices=tuple(seq),
            transcript=transcript,
        ))
    return sentences


def assimilation_map(target: LanguageInventory,
                     speaker: LanguageInventory) -> np.ndarray:
    """For each target category, the nearest speaker-native category (ties
    break to the lowest index)."""
    if target.dim != speaker.dim:
        raise DimensionMismatchError(
            f"inventory dims differ: {target.dim} vs {speaker.dim}"
        )
    diffs = target.means[:, None, :] - speaker.means[None, :, :]
    d = np.einsum("ijk,ijk->ij", diffs, diffs)
    return d.argmin(axis=1)


def synthesize_utterance(sentence: SimulatedSentence,
                         target: LanguageInventory,
                         speaker: LanguageInventory,
                         accent: AccentSpec,
                         speaker_id: str,
                         utterance_id: str,
                         seed,
                         feature_path: str = "") -> tuple[np.ndarray, UtteranceRecord]:
    """Emit frames for one utterance; returns (matrix, record)."""
    rng = np.random.default_rng(seed)
    nearest = assimilation_map(target, speaker)
    lo, hi = accent.frames_per_phone
    frames = []
    for c in sentence.category_indices:
        assimilated = rng.random() < accent.strength
        if assimilated:
            mean = speaker.means[nearest[c]]
            sd = speaker.spreads[nearest[c]]
        else:
            mean = target.means[c]
            sd = target.spreads[c]
        n = int(rng.integers(lo, hi + 1))
        frames.append(rng.normal(mean, sd, size=(n, target.dim)))
    matrix = np.concatenate(frames, axis=0).astype(np.float32)
    record = UtteranceRecord(
        utterance_id=utterance_id,
        speaker_id=speaker_id,
        native_language=accent.speaker_native,
        spoken_language=accent.target,
        sentence_id=sentence.sentence_id,
        transcript=sentence.transcript,
        accent_strength=float(accent.strength),
        feature_path=feature_path,
    )
    return matrix, record


@dataclass
class SpeakerGroup:
    """One split's worth of speakers reading one sentence list."""
    split: str
    n_speakers: int
    native_inventory: str       # key into CorpusPlan.inventories
    target_inventory: str       # language being spoken
    sentences: str              # key into CorpusPlan.sentence_sets
    alphas: list[float] = field(default_factory=list)  # per speaker; [] => all 0


@dataclass
class CorpusPlan:
    name: str
    seed: int
    dim: int = 16
    n_categories: int = 32
    spread: float = 1.0
    separation: float = 4.0
    frames_per_phone: tuple[int, int] = (2, 5)
    inventories: dict = field(default_factory=dict)   # tag -> kwargs/definition
    sentence_sets: dict = field(default_factory=dict) # name -> (inventory, n, lo, hi)
    groups: list[SpeakerGroup] = field(default_factory=list)


def build_corpus(plan: CorpusPlan, out_dir) -> dict[str, Manifest]:
    """Generate feature files and one manifest per split, deterministically.

    Per-utterance seeds are spawned from the corpus seed with a stable key,
    so serial and parallel generation produce identical bytes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "features").mkdir(exist_ok=True)

    inventories: dict[str, LanguageInventory] = {}
    # Base inventories first so a perturbed one can reference its base
    # regardless of tag ordering.
    items = sorted(plan.inventories.items(),
                   key=lambda kv: (bool(kv[1].get("perturb_of")), kv[0]))
    for i, (tag, spec) in enumerate(items):
        base = spec.get("perturb_of")
        if base:
            if base not in inventories:
                raise DisctokError(f"inventory {tag!r} perturbs unknown base {base!r}")
            inventories[tag] = perturb_inventory(
                inventories[base], tag,
                jitter=spec.get("jitter", 0.5),
                seed=np.random.SeedSequence([plan.seed, 1000 + i]),
            )
        else:
            inventories[tag] = make_inventory(
                tag,
                spec.get("n_categories", plan.n_categories),
                spec.get("dim", plan.dim),
                spec.get("separation", plan.separation),
                seed=np.random.SeedSequence([plan.seed, 1000 + i]),
                spread=spec.get("spread", plan.spread),
            )

    sentence_sets: dict[str, list[SimulatedSentence]] = {}
    for i, (name, spec) in enumerate(sorted(plan.sentence_sets.items())):
        sentence_sets[name] = sample_sentences(
            inventories[spec["inventory"]],
            spec["n_sentences"],
            tuple(spec.get("length_range", (5, 12))),
            seed=np.random.SeedSequence([plan.seed, 2000 + i]),
            id_prefix=f"{name}_",
        )

    speaker_splits: dict[str, set[str]] = {}
    manifests: dict[str, list[UtteranceRecord]] = {}
    utt_counter = 0
    for g_idx, group in enumerate(plan.groups):
        target_inv = inventories[group.target_inventory]
        speaker_inv = inventories[group.native_inventory]
        sentences = sentence_sets[group.sentences]
        alphas = group.alphas or [0.0] * group.n_speakers
        if len(alphas) != group.n_speakers:
            raise DisctokError(
                f"group {group.split}: {len(alphas)} alphas for "
                f"{group.n_speakers} speakers"
            )
        records = manifests.setdefault(group.split, [])
        for s_idx in range(group.n_speakers):
            speaker_id = f"{group.split}_spk{s_idx:03d}"
            for other_split, ids in speaker_splits.items():
                if other_split != group.split and speaker_id in ids:
                    raise DisctokError(f"speaker {speaker_id} appears in two splits")
            speaker_splits.setdefault(group.split, set()).add(speaker_id)
            accent = AccentSpec(
                speaker_native=speaker_inv.language_tag,
                target=target_inv.language_tag,
                strength=float(alphas[s_idx]),
                frames_per_phone=tuple(plan.frames_per_phone),
            )
            for sentence in sentences:
                uid = f"{group.split}_u{utt_counter:05d}"
                rel = f"features/{uid}.dtkf"
                matrix, record = synthesize_utterance(
                    sentence, target_inv, speaker_inv, accent,
                    speaker_id=speaker_id,
                    utterance_id=uid,
                    seed=np.random.SeedSequence([plan.seed, 3000 + g_idx,
                                                 s_idx, utt_counter]),
                    feature_path=rel,
                )
                write_features(matrix, out_dir / rel)
                records.append(record)
                utt_counter += 1

    result = {}
    for split, records in manifests.items():
        manifest = Manifest(records, corpus_name=f"{plan.name}/{split}")
        save_manifest(manifest, out_dir / f"{split}.jsonl")
        result[split] = manifest
    return result


def load_plan(path) -> CorpusPlan:
    """Read a corpus plan from a JSON config file; unknown keys rejected."""
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return plan_from_dict(obj)


def plan_from_dict(obj: dict) -> CorpusPlan:
    known = {"name", "seed", "dim", "n_categories", "spread", "separation",
             "frames_per_phone", "inventories", "sentence_sets", "groups"}
    extra = set(obj) - known
    if extra:
        raise DisctokError(f"unknown corpus plan keys: {sorted(extra)}")
    groups = [SpeakerGroup(**g) for g in obj.get("groups", [])]
    kwargs = {k: v for k, v in obj.items() if k != "groups"}
    if "frames_per_phone" in kwargs:
        kwargs["frames_per_phone"] = tuple(kwargs["frames_per_phone"])
    return CorpusPlan(groups=groups, **kwargs)
