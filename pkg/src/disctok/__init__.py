"""disctok: discrete speech-token toolkit.

Trains per-language k-means codebooks over feature matrices, tokenizes
utterances, scores tokenizations with transcript-free metrics (QE, MTER),
and runs desk-scale accent-intelligibility experiments on a synthetic
corpus generator.
"""

from .feature_store import (
    Manifest,
    UtteranceRecord,
    load_manifest,
    read_features,
    save_manifest,
    write_features,
)
from .kmeans import (
    Codebook,
    KMeansQuantizer,
    TrainConfig,
    assign,
    kmeanspp_init,
    lloyd_step,
    load_codebook,
    quantization_error,
    save_codebook,
    train,
)
from .metrics import AlignmentCost, edit_distance, mter, ter, wer
from .recognizer import TemplateIndex, build_template_index, evaluate, recognize
from .tokenizer import TokenCorpus, TokenSequence, deduplicate, tokenize, tokenize_corpus

__version__ = "0.1.0"

__all__ = [
    "AlignmentCost",
    "Codebook",
    "KMeansQuantizer",
    "Manifest",
    "TemplateIndex",
    "TokenCorpus",
    "TokenSequence",
    "TrainConfig",
    "UtteranceRecord",
    "assign",
    "build_template_index",
    "deduplicate",
    "edit_distance",
    "evaluate",
    "kmeanspp_init",
    "lloyd_step",
    "load_codebook",
    "load_manifest",
    "mter",
    "quantization_error",
    "read_features",
    "recognize",
    "save_codebook",
    "save_manifest",
    "ter",
    "tokenize",
    "tokenize_corpus",
    "train",
    "wer",
    "write_features",
]
