"""
mt-qc

Machine translation quality classification: decide which MT outputs are
adequate as-is and which need post-editing.

This package provides:
- WMT-style QE data ingestion with HTER labels and good/bad label derivation
- TER/HTER scoring with greedy block shifts
- Token feature sequences from directional n-gram LMs, a lexical table and embeddings
- A bidirectional recurrent predictor with classification and regression heads
- R@P_t, PR curves and the regression-threshold baseline
- Grid search and a command line for the full pipeline
"""

from .__about__ import __version__
from .corpus import (
    DatasetSplit,
    Label,
    QCSample,
    QESample,
    derive_labels,
    load_qe_dataset,
    read_qc_tsv,
    split_stats,
    tokenize,
    write_qc_tsv,
)
from .errors import QCError
from .features import (
    FeatureExtractor,
    SentenceFeatureSequence,
    export_features,
    extract_features,
    import_features,
)
from .grid import GridRanges, grid_search
from .metrics import pr_curve, r_at_p, regression_threshold_sweep
from .model import ModelConfig, ModelParams, classify, regress, train
from .ter import hter, ter

__all__ = [
    "__version__",
    "DatasetSplit",
    "FeatureExtractor",
    "GridRanges",
    "Label",
    "ModelConfig",
    "ModelParams",
    "QCError",
    "QCSample",
    "QESample",
    "SentenceFeatureSequence",
    "classify",
    "derive_labels",
    "export_features",
    "extract_features",
    "grid_search",
    "hter",
    "import_features",
    "load_qe_dataset",
    "pr_curve",
    "r_at_p",
    "read_qc_tsv",
    "regress",
    "regression_threshold_sweep",
    "split_stats",
    "ter",
    "tokenize",
    "train",
    "write_qc_tsv",
]
