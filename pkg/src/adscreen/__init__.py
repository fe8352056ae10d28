"""Explainable Cookie Theft description features for Alzheimer's screening."""
from .ingest import ManifestEntry, Transcript, load_manifest, parse_chat, parse_plain
from .model import EvalReport, ForestConfig, ForestModel, anova_f, evaluate, train_forest
from .refscore import ReferenceSet, bleu_n, meteor, score_against_references
from .taskfeat import FEATURE_NAMES, FeatureVector, KeywordSet, assemble_features
from .textproc import TokenizedDoc, ngrams, stem, tokenize
from .tfidf import TfIdfModel, fit, similarity_features, tfidf_keyword_hit_rate

__version__ = "0.1.0"
