"""Behavioural DNA of social accounts: encoding, families, alignment, mutations."""

from .alignment import AlignmentScoring, FamilyAligner, align_family, pairwise_align
from .clustering import BehaviourFamilies, average_linkage, cut_tree
from .core import BehaviourSequence, build_sequence, decode_block, encode_post
from .ingestion import SequenceEncoder, parse_trace_file
from .mutations import MutationType, detect_family_mutations, mutation_stats
from .pipeline import PipelineConfig, run_pipeline
from .similarity import BlockVectorizer, SimilarityMatrix

__version__ = "0.1.0"

__all__ = [
    "AlignmentScoring", "BehaviourFamilies", "BehaviourSequence", "BlockVectorizer",
    "FamilyAligner", "MutationType", "PipelineConfig", "SequenceEncoder", "SimilarityMatrix",
    "align_family", "average_linkage", "build_sequence", "cut_tree", "decode_block",
    "detect_family_mutations", "encode_post", "mutation_stats", "pairwise_align",
    "parse_trace_file", "run_pipeline",
]
