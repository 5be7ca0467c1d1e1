"""Consensus story networks, event sequencing and character impressions."""

from .actants import Event, MentionMap, RelationClusterSet
from .config import PipelineConfig
from .denscluster import PhraseCluster
from .embedstore import EmbeddingTable
from .ingest import RelationTuple, ReviewCorpus, StopEntityList
from .rev2seq import PrecedenceMatrix, SequenceGraph
from .sent2imp import Heatmap, ImpressionMixture
from .storygraph import StoryGraph
from .synth import GroundTruth

__version__ = "0.1.0"

__all__ = [
    "Event",
    "EmbeddingTable",
    "GroundTruth",
    "Heatmap",
    "ImpressionMixture",
    "MentionMap",
    "PhraseCluster",
    "PipelineConfig",
    "PrecedenceMatrix",
    "RelationClusterSet",
    "RelationTuple",
    "ReviewCorpus",
    "SequenceGraph",
    "StopEntityList",
    "StoryGraph",
    "__version__",
]
