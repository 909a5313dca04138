"""Long-context training data toolkit.

Ingest and census corpora, pack documents with boundary metadata, mix
domain pools by stage, plan accumulation steps against a variable-length
attention cost model, and generate synthetic SFT and evaluation data.
"""

from .corpus import Document, LengthCensus, WhitespaceTokenizer, census, concat_repo, ingest
from .packer import PackedSequence, SftExample, cu_seqlens, filter_long, pack_long, pack_short, pack_sft
from .mixer import MixtureSpec, StageCurriculum, dedup_pools, sample_stream, validate_spec
from .scheduler import CostModel, StepPlan, cost, makespan, reorder, throughput_report
from .trainmath import LossShard, RopeConfig, recipe_base, suggested_base, token_avg

__version__ = "0.1.0"
