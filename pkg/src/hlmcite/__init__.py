"""Core-citation prediction: dense retrieval cascaded into LLM agentic
reranking, with graph-derived labels and a full evaluation harness."""

from .corpus import Corpus, PaperRecord, keyword_overlap, load_corpus
from .graph import CitationGraph, CoreLabelResult, build_graph, label_citations, load_edges
from .metrics import GradedRanking, ndcg_at_k, precision_at_k
from .rerank import FinalSelection, RerankPlan, parse_ranked_order, plan_split, rerank
from .sampling import EvalInstance, QuerySample, build_eval_instance, sample_queries, split_train_test
from .stats import aggregate, two_tailed_ttest
from .vectors import RetrievalResult, VectorStore, load_store, save_store, top_k

__all__ = [
    "Corpus", "PaperRecord", "keyword_overlap", "load_corpus",
    "CitationGraph", "CoreLabelResult", "build_graph", "label_citations", "load_edges",
    "GradedRanking", "ndcg_at_k", "precision_at_k",
    "FinalSelection", "RerankPlan", "parse_ranked_order", "plan_split", "rerank",
    "EvalInstance", "QuerySample", "build_eval_instance", "sample_queries", "split_train_test",
    "aggregate", "two_tailed_ttest",
    "RetrievalResult", "VectorStore", "load_store", "save_store", "top_k",
]

__version__ = "0.1.0"
