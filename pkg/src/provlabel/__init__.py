"""View-adaptive reachability labeling for workflow runs."""

from .analysis import Analysis, UnsafeError, UnproductiveError, analyze, compute_full_assignment
from .decoder import NotVisibleError, QueryVerdict, decode, inputs_matrix, outputs_matrix, query_bound
from .io import load_grammar, load_view, save_grammar, save_view
from .labeling import DataLabel, decode_label, derive_labeled, encode_label, label_run
from .matrix import BoolMatrix, PowerTable
from .model import View, WorkflowGrammar, default_view, restrict_grammar, validate_grammar
from .oracle import oracle_reachable
from .run import RunState, Step, read_log, replay, start_run, write_log
from .synthgen import GenParams, gen_grammar, gen_run, gen_safe_view
from .viewlabel import ViewLabel, label_view

__all__ = [
    "Analysis",
    "BoolMatrix",
    "DataLabel",
    "GenParams",
    "NotVisibleError",
    "PowerTable",
    "QueryVerdict",
    "RunState",
    "Step",
    "UnproductiveError",
    "UnsafeError",
    "View",
    "ViewLabel",
    "WorkflowGrammar",
    "analyze",
    "compute_full_assignment",
    "decode",
    "decode_label",
    "default_view",
    "derive_labeled",
    "encode_label",
    "gen_grammar",
    "gen_run",
    "gen_safe_view",
    "inputs_matrix",
    "label_run",
    "label_view",
    "load_grammar",
    "load_view",
    "oracle_reachable",
    "outputs_matrix",
    "query_bound",
    "read_log",
    "replay",
    "restrict_grammar",
    "save_grammar",
    "save_view",
    "start_run",
    "validate_grammar",
    "write_log",
]
