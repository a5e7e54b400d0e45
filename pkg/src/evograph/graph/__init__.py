"""The multi-alternative graph: data model, configurations, mutation and maintenance."""
from .configs import config_product, enumerate_configs, project
from .io import (GraphFormatError, build_graph, dump_graph, graph_from_parts, graph_meta,
                 load_graph, parse_graph_document)
from .maintenance import (IMPORTANCE_THRESHOLD, IMPORTANCE_WINDOW, MaintenanceLog, canonical_key,
                          maintain, record_result, update_importance_streaks)
from .model import (GLOBALS_NODE, OUTPUT, RIDGE_G, RIDGE_W, Alternative, AltStats, Configuration,
                    EvoGraph, GraphError, node_kind, reference_problems)
from .mutation import (AppliedMutation, MutationError, MutationSet, apply_mutation, dump_mutation,
                       parse_mutation, strip_fences)

__all__ = [
    "GLOBALS_NODE", "IMPORTANCE_THRESHOLD", "IMPORTANCE_WINDOW", "OUTPUT", "RIDGE_G", "RIDGE_W",
    "Alternative", "AltStats", "AppliedMutation", "Configuration", "EvoGraph", "GraphError",
    "GraphFormatError", "MaintenanceLog", "MutationError", "MutationSet", "apply_mutation",
    "build_graph", "canonical_key", "config_product", "dump_graph", "dump_mutation",
    "enumerate_configs", "graph_from_parts", "graph_meta", "load_graph", "maintain", "node_kind",
    "parse_graph_document", "parse_mutation", "project", "record_result", "reference_problems",
    "strip_fences", "update_importance_streaks",
]
