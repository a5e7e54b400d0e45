"""Feature and subnode diagnostics and their TOON rendering."""
from .bundle import DiagnosticsBundle, build_diagnostics
from .features import (FeatureDiag, GlobalFit, effect_size, effective_rank, feature_diagnostics,
                       global_fit, importance, redundancy, shap_values, weight_stability)
from .subnodes import SubnodeDiag, subnode_aggregates, subnode_name, toon_depth
from .toon import (FEATURE_FIELDS, SUBNODE_FIELDS, ToonFormatError, ToonReport, emit_toon,
                   parse_toon, quantize, quantize_context)

__all__ = [
    "DiagnosticsBundle", "build_diagnostics", "FeatureDiag", "GlobalFit", "effect_size",
    "effective_rank", "feature_diagnostics", "global_fit", "importance", "redundancy",
    "shap_values", "weight_stability", "SubnodeDiag", "subnode_aggregates", "subnode_name",
    "toon_depth", "FEATURE_FIELDS", "SUBNODE_FIELDS", "ToonFormatError", "ToonReport",
    "emit_toon", "parse_toon", "quantize", "quantize_context",
]
