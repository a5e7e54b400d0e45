"""Tensor evaluation: datasets, the globals store, builtins and the interpreter."""
from .dataset import Dataset, DatasetError, load_dataset, read_manifest, save_dataset
from .evaluator import (EvalCache, EvalError, FeatureMatrix, GraphEvaluation, evaluate_node,
                        evaluate_outputs, grad_globals, tape_outputs)
from .globals_store import AppendOnlyViolation, GlobalEntry, GlobalsStore, evaluate_init

__all__ = [
    "AppendOnlyViolation", "Dataset", "DatasetError", "EvalCache", "EvalError", "FeatureMatrix",
    "GlobalEntry", "GlobalsStore", "GraphEvaluation", "evaluate_init", "evaluate_node",
    "evaluate_outputs", "grad_globals", "load_dataset", "read_manifest", "save_dataset",
    "tape_outputs",
]
