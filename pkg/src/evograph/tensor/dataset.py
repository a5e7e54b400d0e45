"""In-memory dataset and its on-disk manifest format.

A manifest is a JSON file::

    {"format": "evograph-dataset/1", "n_samples": 400,
     "tensors": {"full": {"shape": [400, 128], "dtype": "f32", "file": "full.f32"},
                 ...,
                 "label": {"shape": [400], "dtype": "f32", "file": "label.f32"}}}

Each raw file holds little-endian float32 values in row-major order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MANIFEST_FORMAT = "evograph-dataset/1"
LABEL_KEY = "label"


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    tensors: dict
    labels: np.ndarray
    _cast: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        self.tensors = {k: np.asarray(v, dtype=np.float32) for k, v in self.tensors.items()}
        self.validate()

    @property
    def n_samples(self) -> int:
        return int(self.labels.shape[0])

    @property
    def input_names(self) -> tuple:
        return tuple(self.tensors)

    def validate(self):
        n = self.labels.shape[0]
        if self.labels.ndim != 1:
            raise DatasetError("labels must be one-dimensional")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise DatasetError("labels must be 0/1")
        for name, t in self.tensors.items():
            if name == LABEL_KEY:
                raise DatasetError(f"{LABEL_KEY!r} is reserved for labels")
            if t.ndim == 0 or t.shape[0] != n:
                raise DatasetError(f"tensor {name!r} has leading dimension {t.shape[:1]}, expected {n}")
            if name.endswith("_mask") and not np.all((t == 0) | (t == 1)):
                raise DatasetError(f"mask tensor {name!r} contains values other than 0/1")

    def as_dtype(self, dtype) -> dict:
        """Input tensors cast to ``dtype`` (memoised)."""
        key = np.dtype(dtype).str
        if key not in self._cast:
            self._cast[key] = {k: v.astype(dtype) for k, v in self.tensors.items()}
        return self._cast[key]

    def subset(self, idx) -> "Dataset":
        return Dataset({k: v[idx] for k, v in self.tensors.items()}, self.labels[idx])

    def summary(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_positive": int(self.labels.sum()),
            "tensors": {k: {"shape": list(v.shape), "mean": float(v.mean()), "std": float(v.std())}
                        for k, v in self.tensors.items()},
        }


def save_dataset(dataset: Dataset, directory, metadata: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    arrays = dict(dataset.tensors)
    arrays[LABEL_KEY] = dataset.labels.astype(np.float32)
    for name, arr in arrays.items():
        fname = f"{name}.f32"
        np.ascontiguousarray(arr, dtype="<f4").tofile(directory / fname)
        entries[name] = {"shape": list(arr.shape), "dtype": "f32", "file": fname}
    manifest = {"format": MANIFEST_FORMAT, "n_samples": dataset.n_samples, "tensors": entries}
    if metadata:
        manifest["metadata"] = metadata
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read manifest {path}: {exc}") from exc
    tensors = manifest.get("tensors")
    if not isinstance(tensors, dict) or LABEL_KEY not in tensors:
        raise DatasetError(f"manifest {path} needs a 'tensors' mapping with a {LABEL_KEY!r} entry")
    for name, spec in tensors.items():
        if not isinstance(spec, dict) or spec.get("dtype") != "f32" or "file" not in spec:
            raise DatasetError(f"tensor {name!r}: expected {{shape, dtype: 'f32', file}}")
        if not isinstance(spec.get("shape"), list) or not all(isinstance(s, int) and s > 0
                                                              for s in spec["shape"]):
            raise DatasetError(f"tensor {name!r}: invalid shape {spec.get('shape')!r}")
    return manifest


def load_dataset(path) -> Dataset:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    manifest = read_manifest(path)
    arrays = {}
    for name, spec in manifest["tensors"].items():
        raw = np.fromfile(path.parent / spec["file"], dtype="<f4")
        shape = tuple(spec["shape"])
        if raw.size != int(np.prod(shape)):
            raise DatasetError(f"tensor {name!r}: file holds {raw.size} values, shape needs {np.prod(shape)}")
        arrays[name] = raw.reshape(shape).astype(np.float32)
    labels = arrays.pop(LABEL_KEY)
    if labels.ndim != 1:
        raise DatasetError("label tensor must be one-dimensional")
    return Dataset(arrays, labels.astype(np.int64))
