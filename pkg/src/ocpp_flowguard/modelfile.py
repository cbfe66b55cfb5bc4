"""Versioned on-disk model format: layout, scaler, labels and flat parameters."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .features import NUMERIC_FEATURES, SCHEMA_VERSION
from .fl.data import LABELS, MinMaxScaler

FORMAT_VERSION = 1


class ModelFileError(Exception):
    pass


@dataclass
class TrainedModel:
    layout: tuple[int, ...]
    params: np.ndarray
    scaler: MinMaxScaler
    labels: list[str]
    feature_names: list[str]
    schema_version: str = SCHEMA_VERSION

    def save(self, path: str) -> None:
        doc = {
            "format_version": FORMAT_VERSION,
            "schema_version": self.schema_version,
            "feature_names": self.feature_names,
            "labels": self.labels,
            "layout": list(self.layout),
            "scaler": self.scaler.to_dict(),
            "params": self.params.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path: str) -> "TrainedModel":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
        if doc.get("format_version") != FORMAT_VERSION:
            raise ModelFileError(f"unsupported model format {doc.get('format_version')}")
        if doc.get("schema_version") != SCHEMA_VERSION or doc.get("feature_names") != NUMERIC_FEATURES:
            raise ModelFileError(
                f"feature schema mismatch: model has version "
                f"{doc.get('schema_version')!r}, extractor is {SCHEMA_VERSION!r}")
        return cls(
            layout=tuple(doc["layout"]),
            params=np.array(doc["params"], dtype=float),
            scaler=MinMaxScaler.from_dict(doc["scaler"]),
            labels=list(doc["labels"]),
            feature_names=list(doc["feature_names"]),
            schema_version=doc["schema_version"],
        )

    @classmethod
    def new(cls, params: np.ndarray, scaler: MinMaxScaler,
            layout: tuple[int, ...]) -> "TrainedModel":
        return cls(layout=layout, params=params, scaler=scaler,
                   labels=list(LABELS), feature_names=list(NUMERIC_FEATURES))
