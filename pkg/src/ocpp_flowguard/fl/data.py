"""Dataset assembly: truth join, label encoding, pooled min-max scaling."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..features import NUMERIC_FEATURES, read_feature_csv

LABELS = ["normal", "ProfileManipulation", "DenialOfCharge",
          "HeartbeatFlood", "UnauthorizedAccess"]
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}


class JoinError(Exception):
    """Raised when feature rows cannot be joined onto ground truth."""


@dataclass
class Dataset:
    X: np.ndarray          # (n, len(NUMERIC_FEATURES))
    y: np.ndarray          # class indices into LABELS
    hubs: np.ndarray       # per-row hub id
    flow_ids: list[str]

    def __len__(self) -> int:
        return len(self.y)

    def partition_by_hub(self) -> dict[int, "Dataset"]:
        out = {}
        for hub in sorted(set(self.hubs.tolist())):
            mask = self.hubs == hub
            idx = np.where(mask)[0]
            out[hub] = Dataset(self.X[mask], self.y[mask], self.hubs[mask],
                               [self.flow_ids[i] for i in idx])
        return out


def read_truth_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["src_port"] = int(r["src_port"])
        r["dst_port"] = int(r["dst_port"])
        r["start"] = float(r["start"])
        r["end"] = float(r["end"])
        r["hub"] = int(r.get("hub", 0))
    return rows


def _canonical(ip_a: str, port_a: int, ip_b: str, port_b: int):
    return tuple(sorted([(ip_a, port_a), (ip_b, port_b)]))


def label_flows(feature_rows: list[dict], truth_rows: list[dict],
                benign_run: bool = False) -> tuple[list[str], list[int], int]:
    """Label each flow from truth entries by key match plus time-window overlap.

    Attack entries take precedence over normal spans.  Returns (labels, hubs,
    unmatched count); unmatched flows are labeled "normal" when ``benign_run``
    else left as None in the labels list.
    """
    by_key: dict[tuple, list[dict]] = {}
    for t in truth_rows:
        key = _canonical(t["src_ip"], t["src_port"], t["dst_ip"], t["dst_port"])
        by_key.setdefault(key, []).append(t)

    labels: list[Optional[str]] = []
    hubs: list[int] = []
    unmatched = 0
    slack = 1.0  # handshake/teardown packets sit just outside the app-event span
    for row in feature_rows:
        key = _canonical(row["src_ip"], row["src_port"], row["dst_ip"], row["dst_port"])
        start, end = row["flow_start_timestamp"], row["flow_end_timestamp"]
        label, hub = None, 0
        candidates = by_key.get(key, [])
        for t in candidates:
            if t["label"] != "normal" and t["start"] <= end + slack and start - slack <= t["end"]:
                label, hub = t["label"], t["hub"]
                break
        if label is None:
            for t in candidates:
                if t["label"] == "normal" and t["start"] <= end + slack and start - slack <= t["end"]:
                    label, hub = "normal", t["hub"]
                    break
        if label is None:
            unmatched += 1
            label = "normal" if benign_run else None
        labels.append(label)
        hubs.append(hub)
    return labels, hubs, unmatched


def load_dataset(feature_csvs: Sequence[str], truth_csvs: Sequence[str],
                 benign_run: bool = False, min_join_rate: float = 0.95) -> Dataset:
    """Join extracted feature CSVs onto simulator truth files."""
    feature_rows: list[dict] = []
    for p in feature_csvs:
        feature_rows.extend(read_feature_csv(p))
    truth_rows: list[dict] = []
    for p in truth_csvs:
        truth_rows.extend(read_truth_csv(p))
    if not feature_rows:
        raise JoinError("no feature rows to load")

    labels, hubs, unmatched = label_flows(feature_rows, truth_rows, benign_run)
    join_rate = 1.0 - unmatched / len(feature_rows)
    if join_rate < min_join_rate:
        raise JoinError(
            f"only {join_rate:.1%} of {len(feature_rows)} flows joined onto truth "
            f"(need {min_join_rate:.0%}); are the files from the same run?")
    if unmatched:
        warnings.warn(f"{unmatched} unlabeled flows dropped")

    keep = [i for i, lab in enumerate(labels) if lab is not None]
    X = np.array([[feature_rows[i][name] for name in NUMERIC_FEATURES] for i in keep])
    y = np.array([LABEL_INDEX[labels[i]] for i in keep])
    hub_arr = np.array([hubs[i] for i in keep])
    flow_ids = [feature_rows[i]["flow_id"] for i in keep]
    return Dataset(X=X, y=y, hubs=hub_arr, flow_ids=flow_ids)


@dataclass
class MinMaxScaler:
    """Column-wise min-max scaler fitted from pooled per-client (min, max) vectors.

    Only the (min, max) statistics ever leave a client; constant columns map
    to 0.
    """

    col_min: np.ndarray
    col_max: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "MinMaxScaler":
        return cls(col_min=X.min(axis=0), col_max=X.max(axis=0))

    @classmethod
    def fit_pooled(cls, stats: Sequence[tuple[np.ndarray, np.ndarray]]) -> "MinMaxScaler":
        mins = np.min([s[0] for s in stats], axis=0)
        maxs = np.max([s[1] for s in stats], axis=0)
        return cls(col_min=mins, col_max=maxs)

    def transform(self, X: np.ndarray) -> np.ndarray:
        span = self.col_max - self.col_min
        safe = np.where(span > 0, span, 1.0)
        out = (X - self.col_min) / safe
        return np.where(span > 0, out, 0.0)

    def to_dict(self) -> dict:
        return {"min": self.col_min.tolist(), "max": self.col_max.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "MinMaxScaler":
        return cls(col_min=np.array(doc["min"], dtype=float),
                   col_max=np.array(doc["max"], dtype=float))


def stratified_split(y: np.ndarray, test_fraction: float,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; every class keeps at least one training row."""
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cls in np.unique(y):
        idx = np.where(y == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(len(idx) * test_fraction))
        n_test = min(n_test, len(idx) - 1)
        test_idx.extend(idx[:n_test].tolist())
        train_idx.extend(idx[n_test:].tolist())
    return np.array(sorted(train_idx)), np.array(sorted(test_idx))
