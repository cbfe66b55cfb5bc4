"""End-to-end detection: capture file -> flows -> features -> verdicts -> events."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .decode import Decoder
from .features import FEATURE_NAMES, NUMERIC_FEATURES, compute_features, format_value
from .fl import model as nn
from .flows import assemble_flows
from .modelfile import TrainedModel
from .pcap import read_pcap
from .syslogout import Sink, emit_syslog

# most telling columns per attack class, reported alongside each event
CONTRIBUTING_FEATURES = {
    "ProfileManipulation": ["flow_max_ocpp16_setchargingprofile_limit"],
    "DenialOfCharge": [
        "flow_total_ocpp16_starttransaction_packets",
        "flow_total_ocpp16_authorize_not_accepted_packets",
        "flow_total_ocpp16_remotestarttransaction_packets",
    ],
    "HeartbeatFlood": [
        "src_ip", "dst_ip", "total_flow_packets", "total_fw_packets",
        "total_bw_packets", "flow_total_PSH_flag", "flow_total_ACK_flag",
        "flow_total_websocket_data_messages", "flow_total_ocpp16_heartbeat_packets",
    ],
    "UnauthorizedAccess": [
        "flow_total_FIN_flag", "flow_total_http_4xx_packets",
        "flow_total_http_get_packets",
    ],
}


@dataclass
class SecurityEvent:
    timestamp: float
    flow_id: str
    src_ip: str
    dst_ip: str
    label: str
    confidence: float
    contributing: dict


def extract_feature_rows(pcap_path: str) -> list[dict]:
    """Decode a capture and compute the feature vector of every flow."""
    decoder = Decoder()
    packets = []
    for raw in read_pcap(pcap_path):
        pkt = decoder.decode(raw.timestamp, raw.link_bytes)
        if pkt is not None:
            packets.append(pkt)
    rows = [compute_features(flow) for flow in assemble_flows(packets)]
    rows.sort(key=lambda r: (r["flow_start_timestamp"], r["flow_id"]))
    return rows


def detect(
    pcap_path: str,
    model: TrainedModel,
    audit_csv: Optional[str] = None,
    sink: Optional[Sink] = None,
) -> list[SecurityEvent]:
    """Classify every flow of a capture; emit one event per non-normal verdict.

    The full per-flow verdict table (features + predicted label + score) is
    written to ``audit_csv`` when given.
    """
    rows = extract_feature_rows(pcap_path)
    events: list[SecurityEvent] = []
    verdicts: list[tuple[str, float]] = []
    if rows:
        X = np.array([[row[name] for name in NUMERIC_FEATURES] for row in rows], dtype=float)
        probs = nn.predict_proba(model.params, model.scaler.transform(X), model.layout)
        for row, p in zip(rows, probs):
            cls = int(p.argmax())
            label = model.labels[cls]
            score = float(p[cls])
            verdicts.append((label, score))
            if label == "normal":
                continue
            contributing = {name: row[name] for name in CONTRIBUTING_FEATURES.get(label, [])}
            events.append(SecurityEvent(
                timestamp=row["flow_start_timestamp"], flow_id=row["flow_id"],
                src_ip=row["src_ip"], dst_ip=row["dst_ip"],
                label=label, confidence=score, contributing=contributing))

    if audit_csv is not None:
        with open(audit_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(FEATURE_NAMES + ["predicted_label", "score"])
            for row, (label, score) in zip(rows, verdicts):
                writer.writerow([format_value(row[n]) for n in FEATURE_NAMES]
                                + [label, f"{score:.6f}"])
    if sink is not None:
        for event in events:
            emit_syslog(event, sink)
    return events
