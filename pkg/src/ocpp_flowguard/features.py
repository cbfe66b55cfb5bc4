"""Per-flow feature vector computation (55-column schema) and CSV output."""

from __future__ import annotations

import csv
from typing import Iterable, Optional, Sequence

from . import appproto
from .appproto import CALL, CALLRESULT, HttpEvent, OcppMessage, WsFrame
from .decode import reassemble_direction
from .flows import Flow

SCHEMA_VERSION = "1"

# Column order is fixed; "packts" in the per-second counters is intentional
# (kept verbatim so downstream schemas match).
FEATURE_NAMES = [
    "flow_id",
    "src_ip",
    "dst_ip",
    "src_port",
    "dst_port",
    "total_flow_packets",
    "total_fw_packets",
    "total_bw_packets",
    "flow_duration",
    "flow_down_up_ratio",
    "flow_total_SYN_flag",
    "flow_total_RST_flag",
    "flow_total_PSH_flag",
    "flow_total_ACK_flag",
    "flow_total_URG_flag",
    "flow_total_CWE_flag",
    "flow_total_ECE_flag",
    "flow_total_FIN_flag",
    "flow_start_timestamp",
    "flow_end_timestamp",
    "flow_total_http_get_packets",
    "flow_total_http_2xx_packets",
    "flow_total_http_4xx_packets",
    "flow_total_http_5xx_packets",
    "flow_websocket_packts_per_second",
    "fw_websocket_packts_per_second",
    "bw_websocket_packts_per_second",
    "flow_websocket_bytes_per_second",
    "fw_websocket_bytes_per_second",
    "bw_websocket_bytes_per_second",
    "flow_total_websocket_ping_packets",
    "flow_total_websocket_pong_packets",
    "flow_total_websocket_close_packets",
    "flow_total_websocket_data_messages",
    "flow_total_ocpp16_heartbeat_packets",
    "flow_total_ocpp16_resetHard_packets",
    "flow_total_ocpp16_resetSoft_packets",
    "flow_total_ocpp16_unlockconnector_packets",
    "flow_total_ocpp16_starttransaction_packets",
    "flow_total_ocpp16_remotestarttransaction_packets",
    "flow_total_ocpp16_authorize_not_accepted_packets",
    "flow_total_ocpp16_setchargingprofile_packets",
    "flow_avg_ocpp16_setchargingprofile_limit",
    "flow_max_ocpp16_setchargingprofile_limit",
    "flow_min_ocpp16_setchargingprofile_limit",
    "flow_avg_ocpp16_setchargingprofile_minchargingrate",
    "flow_min_ocpp16_setchargingprofile_minchargingrate",
    "flow_max_ocpp16_setchargingprofile_minchargingrate",
    "flow_total_ocpp16_metervalues",
    "flow_min_ocpp16_metervalues_soc",
    "flow_max_ocpp16_metervalues_soc",
    "flow_avg_ocpp16_metervalues_wh_diff",
    "flow_max_ocpp16_metervalues_wh_diff",
    "flow_min_ocpp16_metervalues_wh_diff",
    "label",
]

# Columns the classifier trains on: packet/flag statistics plus the
# HTTP/WebSocket/OCPP counters.  Identifiers, timestamps and the label are
# excluded.
NUMERIC_FEATURES = FEATURE_NAMES[5:18] + FEATURE_NAMES[20:54]

NOT_ACCEPTED_STATUSES = {"Invalid", "Blocked", "Expired"}


def _collect_values(doc, key: str, out: list[float]) -> None:
    """Recursively collect numeric values stored under ``key`` anywhere in a document."""
    if isinstance(doc, dict):
        for k, v in doc.items():
            if k == key and isinstance(v, (int, float)) and not isinstance(v, bool):
                out.append(float(v))
            else:
                _collect_values(v, key, out)
    elif isinstance(doc, list):
        for item in doc:
            _collect_values(item, key, out)


def _stats(values: Sequence[float]) -> tuple[float, float, float]:
    """(avg, max, min); zeros when empty (the matching count column disambiguates)."""
    if not values:
        return 0.0, 0.0, 0.0
    return sum(values) / len(values), max(values), min(values)


def parse_flow_app_layers(
    flow: Flow,
) -> tuple[list[HttpEvent], list[WsFrame], list[OcppMessage]]:
    """Reassemble both directions of a flow and parse HTTP, WebSocket and OCPP.

    WebSocket parsing starts after a successful 101 upgrade.  A flow opened
    mid-connection (continuation after an active-timeout split) shows no HTTP
    at all; in that case frame parsing is attempted from the start of each
    direction.
    """
    fw_pkts = [(p, i) for i, (p, d) in enumerate(zip(flow.packets, flow.directions)) if d == "forward"]
    bw_pkts = [(p, i) for i, (p, d) in enumerate(zip(flow.packets, flow.directions)) if d == "backward"]
    times = [p.timestamp for p in flow.packets]

    fw_stream = reassemble_direction([p for p, _ in fw_pkts], "forward", [i for _, i in fw_pkts])
    bw_stream = reassemble_direction([p for p, _ in bw_pkts], "backward", [i for _, i in bw_pkts])

    fw_events, fw_up = appproto.parse_http(fw_stream)
    bw_events, bw_up = appproto.parse_http(bw_stream)
    http_events = fw_events + bw_events

    upgraded = any(e.kind == "response" and e.status_code == 101 for e in bw_events)
    frames: list[WsFrame] = []
    if upgraded:
        frames += appproto.parse_websocket(fw_stream, fw_up or 0, times)
        frames += appproto.parse_websocket(bw_stream, bw_up or 0, times)
    elif not http_events:
        frames += appproto.parse_websocket(fw_stream, 0, times)
        frames += appproto.parse_websocket(bw_stream, 0, times)
    frames = appproto.coalesce_messages(frames)
    messages, _ = appproto.parse_ocpp(frames)
    return http_events, frames, messages


def compute_features(flow: Flow, label: str = "unlabelled") -> dict:
    """Compute the full 55-column feature vector of one assembled flow."""
    http_events, frames, messages = parse_flow_app_layers(flow)
    duration = flow.duration

    fw_count = sum(1 for d in flow.directions if d == "forward")
    bw_count = len(flow.packets) - fw_count

    def flag_count(flag: str) -> int:
        return sum(1 for p in flow.packets if flag in p.tcp_flags)

    def rate(count: float) -> float:
        return count / duration if duration > 0 else 0.0

    fw_frames = [f for f in frames if f.direction == "forward"]
    bw_frames = [f for f in frames if f.direction == "backward"]

    def action_count(action: str) -> int:
        return sum(1 for m in messages if m.action == action)

    reset_calls = [m for m in messages if m.message_type == CALL and m.action == "Reset"]
    reset_hard = sum(1 for m in reset_calls
                     if isinstance(m.payload, dict) and m.payload.get("type") == "Hard")
    reset_soft = sum(1 for m in reset_calls
                     if isinstance(m.payload, dict) and m.payload.get("type") == "Soft")

    auth_not_accepted = 0
    for m in messages:
        if m.message_type == CALLRESULT and m.action == "Authorize" and isinstance(m.payload, dict):
            status = (m.payload.get("idTagInfo") or {}).get("status")
            if status in NOT_ACCEPTED_STATUSES:
                auth_not_accepted += 1

    limits: list[float] = []
    min_rates: list[float] = []
    for m in messages:
        if m.message_type == CALL and m.action == "SetChargingProfile":
            _collect_values(m.payload, "limit", limits)
            _collect_values(m.payload, "minChargingRate", min_rates)
    limit_avg, limit_max, limit_min = _stats(limits)
    mcr_avg, mcr_max, mcr_min = _stats(min_rates)

    socs: list[float] = []
    wh_by_connector: dict[object, list[float]] = {}
    for m in messages:
        if m.message_type == CALL and m.action == "MeterValues" and isinstance(m.payload, dict):
            connector = m.payload.get("connectorId")
            for mv in m.payload.get("meterValue") or []:
                for sv in (mv.get("sampledValue") or []) if isinstance(mv, dict) else []:
                    if not isinstance(sv, dict):
                        continue
                    measurand = sv.get("measurand")
                    try:
                        value = float(sv.get("value"))
                    except (TypeError, ValueError):
                        continue
                    if measurand == "SoC":
                        socs.append(value)
                    elif measurand == "Energy.Active.Import.Register":
                        wh_by_connector.setdefault(connector, []).append(value)
    wh_diffs = [b - a
                for series in wh_by_connector.values()
                for a, b in zip(series, series[1:])]
    wh_avg, wh_max, wh_min = _stats(wh_diffs)

    return {
        "flow_id": flow.flow_id,
        "src_ip": flow.src_ip,
        "dst_ip": flow.dst_ip,
        "src_port": flow.src_port,
        "dst_port": flow.dst_port,
        "total_flow_packets": len(flow.packets),
        "total_fw_packets": fw_count,
        "total_bw_packets": bw_count,
        "flow_duration": duration,
        "flow_down_up_ratio": bw_count / fw_count if fw_count else 0.0,
        "flow_total_SYN_flag": flag_count("SYN"),
        "flow_total_RST_flag": flag_count("RST"),
        "flow_total_PSH_flag": flag_count("PSH"),
        "flow_total_ACK_flag": flag_count("ACK"),
        "flow_total_URG_flag": flag_count("URG"),
        "flow_total_CWE_flag": flag_count("CWR"),
        "flow_total_ECE_flag": flag_count("ECE"),
        "flow_total_FIN_flag": flag_count("FIN"),
        "flow_start_timestamp": flow.start_ts,
        "flow_end_timestamp": flow.end_ts,
        "flow_total_http_get_packets": sum(1 for e in http_events if e.method == "GET"),
        "flow_total_http_2xx_packets": sum(1 for e in http_events
                                           if e.status_code is not None and 200 <= e.status_code < 300),
        "flow_total_http_4xx_packets": sum(1 for e in http_events
                                           if e.status_code is not None and 400 <= e.status_code < 500),
        "flow_total_http_5xx_packets": sum(1 for e in http_events
                                           if e.status_code is not None and 500 <= e.status_code < 600),
        "flow_websocket_packts_per_second": rate(len(frames)),
        "fw_websocket_packts_per_second": rate(len(fw_frames)),
        "bw_websocket_packts_per_second": rate(len(bw_frames)),
        "flow_websocket_bytes_per_second": rate(sum(len(f.payload) for f in frames)),
        "fw_websocket_bytes_per_second": rate(sum(len(f.payload) for f in fw_frames)),
        "bw_websocket_bytes_per_second": rate(sum(len(f.payload) for f in bw_frames)),
        "flow_total_websocket_ping_packets": sum(1 for f in frames if f.opcode == appproto.OPCODE_PING),
        "flow_total_websocket_pong_packets": sum(1 for f in frames if f.opcode == appproto.OPCODE_PONG),
        "flow_total_websocket_close_packets": sum(1 for f in frames if f.opcode == appproto.OPCODE_CLOSE),
        "flow_total_websocket_data_messages": sum(1 for f in frames
                                                  if f.opcode in (appproto.OPCODE_TEXT, appproto.OPCODE_BINARY)),
        "flow_total_ocpp16_heartbeat_packets": action_count("Heartbeat"),
        "flow_total_ocpp16_resetHard_packets": reset_hard,
        "flow_total_ocpp16_resetSoft_packets": reset_soft,
        "flow_total_ocpp16_unlockconnector_packets": action_count("UnlockConnector"),
        "flow_total_ocpp16_starttransaction_packets": action_count("StartTransaction"),
        "flow_total_ocpp16_remotestarttransaction_packets": action_count("RemoteStartTransaction"),
        "flow_total_ocpp16_authorize_not_accepted_packets": auth_not_accepted,
        "flow_total_ocpp16_setchargingprofile_packets": action_count("SetChargingProfile"),
        "flow_avg_ocpp16_setchargingprofile_limit": limit_avg,
        "flow_max_ocpp16_setchargingprofile_limit": limit_max,
        "flow_min_ocpp16_setchargingprofile_limit": limit_min,
        "flow_avg_ocpp16_setchargingprofile_minchargingrate": mcr_avg,
        "flow_min_ocpp16_setchargingprofile_minchargingrate": mcr_min,
        "flow_max_ocpp16_setchargingprofile_minchargingrate": mcr_max,
        "flow_total_ocpp16_metervalues": action_count("MeterValues"),
        "flow_min_ocpp16_metervalues_soc": min(socs) if socs else 0.0,
        "flow_max_ocpp16_metervalues_soc": max(socs) if socs else 0.0,
        "flow_avg_ocpp16_metervalues_wh_diff": wh_avg,
        "flow_max_ocpp16_metervalues_wh_diff": wh_max,
        "flow_min_ocpp16_metervalues_wh_diff": wh_min,
        "label": label,
    }


def format_value(value) -> str:
    """Deterministic CSV cell rendering: ints plain, floats to 6 decimals trimmed."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = f"{value:.6f}".rstrip("0").rstrip(".")
        return text if text else "0"
    return str(value)


def write_feature_csv(vectors: Iterable[dict], path: str) -> None:
    """Write feature rows ordered by (start timestamp, flow id), header first."""
    rows = sorted(vectors, key=lambda v: (v["flow_start_timestamp"], v["flow_id"]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURE_NAMES)
        for row in rows:
            writer.writerow([format_value(row[name]) for name in FEATURE_NAMES])


def read_feature_csv(path: str) -> list[dict]:
    """Read a feature CSV back; numeric columns become floats/ints."""
    out: list[dict] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FEATURE_NAMES:
            raise ValueError(f"{path}: unexpected feature CSV header")
        for raw in reader:
            row: dict = dict(raw)
            for name in ("src_port", "dst_port"):
                row[name] = int(raw[name])
            for name in NUMERIC_FEATURES + ["flow_start_timestamp", "flow_end_timestamp"]:
                row[name] = float(raw[name])
            out.append(row)
    return out
