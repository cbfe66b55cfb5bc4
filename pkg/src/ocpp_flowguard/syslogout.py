"""RFC 5424 security-event delivery to a file or UDP syslog sink."""

from __future__ import annotations

import logging
import socket
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Union

log = logging.getLogger(__name__)

FACILITY = 13  # log audit
SEVERITY = 4   # warning
PRI = FACILITY * 8 + SEVERITY
APP_NAME = "ocpp-flowguard"
SD_ID = "ocppfg@32473"


@dataclass(frozen=True)
class FileSink:
    path: str


@dataclass(frozen=True)
class UdpSink:
    host: str
    port: int


Sink = Union[FileSink, UdpSink]


def _sd_escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"').replace("]", "\\]")


def format_event(event) -> str:
    """One RFC 5424 message line for a :class:`~ocpp_flowguard.detect.SecurityEvent`."""
    ts = datetime.fromtimestamp(event.timestamp, tz=timezone.utc)
    stamp = ts.strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z"
    params = [
        ("flow_id", event.flow_id),
        ("label", event.label),
        ("confidence", f"{event.confidence:.4f}"),
        ("src", event.src_ip),
        ("dst", event.dst_ip),
    ]
    sd = "[" + SD_ID + "".join(f' {k}="{_sd_escape(str(v))}"' for k, v in params) + "]"
    msg = (f"detected {event.label} flow {event.flow_id} "
           f"({event.src_ip} -> {event.dst_ip}, confidence {event.confidence:.2f})")
    return f"<{PRI}>1 {stamp} {socket.gethostname()} {APP_NAME} - - {sd} {msg}"


def emit_syslog(event, sink: Sink) -> None:
    """Send one event; a failed UDP send is retried once, then dropped with a log line."""
    line = format_event(event)
    if isinstance(sink, FileSink):
        with open(sink.path, "a") as fh:
            fh.write(line + "\n")
        return
    data = line.encode("utf-8")
    for attempt in (1, 2):
        try:
            with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
                sock.sendto(data, (sink.host, sink.port))
            return
        except OSError as exc:
            if attempt == 2:
                log.error("dropping security event after UDP failures: %s", exc)
