"""HTTP upgrade, WebSocket frame, and OCPP 1.6-J payload parsing."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .decode import DirectionalStream

OPCODE_CONTINUATION = 0x0
OPCODE_TEXT = 0x1
OPCODE_BINARY = 0x2
OPCODE_CLOSE = 0x8
OPCODE_PING = 0x9
OPCODE_PONG = 0xA

_KNOWN_OPCODES = {OPCODE_CONTINUATION, OPCODE_TEXT, OPCODE_BINARY,
                  OPCODE_CLOSE, OPCODE_PING, OPCODE_PONG}

CALL = 2
CALLRESULT = 3
CALLERROR = 4

_HTTP_METHODS = {"GET", "POST", "PUT", "DELETE", "HEAD", "OPTIONS", "PATCH"}


@dataclass
class HttpEvent:
    kind: str  # "request" | "response"
    direction: str
    method: Optional[str] = None
    target: Optional[str] = None
    status_code: Optional[int] = None
    headers: dict = field(default_factory=dict)


@dataclass
class WsFrame:
    fin: bool
    opcode: int
    masked: bool
    payload: bytes
    direction: str
    timestamp: float


@dataclass
class OcppMessage:
    message_type: int  # CALL / CALLRESULT / CALLERROR
    unique_id: str
    action: str
    payload: object
    direction: str
    timestamp: float


def parse_http(stream: DirectionalStream) -> tuple[list[HttpEvent], Optional[int]]:
    """Parse leading HTTP messages out of a reassembled direction.

    Returns the events and, when the direction carries a WebSocket upgrade
    (an upgrade request, or a 101 response with ``Upgrade: websocket``), the
    byte offset where HTTP ends and WebSocket framing begins.
    """
    events: list[HttpEvent] = []
    data = stream.data
    pos = 0
    while True:
        head_end = data.find(b"\r\n\r\n", pos)
        if head_end < 0:
            return events, None
        try:
            head = data[pos:head_end].decode("latin-1")
        except UnicodeDecodeError:  # pragma: no cover - latin-1 never fails
            return events, None
        lines = head.split("\r\n")
        first = lines[0].split(" ", 2)
        headers = {}
        for line in lines[1:]:
            if ":" in line:
                k, v = line.split(":", 1)
                headers[k.strip().lower()] = v.strip()
        msg_end = head_end + 4
        try:
            msg_end += int(headers.get("content-length", "0"))
        except ValueError:
            pass
        upgrading = "websocket" in headers.get("upgrade", "").lower()

        if len(first) == 3 and first[0] in _HTTP_METHODS and first[2].startswith("HTTP/"):
            events.append(HttpEvent(kind="request", direction=stream.direction,
                                    method=first[0], target=first[1], headers=headers))
            if upgrading:
                return events, msg_end
        elif first[0].startswith("HTTP/") and len(first) >= 2 and first[1].isdigit():
            code = int(first[1])
            events.append(HttpEvent(kind="response", direction=stream.direction,
                                    status_code=code, headers=headers))
            if code == 101 and upgrading:
                return events, msg_end
        else:
            return events, None
        pos = msg_end
        if pos >= len(data):
            return events, None


def parse_websocket(
    stream: DirectionalStream,
    offset: int = 0,
    packet_times: Optional[Sequence[float]] = None,
) -> list[WsFrame]:
    """Decode WebSocket frames starting at ``offset`` in a reassembled direction.

    Applies the 4-byte unmask when the mask bit is set.  Parsing stops at a
    malformed or truncated frame; prior frames are kept.  Frame timestamps
    come from the packet that carried the frame's first byte when
    ``packet_times`` is given, else 0.
    """
    frames: list[WsFrame] = []
    data = stream.data
    pos = offset
    while pos + 2 <= len(data):
        b0, b1 = data[pos], data[pos + 1]
        rsv = (b0 >> 4) & 0x7
        opcode = b0 & 0x0F
        if rsv != 0 or opcode not in _KNOWN_OPCODES:
            break
        fin = bool(b0 & 0x80)
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        p = pos + 2
        if length == 126:
            if p + 2 > len(data):
                break
            length = struct.unpack(">H", data[p:p + 2])[0]
            p += 2
        elif length == 127:
            if p + 8 > len(data):
                break
            length = struct.unpack(">Q", data[p:p + 8])[0]
            p += 8
        key = b""
        if masked:
            if p + 4 > len(data):
                break
            key = data[p:p + 4]
            p += 4
        if p + length > len(data):
            break  # truncated frame at stream end
        payload = data[p:p + length]
        if masked:
            payload = bytes(c ^ key[i % 4] for i, c in enumerate(payload))
        ts = 0.0
        if packet_times is not None:
            ts = packet_times[stream.packet_index_at(pos)]
        frames.append(WsFrame(fin=fin, opcode=opcode, masked=masked,
                              payload=payload, direction=stream.direction, timestamp=ts))
        pos = p + length
    return frames


def coalesce_messages(frames: Sequence[WsFrame]) -> list[WsFrame]:
    """Merge continuation frames into their initial data frame.

    The merged message keeps the first fragment's opcode, direction and
    timestamp; a fragmented message therefore counts once.
    """
    out: list[WsFrame] = []
    for fr in frames:
        if fr.opcode == OPCODE_CONTINUATION and out and out[-1].opcode in (OPCODE_TEXT, OPCODE_BINARY):
            prev = out[-1]
            out[-1] = WsFrame(fin=fr.fin, opcode=prev.opcode, masked=prev.masked,
                              payload=prev.payload + fr.payload,
                              direction=prev.direction, timestamp=prev.timestamp)
        else:
            out.append(fr)
    return out


def parse_ocpp(frames: Sequence[WsFrame]) -> tuple[list[OcppMessage], int]:
    """Parse OCPP-J envelopes out of data frames (both directions, time order).

    CALL actions are recorded per unique_id so matching CALLRESULTs resolve
    their action; unmatched CALLRESULTs get action "unknown".  Returns the
    messages and a count of unparseable payloads.
    """
    pending: dict[str, str] = {}
    messages: list[OcppMessage] = []
    skipped = 0
    for fr in sorted(frames, key=lambda f: f.timestamp):
        if fr.opcode not in (OPCODE_TEXT, OPCODE_BINARY):
            continue
        try:
            doc = json.loads(fr.payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            skipped += 1
            continue
        if not isinstance(doc, list) or len(doc) < 3 or not isinstance(doc[0], int):
            skipped += 1
            continue
        mtype = doc[0]
        uid = str(doc[1])
        if mtype == CALL and len(doc) >= 4 and isinstance(doc[2], str):
            action = doc[2]
            pending[uid] = action
            payload = doc[3]
        elif mtype == CALLRESULT:
            action = pending.get(uid, "unknown")
            payload = doc[2]
        elif mtype == CALLERROR:
            action = pending.get(uid, "unknown")
            payload = doc[2:]
        else:
            skipped += 1
            continue
        messages.append(OcppMessage(message_type=mtype, unique_id=uid, action=action,
                                    payload=payload, direction=fr.direction,
                                    timestamp=fr.timestamp))
    return messages, skipped
