"""Deterministic generator of labeled benign and attack OCPP 1.6-J traffic.

Traffic is modeled in two phases: sessions carry application-level events
(HTTP upgrade, OCPP calls/results, WebSocket close), and rendering turns the
event timeline into TCP-realistic packets (handshake, seq/ack, teardown).
Attack injectors transform the event timeline, so sequence numbers and frame
lengths are always consistent after a payload edit.
"""

from __future__ import annotations

import json
import warnings
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .decode import DecodedPacket, serialize_packet
from .pcap import RawPacket, write_pcap as _write_pcap_file

LABEL_NORMAL = "normal"
LABEL_PROFILE = "ProfileManipulation"
LABEL_DOC = "DenialOfCharge"
LABEL_FLOOD = "HeartbeatFlood"
LABEL_UNAUTH = "UnauthorizedAccess"

ATTACK_KINDS = (LABEL_PROFILE, LABEL_DOC, LABEL_FLOOD, LABEL_UNAUTH)


@dataclass
class HubConfig:
    stations: int = 2
    base_ip: str = "10.1.0"  # stations get .10, .11, ...; attackers .200+
    evcsms: str = "10.0.0.1:8180"

    def station_ip(self, idx: int) -> str:
        return f"{self.base_ip}.{10 + idx}"

    def attacker_ip(self, idx: int) -> str:
        return f"{self.base_ip}.{200 + idx}"

    @property
    def evcsms_addr(self) -> tuple[str, int]:
        host, port = self.evcsms.rsplit(":", 1)
        return host, int(port)


@dataclass
class AttackConfig:
    kind: str
    start: float
    end: float
    injected_limit: float = 80.0
    bot_count: int = 3
    heartbeat_period: float = 1.0
    retry_period: float = 5.0
    hub: int = 0  # which hub's EVCSMS/subnet the attack targets


@dataclass
class SimConfig:
    hubs: list[HubConfig] = field(default_factory=lambda: [
        HubConfig(stations=2, base_ip="10.1.0"),
        HubConfig(stations=10, base_ip="10.2.0"),
    ])
    duration: float = 600.0
    heartbeat_interval: float = 300.0
    transaction_rate: float = 2.0        # mean transactions / hour / station
    charging_profile_rate: float = 2.0   # mean SetChargingProfile / hour / station
    seed: int = 0
    attacks: list[AttackConfig] = field(default_factory=list)
    session_lifetime: Optional[float] = None  # None: one session for the whole run
    metervalues_interval: float = 60.0
    limit_range: tuple[float, float] = (8.0, 32.0)
    base_time: float = 1_700_000_000.0
    authorize_remote_tx: bool = True

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        hubs = [HubConfig(**h) for h in doc.pop("hubs", [])] or None
        attacks = [AttackConfig(**a) for a in doc.pop("attacks", [])]
        single = doc.pop("attack", None)
        if single:
            attacks.append(AttackConfig(**single))
        if "limit_range" in doc:
            doc["limit_range"] = tuple(doc["limit_range"])
        cfg = cls(**doc, attacks=attacks)
        if hubs is not None:
            cfg.hubs = hubs
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "SimConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class AppEvent:
    t: float
    direction: str  # "forward" = station -> EVCSMS
    kind: str       # "http_request" | "http_response" | "ocpp" | "ws_close"
    msg_type: int = 0
    uid: str = ""
    action: str = ""
    payload: object = None
    http_target: str = ""
    http_status: int = 0
    txn: Optional[int] = None


@dataclass
class Session:
    client: tuple[str, int]
    server: tuple[str, int]
    hub: int
    station_id: str
    open_t: float
    close_t: float
    events: list[AppEvent] = field(default_factory=list)
    role: str = "benign"  # "benign" | "flood" | "unauth"
    seed_key: tuple = ()


@dataclass
class TruthEntry:
    src_ip: str
    src_port: int
    dst_ip: str
    dst_port: int
    start: float
    end: float
    label: str
    hub: int


@dataclass
class PacketTrace:
    """Event-level trace plus rendered packets and ground-truth labels."""

    config: SimConfig
    sessions: list[Session] = field(default_factory=list)
    attack_truth: list[TruthEntry] = field(default_factory=list)
    _packets: Optional[list[DecodedPacket]] = field(default=None, repr=False)

    @property
    def packets(self) -> list[DecodedPacket]:
        if self._packets is None:
            self._packets = render_trace(self)
        return self._packets

    def invalidate(self) -> None:
        self._packets = None

    def truth_entries(self) -> list[TruthEntry]:
        """Attack entries first (they take precedence on join), then per-session normal spans."""
        normal = [
            TruthEntry(s.client[0], s.client[1], s.server[0], s.server[1],
                       s.open_t, s.close_t, LABEL_NORMAL, s.hub)
            for s in self.sessions if s.role == "benign"
        ]
        return list(self.attack_truth) + normal


def _stable_key(k) -> int:
    if isinstance(k, int):
        return k & 0xFFFFFFFF
    return zlib.crc32(repr(k).encode())


def _session_rng(cfg: SimConfig, *key) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((cfg.seed,) + tuple(_stable_key(k) for k in key)))


# ---------------------------------------------------------------------------
# benign event generation

def _gen_session_events(cfg: SimConfig, sess: Session, rng: np.random.Generator) -> None:
    t0, t1 = sess.open_t, sess.close_t
    uid = iter(range(1, 1_000_000))

    def call(t, direction, action, payload, txn=None) -> str:
        u = str(next(uid))
        sess.events.append(AppEvent(t=t, direction=direction, kind="ocpp", msg_type=2,
                                    uid=u, action=action, payload=payload, txn=txn))
        return u

    def result(t, direction, u, action, payload, txn=None) -> None:
        sess.events.append(AppEvent(t=t, direction=direction, kind="ocpp", msg_type=3,
                                    uid=u, action=action, payload=payload, txn=txn))

    def now_iso(t: float) -> str:
        return f"@{t:.3f}"  # opaque timestamp token; decoded traffic only needs a string

    sess.events.append(AppEvent(t=t0 + 0.004, direction="forward", kind="http_request",
                                http_target=f"/ocpp/{sess.station_id}"))
    sess.events.append(AppEvent(t=t0 + 0.006, direction="backward", kind="http_response",
                                http_status=101))

    u = call(t0 + 0.020, "forward", "BootNotification",
             {"chargePointVendor": "SimVendor", "chargePointModel": "SimModel"})
    result(t0 + 0.030, "backward", u, "BootNotification",
           {"status": "Accepted", "currentTime": now_iso(t0), "interval": cfg.heartbeat_interval})

    # heartbeats: one right after boot (clock sync), then every interval,
    # strictly inside the session
    k = 0
    while t0 + 0.050 + k * cfg.heartbeat_interval < t1 - 0.5:
        th = t0 + 0.050 + k * cfg.heartbeat_interval
        u = call(th, "forward", "Heartbeat", {})
        result(th + 0.010, "backward", u, "Heartbeat", {"currentTime": now_iso(th)})
        k += 1

    span = t1 - t0
    # transactions (remote start -> authorize -> start -> meter values -> stop)
    n_txn = rng.poisson(cfg.transaction_rate * span / 3600.0)
    meter_wh = float(rng.integers(100_000, 900_000))
    txn_counter = 0
    cursor = t0 + 1.0
    for _ in range(n_txn):
        # sequential transactions: one EV per connector at a time keeps the
        # energy register monotone in arrival order
        ts = cursor + rng.uniform(0.0, max((t1 - cursor) * 0.3, 1.0))
        te = min(ts + rng.uniform(30.0, 600.0), t1 - 2.0)
        if te - ts < 10.0:
            continue
        cursor = te + 1.0
        txn_counter += 1
        txn = txn_counter
        tag = f"TAG{rng.integers(0, 16**8):08X}"
        u = call(ts, "backward", "RemoteStartTransaction", {"idTag": tag}, txn)
        result(ts + 0.010, "forward", u, "RemoteStartTransaction", {"status": "Accepted"}, txn)
        if cfg.authorize_remote_tx:
            u = call(ts + 0.050, "forward", "Authorize", {"idTag": tag}, txn)
            result(ts + 0.060, "backward", u, "Authorize",
                   {"idTagInfo": {"status": "Accepted"}}, txn)
        u = call(ts + 0.100, "forward", "StartTransaction",
                 {"connectorId": 1, "idTag": tag, "meterStart": int(meter_wh),
                  "timestamp": now_iso(ts)}, txn)
        result(ts + 0.110, "backward", u, "StartTransaction",
               {"transactionId": txn, "idTagInfo": {"status": "Accepted"}}, txn)
        soc = float(rng.uniform(10.0, 50.0))
        tm = ts + cfg.metervalues_interval
        while tm < te - 1.0:
            meter_wh += float(rng.uniform(50.0, 400.0))
            soc = min(soc + float(rng.uniform(0.5, 3.0)), 100.0)
            u = call(tm, "forward", "MeterValues",
                     {"connectorId": 1, "transactionId": txn,
                      "meterValue": [{"timestamp": now_iso(tm), "sampledValue": [
                          {"value": f"{meter_wh:.0f}",
                           "measurand": "Energy.Active.Import.Register", "unit": "Wh"},
                          {"value": f"{soc:.1f}", "measurand": "SoC", "unit": "Percent"},
                      ]}]}, txn)
            result(tm + 0.010, "backward", u, "MeterValues", {}, txn)
            tm += cfg.metervalues_interval
        meter_wh += float(rng.uniform(50.0, 400.0))
        u = call(te, "forward", "StopTransaction",
                 {"transactionId": txn, "meterStop": int(meter_wh), "timestamp": now_iso(te)}, txn)
        result(te + 0.010, "backward", u, "StopTransaction",
               {"idTagInfo": {"status": "Accepted"}}, txn)

    # charging profiles pushed by the EVCSMS
    n_prof = rng.poisson(cfg.charging_profile_rate * span / 3600.0)
    lo, hi = cfg.limit_range
    for _ in range(n_prof):
        tp = t0 + 1.0 + rng.uniform(0.0, max(span - 5.0, 1.0))
        n_periods = int(rng.integers(1, 4))
        periods = [{"startPeriod": i * 3600, "limit": float(rng.integers(int(lo), int(hi) + 1)),
                    "numberPhases": 3} for i in range(n_periods)]
        u = call(tp, "backward", "SetChargingProfile",
                 {"connectorId": 1, "csChargingProfiles": {
                     "chargingProfileId": 1, "stackLevel": 1,
                     "chargingProfilePurpose": "TxDefaultProfile",
                     "chargingProfileKind": "Absolute",
                     "chargingSchedule": {"duration": 86400, "chargingRateUnit": "A",
                                          "chargingSchedulePeriod": periods}}})
        result(tp + 0.010, "forward", u, "SetChargingProfile", {"status": "Accepted"})

    sess.events.append(AppEvent(t=t1 - 0.020, direction="forward", kind="ws_close"))
    sess.events.append(AppEvent(t=t1 - 0.010, direction="backward", kind="ws_close"))
    sess.events.sort(key=lambda e: e.t)


def simulate_benign(cfg: SimConfig) -> PacketTrace:
    """Generate the benign traffic of all hubs; fully determined by cfg.seed."""
    trace = PacketTrace(config=cfg)
    for hub_idx, hub in enumerate(cfg.hubs):
        server = hub.evcsms_addr
        for st_idx in range(hub.stations):
            ip = hub.station_ip(st_idx)
            station_id = f"CS{hub_idx:02d}{st_idx:03d}"
            stagger_rng = _session_rng(cfg, "stagger", hub_idx, st_idx)
            stagger = float(stagger_rng.uniform(0.0, 2.0))
            if cfg.session_lifetime is None:
                windows = [(stagger, cfg.duration)]
            else:
                windows = []
                t = stagger
                while t < cfg.duration - 5.0:
                    life = float(stagger_rng.uniform(0.8, 1.2) * cfg.session_lifetime)
                    end = min(t + life, cfg.duration)
                    windows.append((t, end))
                    t = end + float(stagger_rng.uniform(1.0, 5.0))
            for sess_idx, (t_open, t_close) in enumerate(windows):
                sess = Session(
                    client=(ip, 40000 + sess_idx),
                    server=server,
                    hub=hub_idx,
                    station_id=station_id,
                    open_t=cfg.base_time + t_open,
                    close_t=cfg.base_time + t_close,
                    seed_key=("benign", hub_idx, st_idx, sess_idx),
                )
                rng = _session_rng(cfg, *sess.seed_key)
                _gen_session_events(cfg, sess, rng)
                trace.sessions.append(sess)
    return trace


# ---------------------------------------------------------------------------
# attack injectors

def _replace_key(doc, key: str, value) -> int:
    """Recursively overwrite every ``key`` field; returns number of replacements."""
    n = 0
    if isinstance(doc, dict):
        for k in doc:
            if k == key and isinstance(doc[k], (int, float)) and not isinstance(doc[k], bool):
                doc[k] = value
                n += 1
            else:
                n += _replace_key(doc[k], key, value)
    elif isinstance(doc, list):
        for item in doc:
            n += _replace_key(item, key, value)
    return n


def _window(cfg: SimConfig, atk: AttackConfig) -> tuple[float, float]:
    return cfg.base_time + atk.start, cfg.base_time + atk.end


def inject_profile_manipulation(trace: PacketTrace, atk: AttackConfig) -> PacketTrace:
    """Rewrite the limit of every in-window SetChargingProfile call to the injected value."""
    w0, w1 = _window(trace.config, atk)
    hits = 0
    for sess in trace.sessions:
        for ev in sess.events:
            if (ev.kind == "ocpp" and ev.msg_type == 2 and ev.action == "SetChargingProfile"
                    and w0 <= ev.t < w1):
                if _replace_key(ev.payload, "limit", atk.injected_limit):
                    hits += 1
                    trace.attack_truth.append(TruthEntry(
                        sess.client[0], sess.client[1], sess.server[0], sess.server[1],
                        ev.t, ev.t + 0.011, LABEL_PROFILE, sess.hub))
    if hits == 0:
        warnings.warn("profile-manipulation window contained no SetChargingProfile messages")
    trace.invalidate()
    return trace


def inject_denial_of_charge(trace: PacketTrace, atk: AttackConfig) -> PacketTrace:
    """Corrupt in-window RemoteStartTransaction idTags so authorization fails."""
    cfg = trace.config
    w0, w1 = _window(cfg, atk)
    rng = _session_rng(cfg, "doc", atk.start, atk.end)
    hits = 0
    for sess in trace.sessions:
        corrupted: set[int] = set()
        for ev in sess.events:
            if (ev.kind == "ocpp" and ev.msg_type == 2 and ev.action == "RemoteStartTransaction"
                    and w0 <= ev.t < w1 and ev.txn is not None):
                ev.payload["idTag"] = f"BAD{rng.integers(0, 16**8):08X}"
                corrupted.add(ev.txn)
                hits += 1
        if not corrupted:
            continue
        kept: list[AppEvent] = []
        for ev in sess.events:
            if ev.txn not in corrupted:
                kept.append(ev)
                continue
            if ev.action == "RemoteStartTransaction":
                kept.append(ev)
            elif ev.action == "Authorize":
                if ev.msg_type == 3:
                    ev.payload = {"idTagInfo": {"status": "Invalid"}}
                kept.append(ev)
            elif not cfg.authorize_remote_tx and ev.action == "StartTransaction":
                if ev.msg_type == 3:
                    ev.payload = {"transactionId": ev.txn, "idTagInfo": {"status": "Invalid"}}
                kept.append(ev)
            # the rest of the corrupted transaction (meter values, stop) never happens
        sess.events = kept
        for ev in sess.events:
            if (ev.kind == "ocpp" and ev.msg_type == 2 and ev.txn in corrupted
                    and ev.action == "RemoteStartTransaction"):
                trace.attack_truth.append(TruthEntry(
                    sess.client[0], sess.client[1], sess.server[0], sess.server[1],
                    ev.t, ev.t + 0.2, LABEL_DOC, sess.hub))
    if hits == 0:
        warnings.warn("denial-of-charge window contained no RemoteStartTransaction messages")
    trace.invalidate()
    return trace


def inject_heartbeat_flood(trace: PacketTrace, atk: AttackConfig) -> PacketTrace:
    """Add bot stations that open accepted sessions and flood heartbeats."""
    cfg = trace.config
    hub = cfg.hubs[atk.hub]
    w0, w1 = _window(cfg, atk)
    for bot in range(atk.bot_count):
        sess = Session(
            client=(hub.attacker_ip(bot), 50000 + bot),
            server=hub.evcsms_addr,
            hub=atk.hub,
            station_id=f"BOT{bot:03d}",
            open_t=w0, close_t=w1,
            role="flood",
            seed_key=("flood", atk.hub, bot),
        )
        uid = iter(range(1, 1_000_000))
        u = str(next(uid))
        sess.events.append(AppEvent(t=w0 + 0.004, direction="forward", kind="http_request",
                                    http_target=f"/ocpp/{sess.station_id}"))
        sess.events.append(AppEvent(t=w0 + 0.006, direction="backward", kind="http_response",
                                    http_status=101))
        sess.events.append(AppEvent(t=w0 + 0.020, direction="forward", kind="ocpp", msg_type=2,
                                    uid=u, action="BootNotification",
                                    payload={"chargePointVendor": "x", "chargePointModel": "x"}))
        sess.events.append(AppEvent(t=w0 + 0.030, direction="backward", kind="ocpp", msg_type=3,
                                    uid=u, action="BootNotification",
                                    payload={"status": "Accepted", "currentTime": "@0",
                                             "interval": cfg.heartbeat_interval}))
        t = w0 + 0.030 + atk.heartbeat_period
        while t < w1 - 0.1:
            u = str(next(uid))
            sess.events.append(AppEvent(t=t, direction="forward", kind="ocpp", msg_type=2,
                                        uid=u, action="Heartbeat", payload={}))
            sess.events.append(AppEvent(t=t + 0.005, direction="backward", kind="ocpp",
                                        msg_type=3, uid=u, action="Heartbeat",
                                        payload={"currentTime": "@0"}))
            t += atk.heartbeat_period
        trace.sessions.append(sess)
        trace.attack_truth.append(TruthEntry(
            sess.client[0], sess.client[1], sess.server[0], sess.server[1],
            w0, w1, LABEL_FLOOD, atk.hub))
    trace.invalidate()
    return trace


def inject_unauthorized_access(trace: PacketTrace, atk: AttackConfig) -> PacketTrace:
    """Add bots that retry WebSocket upgrades with unknown station IDs and get 404s."""
    cfg = trace.config
    hub = cfg.hubs[atk.hub]
    w0, w1 = _window(cfg, atk)
    rng = _session_rng(cfg, "unauth", atk.hub)
    for bot in range(atk.bot_count):
        t = w0 + bot * atk.retry_period / max(atk.bot_count, 1)
        attempt = 0
        while t + 0.5 < w1:
            sess = Session(
                client=(hub.attacker_ip(30 + bot), 52000 + attempt),  # .230+, clear of flood bots at .200+
                server=hub.evcsms_addr,
                hub=atk.hub,
                station_id=f"GUESS{rng.integers(0, 16**6):06X}",
                open_t=t, close_t=t + 0.050,
                role="unauth",
                seed_key=("unauth", atk.hub, bot, attempt),
            )
            sess.events.append(AppEvent(t=t + 0.004, direction="forward", kind="http_request",
                                        http_target=f"/ocpp/{sess.station_id}"))
            sess.events.append(AppEvent(t=t + 0.006, direction="backward", kind="http_response",
                                        http_status=404))
            trace.sessions.append(sess)
            trace.attack_truth.append(TruthEntry(
                sess.client[0], sess.client[1], sess.server[0], sess.server[1],
                sess.open_t, sess.close_t, LABEL_UNAUTH, atk.hub))
            attempt += 1
            t += atk.retry_period
    trace.invalidate()
    return trace


_INJECTORS = {
    LABEL_PROFILE: inject_profile_manipulation,
    LABEL_DOC: inject_denial_of_charge,
    LABEL_FLOOD: inject_heartbeat_flood,
    LABEL_UNAUTH: inject_unauthorized_access,
}


def simulate(cfg: SimConfig) -> PacketTrace:
    """Benign generation followed by every configured attack injection."""
    trace = simulate_benign(cfg)
    for atk in cfg.attacks:
        if atk.kind not in _INJECTORS:
            raise ValueError(f"unknown attack kind {atk.kind!r}")
        _INJECTORS[atk.kind](trace, atk)
    return trace


# ---------------------------------------------------------------------------
# rendering to packets

def _ws_frame(payload: bytes, mask_key: Optional[bytes], opcode: int = 0x1) -> bytes:
    head = bytes([0x80 | opcode])
    mask_bit = 0x80 if mask_key else 0
    n = len(payload)
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 1 << 16:
        head += bytes([mask_bit | 126]) + n.to_bytes(2, "big")
    else:
        head += bytes([mask_bit | 127]) + n.to_bytes(8, "big")
    if mask_key:
        masked = bytes(c ^ mask_key[i % 4] for i, c in enumerate(payload))
        return head + mask_key + masked
    return head + payload


def _event_payload(sess: Session, ev: AppEvent, mask_key: Optional[bytes]) -> bytes:
    if ev.kind == "http_request":
        return (f"GET {ev.http_target} HTTP/1.1\r\n"
                f"Host: {sess.server[0]}:{sess.server[1]}\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                "Sec-WebSocket-Key: c2ltdWxhdGVkLWtleS1ieXRlcw==\r\n"
                "Sec-WebSocket-Protocol: ocpp1.6\r\n"
                "Sec-WebSocket-Version: 13\r\n\r\n").encode()
    if ev.kind == "http_response":
        if ev.http_status == 101:
            return (b"HTTP/1.1 101 Switching Protocols\r\n"
                    b"Upgrade: websocket\r\n"
                    b"Connection: Upgrade\r\n"
                    b"Sec-WebSocket-Accept: c2ltdWxhdGVkLWFjY2VwdA==\r\n"
                    b"Sec-WebSocket-Protocol: ocpp1.6\r\n\r\n")
        return (f"HTTP/1.1 {ev.http_status} Not Found\r\n"
                "Content-Length: 0\r\n\r\n").encode()
    if ev.kind == "ws_close":
        return _ws_frame(b"\x03\xe8", mask_key, opcode=0x8)
    if ev.kind == "ocpp":
        if ev.msg_type == 2:
            doc = [2, ev.uid, ev.action, ev.payload]
        else:
            doc = [3, ev.uid, ev.payload]
        return _ws_frame(json.dumps(doc, separators=(",", ":")).encode(), mask_key)
    raise ValueError(f"unknown event kind {ev.kind!r}")


def render_session(sess: Session, cfg: SimConfig) -> list[DecodedPacket]:
    rng = _session_rng(cfg, "render", *sess.seed_key) if sess.seed_key else _session_rng(cfg, "render", sess.client)
    isn_c = int(rng.integers(0, 1 << 32))
    isn_s = int(rng.integers(0, 1 << 32))
    c_ip, c_port = sess.client
    s_ip, s_port = sess.server
    last_ts = 0.0

    def stamp(t: float) -> float:
        nonlocal last_ts
        t = round(t * 1e6) / 1e6
        if t <= last_ts:
            t = round(last_ts * 1e6 + 1) / 1e6
        last_ts = t
        return t

    packets: list[DecodedPacket] = []

    def emit(src, dst, seq, ack, flags, payload, t):
        packets.append(DecodedPacket(
            timestamp=stamp(t), src_ip=src[0], dst_ip=dst[0],
            src_port=src[1], dst_port=dst[1],
            tcp_flags=frozenset(flags), seq=seq % (1 << 32), ack=ack % (1 << 32),
            payload=payload))

    t0 = sess.open_t
    emit(sess.client, sess.server, isn_c, 0, {"SYN"}, b"", t0)
    emit(sess.server, sess.client, isn_s, isn_c + 1, {"SYN", "ACK"}, b"", t0 + 0.0002)
    c_seq, s_seq = isn_c + 1, isn_s + 1
    emit(sess.client, sess.server, c_seq, s_seq, {"ACK"}, b"", t0 + 0.0004)

    for ev in sorted(sess.events, key=lambda e: e.t):
        mask_key = bytes(int(x) for x in rng.integers(0, 256, size=4)) if ev.direction == "forward" else None
        payload = _event_payload(sess, ev, mask_key)
        if ev.direction == "forward":
            emit(sess.client, sess.server, c_seq, s_seq, {"PSH", "ACK"}, payload, ev.t)
            c_seq += len(payload)
        else:
            emit(sess.server, sess.client, s_seq, c_seq, {"PSH", "ACK"}, payload, ev.t)
            s_seq += len(payload)

    t1 = sess.close_t
    emit(sess.client, sess.server, c_seq, s_seq, {"FIN", "ACK"}, b"", t1)
    c_seq += 1
    emit(sess.server, sess.client, s_seq, c_seq, {"FIN", "ACK"}, b"", t1 + 0.0002)
    s_seq += 1
    emit(sess.client, sess.server, c_seq, s_seq, {"ACK"}, b"", t1 + 0.0004)
    return packets


def render_trace(trace: PacketTrace) -> list[DecodedPacket]:
    tagged: list[tuple[float, int, int, DecodedPacket]] = []
    for s_idx, sess in enumerate(trace.sessions):
        for p_idx, pkt in enumerate(render_session(sess, trace.config)):
            tagged.append((pkt.timestamp, s_idx, p_idx, pkt))
    tagged.sort(key=lambda t: (t[0], t[1], t[2]))
    return [pkt for _, _, _, pkt in tagged]


# ---------------------------------------------------------------------------
# file output

def write_pcap(trace: PacketTrace, path: str) -> None:
    raws = []
    for pkt in trace.packets:
        ts_total = round(pkt.timestamp * 1e6)
        raws.append(RawPacket(ts_sec=int(ts_total // 1_000_000),
                              ts_usec=int(ts_total % 1_000_000),
                              link_bytes=serialize_packet(pkt)))
    _write_pcap_file(path, raws)


def write_truth(trace: PacketTrace, path: str) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src_ip", "src_port", "dst_ip", "dst_port",
                         "start", "end", "label", "hub"])
        for e in trace.truth_entries():
            writer.writerow([e.src_ip, e.src_port, e.dst_ip, e.dst_port,
                             f"{e.start:.6f}", f"{e.end:.6f}", e.label, e.hub])
