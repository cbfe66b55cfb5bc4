"""Ethernet/IPv4/TCP decoding and best-effort per-direction stream reassembly."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

SYN = "SYN"
ACK = "ACK"
FIN = "FIN"
RST = "RST"
PSH = "PSH"
URG = "URG"
ECE = "ECE"
CWR = "CWR"

# TCP flag bits, low to high
_FLAG_BITS = [(0x01, FIN), (0x02, SYN), (0x04, RST), (0x08, PSH),
              (0x10, ACK), (0x20, URG), (0x40, ECE), (0x80, CWR)]

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_VLAN = 0x8100

SEQ_MOD = 1 << 32


@dataclass(frozen=True)
class DecodedPacket:
    """A decoded TCP/IPv4 packet. Immutable, safe to share across threads."""

    timestamp: float
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    tcp_flags: frozenset[str]
    seq: int
    ack: int
    payload: bytes

    def endpoints(self) -> tuple[tuple[str, int], tuple[str, int]]:
        return (self.src_ip, self.src_port), (self.dst_ip, self.dst_port)


@dataclass
class DecodeStats:
    """Counters for packets skipped or rejected during decoding."""

    non_ipv4: int = 0
    non_tcp: int = 0
    vlan: int = 0
    malformed: int = 0


class Decoder:
    """Decodes raw Ethernet frames into :class:`DecodedPacket`, counting skips."""

    def __init__(self) -> None:
        self.stats = DecodeStats()

    def decode(self, timestamp: float, link_bytes: bytes) -> Optional[DecodedPacket]:
        b = link_bytes
        if len(b) < 14:
            self.stats.malformed += 1
            return None
        ethertype = struct.unpack(">H", b[12:14])[0]
        if ethertype == ETHERTYPE_VLAN:
            self.stats.vlan += 1
            return None
        if ethertype != ETHERTYPE_IPV4:
            self.stats.non_ipv4 += 1
            return None
        ip = b[14:]
        if len(ip) < 20:
            self.stats.malformed += 1
            return None
        ver_ihl = ip[0]
        if ver_ihl >> 4 != 4:
            self.stats.non_ipv4 += 1
            return None
        ihl = (ver_ihl & 0x0F) * 4
        if ihl < 20 or len(ip) < ihl:
            self.stats.malformed += 1
            return None
        total_len = struct.unpack(">H", ip[2:4])[0]
        proto = ip[9]
        if proto != 6:
            self.stats.non_tcp += 1
            return None
        if total_len < ihl or total_len > len(ip):
            self.stats.malformed += 1
            return None
        src_ip = ".".join(str(x) for x in ip[12:16])
        dst_ip = ".".join(str(x) for x in ip[16:20])
        tcp = ip[ihl:total_len]
        if len(tcp) < 20:
            self.stats.malformed += 1
            return None
        src_port, dst_port, seq, ack = struct.unpack(">HHII", tcp[0:12])
        data_off = (tcp[12] >> 4) * 4
        if data_off < 20 or len(tcp) < data_off:
            self.stats.malformed += 1
            return None
        flag_byte = tcp[13]
        flags = frozenset(name for bit, name in _FLAG_BITS if flag_byte & bit)
        payload = bytes(tcp[data_off:])
        return DecodedPacket(
            timestamp=timestamp,
            src_ip=src_ip, dst_ip=dst_ip,
            src_port=src_port, dst_port=dst_port,
            tcp_flags=flags, seq=seq, ack=ack, payload=payload,
        )


def decode_packet(timestamp: float, link_bytes: bytes) -> Optional[DecodedPacket]:
    """Stateless convenience wrapper around :class:`Decoder`."""
    return Decoder().decode(timestamp, link_bytes)


# ---------------------------------------------------------------------------
# serialization (used by the traffic simulator and round-trip tests)

def _ip_checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f">{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _mac_for_ip(ip: str) -> bytes:
    parts = [int(x) for x in ip.split(".")]
    return bytes([0x02, 0x00] + parts)


def serialize_packet(pkt: DecodedPacket) -> bytes:
    """Build the Ethernet/IPv4/TCP wire bytes for a decoded packet."""
    flag_byte = 0
    for bit, name in _FLAG_BITS:
        if name in pkt.tcp_flags:
            flag_byte |= bit
    tcp_hdr = struct.pack(
        ">HHIIBBHHH",
        pkt.src_port, pkt.dst_port, pkt.seq % SEQ_MOD, pkt.ack % SEQ_MOD,
        5 << 4, flag_byte, 65535, 0, 0,
    )
    src = bytes(int(x) for x in pkt.src_ip.split("."))
    dst = bytes(int(x) for x in pkt.dst_ip.split("."))
    # TCP checksum over pseudo-header
    seg = tcp_hdr + pkt.payload
    pseudo = src + dst + struct.pack(">BBH", 0, 6, len(seg))
    csum = _ip_checksum(pseudo + seg)
    tcp_hdr = tcp_hdr[:16] + struct.pack(">H", csum) + tcp_hdr[18:]
    total_len = 20 + len(tcp_hdr) + len(pkt.payload)
    ip_hdr = struct.pack(">BBHHHBBH", 0x45, 0, total_len, 0, 0x4000, 64, 6, 0) + src + dst
    ip_hdr = ip_hdr[:10] + struct.pack(">H", _ip_checksum(ip_hdr)) + ip_hdr[12:]
    eth = _mac_for_ip(pkt.dst_ip) + _mac_for_ip(pkt.src_ip) + struct.pack(">H", ETHERTYPE_IPV4)
    return eth + ip_hdr + tcp_hdr + pkt.payload


# ---------------------------------------------------------------------------
# per-direction stream reassembly

@dataclass
class DirectionalStream:
    """In-order reassembled payload of one flow direction.

    ``segment_boundaries`` maps byte offsets into ``data`` to the index (in
    the input packet list) of the packet that contributed the bytes starting
    at that offset.
    """

    direction: str
    data: bytes = b""
    segment_boundaries: list[tuple[int, int]] = field(default_factory=list)
    anomalies: int = 0

    def packet_index_at(self, offset: int) -> int:
        """Index of the packet carrying the byte at ``offset`` (last boundary <= offset)."""
        idx = 0
        for off, pkt_idx in self.segment_boundaries:
            if off <= offset:
                idx = pkt_idx
            else:
                break
        return idx


def _rel_seq(seq: int, base: int) -> int:
    """Signed distance from base in serial (mod 2^32) arithmetic."""
    return ((seq - base + (SEQ_MOD // 2)) % SEQ_MOD) - (SEQ_MOD // 2)


def reassemble_direction(
    packets: Sequence[DecodedPacket],
    direction: str = "forward",
    indices: Optional[Iterable[int]] = None,
) -> DirectionalStream:
    """Reassemble the payload bytes of one direction in sequence-number order.

    Duplicate segments are dropped; overlapping retransmissions keep the
    first-seen bytes; a gap ends the stream (earlier bytes are kept).
    ``indices`` optionally supplies, per packet, its index in some larger
    packet list for ``segment_boundaries`` bookkeeping.
    """
    stream = DirectionalStream(direction=direction)
    idx_list = list(indices) if indices is not None else list(range(len(packets)))

    data_pkts = [(p, i) for p, i in zip(packets, idx_list) if p.payload]
    syn = next((p for p in packets if SYN in p.tcp_flags), None)
    if not data_pkts:
        return stream

    if syn is not None:
        base = (syn.seq + 1) % SEQ_MOD
    else:
        base = data_pkts[0][0].seq
        for p, _ in data_pkts:
            if _rel_seq(p.seq, base) < 0:
                base = p.seq

    # (relative offset, payload, packet index), first-seen order preserved
    segs: list[tuple[int, bytes, int]] = []
    for p, i in data_pkts:
        off = _rel_seq(p.seq, base)
        if off < 0:
            stream.anomalies += 1
            continue
        segs.append((off, p.payload, i))

    covered_end = 0
    out = bytearray()
    boundaries: list[tuple[int, int]] = []
    for off, payload, i in sorted(segs, key=lambda s: s[0]):  # stable: first-seen wins at equal offset
        end = off + len(payload)
        if end <= covered_end:
            continue  # duplicate or fully-overlapped retransmission
        if off > covered_end:
            break  # gap: stop, keep earlier bytes
        take = payload[covered_end - off:]
        if covered_end - off > 0:
            stream.anomalies += 1  # partial overlap, first-seen bytes kept
        boundaries.append((len(out), i))
        out.extend(take)
        covered_end = end
    stream.data = bytes(out)
    stream.segment_boundaries = boundaries
    return stream
