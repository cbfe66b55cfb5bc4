"""Classic PCAP file reading and writing (link type Ethernet).

Supports both endiannesses and both the microsecond (0xA1B2C3D4) and
nanosecond (0xA1B23C4D) magic numbers.  Nanosecond timestamps are truncated
to microseconds on read.  PCAPNG is not supported.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from typing import Iterator, Sequence

MAGIC_MICRO = 0xA1B2C3D4
MAGIC_NANO = 0xA1B23C4D

LINKTYPE_ETHERNET = 1


class PcapFormatError(Exception):
    """Raised when a capture file has a malformed global header."""


@dataclass(frozen=True)
class RawPacket:
    """One captured record: epoch timestamp (seconds + microseconds) and link-layer bytes."""

    ts_sec: int
    ts_usec: int
    link_bytes: bytes

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec / 1e6


def _parse_global_header(header: bytes) -> tuple[str, bool]:
    """Return (struct byte-order prefix, is_nanosecond) for the 24-byte global header."""
    if len(header) < 24:
        raise PcapFormatError("file too short for a PCAP global header")
    magic_le = struct.unpack("<I", header[:4])[0]
    magic_be = struct.unpack(">I", header[:4])[0]
    if magic_le == MAGIC_MICRO:
        order, nano = "<", False
    elif magic_be == MAGIC_MICRO:
        order, nano = ">", False
    elif magic_le == MAGIC_NANO:
        order, nano = "<", True
    elif magic_be == MAGIC_NANO:
        order, nano = ">", True
    else:
        raise PcapFormatError(f"unrecognized PCAP magic 0x{magic_le:08X}")
    linktype = struct.unpack(order + "I", header[20:24])[0]
    if linktype != LINKTYPE_ETHERNET:
        raise PcapFormatError(f"unsupported link type {linktype} (only Ethernet)")
    return order, nano


def read_pcap(path: str) -> Iterator[RawPacket]:
    """Yield every record of a classic PCAP file in file order.

    A truncated trailing record stops iteration with a warning; a malformed
    global header raises :class:`PcapFormatError`.
    """
    with open(path, "rb") as fh:
        order, nano = _parse_global_header(fh.read(24))
        rec_hdr = struct.Struct(order + "IIII")
        while True:
            hdr = fh.read(16)
            if not hdr:
                return
            if len(hdr) < 16:
                warnings.warn(f"{path}: truncated record header at end of file")
                return
            ts_sec, ts_frac, incl_len, orig_len = rec_hdr.unpack(hdr)
            data = fh.read(incl_len)
            if len(data) < incl_len:
                warnings.warn(f"{path}: truncated record body at end of file")
                return
            ts_usec = ts_frac // 1000 if nano else ts_frac
            yield RawPacket(ts_sec=ts_sec, ts_usec=ts_usec, link_bytes=data)


def write_pcap(path: str, packets: Sequence[RawPacket]) -> None:
    """Write packets as a little-endian classic PCAP file (microsecond resolution)."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IHHiIII", MAGIC_MICRO, 2, 4, 0, 0, 65535, LINKTYPE_ETHERNET))
        for pkt in packets:
            n = len(pkt.link_bytes)
            fh.write(struct.pack("<IIII", pkt.ts_sec, pkt.ts_usec, n, n))
            fh.write(pkt.link_bytes)
