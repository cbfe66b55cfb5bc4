import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracle module

from ocpp_flowguard.decode import DecodedPacket, serialize_packet
from ocpp_flowguard.pcap import RawPacket, write_pcap


def make_pkt(t=0.0, src="10.0.0.2", dst="10.0.0.1", sport=40000, dport=8180,
             flags=("ACK",), seq=0, ack=0, payload=b""):
    return DecodedPacket(timestamp=t, src_ip=src, dst_ip=dst,
                         src_port=sport, dst_port=dport,
                         tcp_flags=frozenset(flags), seq=seq, ack=ack,
                         payload=payload)


def write_packets_pcap(path, packets):
    """Serialize decoded packets into a classic PCAP file."""
    raws = []
    for pkt in packets:
        total = round(pkt.timestamp * 1e6)
        raws.append(RawPacket(ts_sec=int(total // 1_000_000),
                              ts_usec=int(total % 1_000_000),
                              link_bytes=serialize_packet(pkt)))
    write_pcap(str(path), raws)


@pytest.fixture
def tmp_pcap(tmp_path):
    return tmp_path / "trace.pcap"
