"""Bidirectional flow assembly with a 120-second active timeout."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .decode import ACK, FIN, RST, SYN, DecodedPacket

FLOW_TIMEOUT = 120.0


@dataclass(frozen=True)
class FlowKey:
    """Canonical (sorted) endpoint pair of one TCP connection."""

    endpoint_a: tuple[str, int]
    endpoint_b: tuple[str, int]
    protocol: str = "TCP"

    @classmethod
    def from_packet(cls, pkt: DecodedPacket) -> "FlowKey":
        a, b = sorted(pkt.endpoints())
        return cls(endpoint_a=a, endpoint_b=b)


@dataclass
class Flow:
    """All packets of one connection within one active-timeout window.

    Forward direction is the direction of the first packet observed for this
    flow (the SYN sender in well-formed traces).
    """

    key: FlowKey
    fw_endpoint: tuple[str, int]
    bw_endpoint: tuple[str, int]
    start_ts: float
    end_ts: float
    packets: list[DecodedPacket] = field(default_factory=list)
    directions: list[str] = field(default_factory=list)  # "forward"/"backward" per packet

    @property
    def src_ip(self) -> str:
        return self.fw_endpoint[0]

    @property
    def src_port(self) -> int:
        return self.fw_endpoint[1]

    @property
    def dst_ip(self) -> str:
        return self.bw_endpoint[0]

    @property
    def dst_port(self) -> int:
        return self.bw_endpoint[1]

    @property
    def duration(self) -> float:
        return self.end_ts - self.start_ts

    @property
    def flow_id(self) -> str:
        return (f"{self.src_ip}:{self.src_port}-{self.dst_ip}:{self.dst_port}"
                f"-TCP-{self.start_ts:.6f}")

    def direction_of(self, pkt: DecodedPacket) -> str:
        return "forward" if pkt.endpoints()[0] == self.fw_endpoint else "backward"

    def add(self, pkt: DecodedPacket) -> None:
        self.packets.append(pkt)
        self.directions.append(self.direction_of(pkt))
        self.end_ts = pkt.timestamp


class _OpenFlow:
    __slots__ = ("flow", "fin_fw", "fin_bw", "closing")

    def __init__(self, flow: Flow) -> None:
        self.flow = flow
        self.fin_fw = False
        self.fin_bw = False
        self.closing = False


def assemble_flows(
    packets: Iterable[DecodedPacket],
    timeout: float = FLOW_TIMEOUT,
) -> list[Flow]:
    """Group TCP packets into bidirectional flows.

    A packet joins the open flow for its key unless the active timeout from
    the flow's start has elapsed, in which case the flow is emitted and a new
    one opened.  A flow also closes after FINs in both directions plus the
    final ACK, or on RST.  Residual open flows are emitted at end of input.
    """
    open_flows: dict[FlowKey, _OpenFlow] = {}
    done: list[Flow] = []

    for pkt in packets:
        key = FlowKey.from_packet(pkt)
        state = open_flows.get(key)
        if state is not None and pkt.timestamp - state.flow.start_ts > timeout:
            done.append(state.flow)
            del open_flows[key]
            state = None
        if state is None:
            fw, bw = pkt.endpoints()
            flow = Flow(key=key, fw_endpoint=fw, bw_endpoint=bw,
                        start_ts=pkt.timestamp, end_ts=pkt.timestamp)
            state = _OpenFlow(flow)
            open_flows[key] = state
        state.flow.add(pkt)

        if RST in pkt.tcp_flags:
            done.append(state.flow)
            del open_flows[key]
            continue
        if FIN in pkt.tcp_flags:
            if state.flow.direction_of(pkt) == "forward":
                state.fin_fw = True
            else:
                state.fin_bw = True
            if state.fin_fw and state.fin_bw:
                state.closing = True  # wait for the final ACK
            continue
        if state.closing and ACK in pkt.tcp_flags:
            done.append(state.flow)
            del open_flows[key]

    # residual open flows, in first-packet order
    done.extend(s.flow for s in open_flows.values())
    done.sort(key=lambda f: (f.start_ts, f.flow_id))
    return done
