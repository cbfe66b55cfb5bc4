from conftest import make_pkt
from ocpp_flowguard.flows import FLOW_TIMEOUT, assemble_flows


def pkt(t, rev=False, **kw):
    if rev:
        return make_pkt(t=t, src="10.0.0.1", dst="10.0.0.2", sport=8180, dport=40000, **kw)
    return make_pkt(t=t, src="10.0.0.2", dst="10.0.0.1", sport=40000, dport=8180, **kw)


def test_timeout_boundary_split_and_no_split():
    # criterion: 0 and 120.1 -> two flows; 0 and 119.9 -> one flow
    assert len(assemble_flows([pkt(0.0), pkt(120.1)])) == 2
    assert len(assemble_flows([pkt(0.0), pkt(119.9)])) == 1
    assert FLOW_TIMEOUT == 120.0


def test_timeout_measured_from_flow_start():
    # steady packets never idle, but the active timeout still splits at start+120
    flows = assemble_flows([pkt(t) for t in (0.0, 60.0, 119.0, 121.0, 125.0)])
    assert len(flows) == 2
    assert [len(f.packets) for f in flows] == [3, 2]


def test_forward_direction_is_first_sender():
    flows = assemble_flows([pkt(0.0, rev=True), pkt(0.1)])
    (f,) = flows
    assert f.src_ip == "10.0.0.1" and f.src_port == 8180
    assert f.directions == ["forward", "backward"]


def test_rst_closes_flow():
    flows = assemble_flows([pkt(0.0), pkt(0.1, flags=("RST",)), pkt(0.2)])
    assert len(flows) == 2


def test_fin_fin_ack_closes_flow():
    seqn = [pkt(0.0, flags=("SYN",)),
            pkt(0.1, rev=True, flags=("SYN", "ACK")),
            pkt(0.2, flags=("ACK",)),
            pkt(1.0, flags=("FIN", "ACK")),
            pkt(1.1, rev=True, flags=("FIN", "ACK")),
            pkt(1.2, flags=("ACK",)),
            pkt(2.0, flags=("SYN",))]  # same 5-tuple reused after close
    flows = assemble_flows(seqn)
    assert len(flows) == 2
    assert len(flows[0].packets) == 6


def test_one_fin_does_not_close():
    flows = assemble_flows([pkt(0.0), pkt(0.1, flags=("FIN", "ACK")), pkt(0.2, rev=True)])
    assert len(flows) == 1


def test_residual_open_flow_emitted():
    flows = assemble_flows([pkt(0.0), pkt(5.0)])
    assert len(flows) == 1
    assert flows[0].duration == 5.0


def test_concurrent_flows_keyed_by_five_tuple():
    other = make_pkt(t=0.5, src="10.0.0.3", sport=41000)
    flows = assemble_flows([pkt(0.0), other, pkt(1.0)])
    assert len(flows) == 2
    assert {f.src_ip for f in flows} == {"10.0.0.2", "10.0.0.3"}


def test_flow_id_format_and_output_order():
    flows = assemble_flows([make_pkt(t=2.0, src="10.0.0.3", sport=41000), pkt(1.0)])
    assert flows[0].start_ts == 1.0  # sorted by start
    assert flows[0].flow_id == "10.0.0.2:40000-10.0.0.1:8180-TCP-1.000000"
