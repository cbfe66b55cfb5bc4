"""Criterion support: flow-meter output vs an independent brute-force recount."""

import warnings

import pytest

import oracle
from ocpp_flowguard import simulator as sim
from ocpp_flowguard.decode import Decoder
from ocpp_flowguard.detect import extract_feature_rows
from ocpp_flowguard.features import FEATURE_NAMES
from ocpp_flowguard.pcap import read_pcap


def trace_config(seed):
    attacks = []
    kind = seed % 4
    if kind == 1:
        attacks = [sim.AttackConfig(kind="HeartbeatFlood", start=10.0, end=30.0,
                                    bot_count=1, heartbeat_period=5.0)]
    elif kind == 2:
        attacks = [sim.AttackConfig(kind="UnauthorizedAccess", start=10.0, end=40.0,
                                    bot_count=1, retry_period=10.0)]
    elif kind == 3:
        attacks = [sim.AttackConfig(kind="DenialOfCharge", start=0.0, end=60.0)]
    return sim.SimConfig(hubs=[sim.HubConfig(stations=1, base_ip="10.1.0")],
                         duration=60.0, heartbeat_interval=20.0,
                         transaction_rate=120.0 + (seed % 3) * 60.0,
                         charging_profile_rate=120.0,
                         metervalues_interval=10.0, seed=1000 + seed,
                         attacks=attacks)


def compare_rows(meter_row, oracle_row, seed):
    for name in FEATURE_NAMES:
        got, want = meter_row[name], oracle_row[name]
        if isinstance(want, float) or isinstance(got, float):
            assert float(got) == pytest.approx(float(want), rel=1e-9, abs=1e-12), \
                f"seed {seed}: {name}: {got} != {want}"
        else:
            assert got == want, f"seed {seed}: {name}: {got!r} != {want!r}"


@pytest.mark.parametrize("seed", range(20))
def test_features_match_brute_force_recount(seed, tmp_path):
    cfg = trace_config(seed)
    path = tmp_path / "trace.pcap"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # injectors may find an empty window
        sim.write_pcap(sim.simulate(cfg), str(path))

    decoder = Decoder()
    packets = [p for raw in read_pcap(str(path))
               if (p := decoder.decode(raw.timestamp, raw.link_bytes)) is not None]
    assert 0 < len(packets) <= 200, f"seed {seed}: trace has {len(packets)} packets"

    meter_rows = extract_feature_rows(str(path))
    oracle_rows = oracle.recount_features(packets)
    assert len(meter_rows) == len(oracle_rows)
    for m, o in zip(meter_rows, oracle_rows):
        compare_rows(m, o, seed)
