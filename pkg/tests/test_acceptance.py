"""Acceptance suite: one test per release criterion, each printing a verdict line."""

import time
import warnings

import numpy as np
import pytest

import oracle
from ocpp_flowguard import simulator as sim
from ocpp_flowguard.detect import detect, extract_feature_rows
from ocpp_flowguard.features import write_feature_csv
from ocpp_flowguard.fl import model as nn
from ocpp_flowguard.fl.aggregate import ModelUpdate, ServerOptState, aggregate_adaptive, aggregate_fedavg
from ocpp_flowguard.fl.data import LABELS, MinMaxScaler, load_dataset, stratified_split
from ocpp_flowguard.fl.metrics import accuracy_eq, f1_eq, fpr_eq, tpr_eq
from ocpp_flowguard.fl.model import DEFAULT_LAYOUT
from ocpp_flowguard.fl.training import LocalConfig, RoundConfig, run_rounds
from ocpp_flowguard.flows import assemble_flows
from ocpp_flowguard.modelfile import TrainedModel
from ocpp_flowguard.pcap import read_pcap
from ocpp_flowguard.decode import Decoder
from ocpp_flowguard.syslogout import FileSink

from conftest import make_pkt
from test_oracle import compare_rows, trace_config
from test_syslog import RFC5424_RE


def verdict(criterion: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE CRITERION {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def acceptance_config() -> sim.SimConfig:
    return sim.SimConfig(
        hubs=[sim.HubConfig(stations=2, base_ip="10.1.0"),
              sim.HubConfig(stations=10, base_ip="10.2.0")],
        duration=1800.0,              # 30 simulated minutes
        heartbeat_interval=30.0,
        transaction_rate=10.0,
        charging_profile_rate=20.0,
        seed=42,
        session_lifetime=45.0,
        metervalues_interval=10.0,
        attacks=[
            sim.AttackConfig(kind="ProfileManipulation", start=100.0, end=400.0,
                             injected_limit=80.0),
            sim.AttackConfig(kind="DenialOfCharge", start=500.0, end=800.0),
            sim.AttackConfig(kind="HeartbeatFlood", start=900.0, end=1080.0,
                             bot_count=5, heartbeat_period=0.5),
            sim.AttackConfig(kind="UnauthorizedAccess", start=1200.0, end=1380.0,
                             bot_count=3, retry_period=5.0),
        ])


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Simulate, extract, label and train every method once for the whole module."""
    t_start = time.monotonic()
    work = tmp_path_factory.mktemp("acceptance")
    cfg = acceptance_config()
    trace = sim.simulate(cfg)
    pcap_path = work / "corpus.pcap"
    truth_path = work / "truth.csv"
    sim.write_pcap(trace, str(pcap_path))
    sim.write_truth(trace, str(truth_path))

    rows = extract_feature_rows(str(pcap_path))
    features_path = work / "features.csv"
    write_feature_csv(rows, str(features_path))
    dataset = load_dataset([str(features_path)], [str(truth_path)])

    rng = np.random.default_rng(0)
    train_idx, test_idx = stratified_split(dataset.y, 0.3, rng)
    train_mask = np.zeros(len(dataset), dtype=bool)
    train_mask[train_idx] = True
    stats = []
    for h in sorted(set(dataset.hubs.tolist())):
        mask = (dataset.hubs == h) & train_mask
        if mask.any():
            stats.append((dataset.X[mask].min(axis=0), dataset.X[mask].max(axis=0)))
    scaler = MinMaxScaler.fit_pooled(stats)
    Xs = scaler.transform(dataset.X)
    clients = []
    for h in sorted(set(dataset.hubs.tolist())):
        mask = (dataset.hubs == h) & train_mask
        if mask.any():
            clients.append((f"hub-{h}", Xs[mask], dataset.y[mask]))
    holdout = (Xs[test_idx], dataset.y[test_idx])

    results = {}
    params = {}
    for method in ("fedavg", "fedprox", "fedyogi", "fedadagrad"):
        cfg_r = RoundConfig(method=method, rounds=30, seed=0, layout=DEFAULT_LAYOUT)
        p, history = run_rounds(clients, cfg_r, holdout=holdout)
        results[method] = history[-1]
        params[method] = p

    return {
        "cfg": cfg, "pcap": str(pcap_path), "truth": str(truth_path),
        "features": str(features_path), "rows": rows, "dataset": dataset,
        "scaler": scaler, "clients": clients, "holdout": holdout,
        "results": results, "params": params,
        "model": TrainedModel.new(params["fedavg"], scaler, DEFAULT_LAYOUT),
        "elapsed": time.monotonic() - t_start,
    }


@pytest.fixture(scope="module")
def detect_artifacts(corpus, tmp_path_factory):
    work = tmp_path_factory.mktemp("detect")
    audit_a = work / "audit_a.csv"
    audit_b = work / "audit_b.csv"
    syslog_path = work / "events.log"
    events = detect(corpus["pcap"], corpus["model"], audit_csv=str(audit_a),
                    sink=FileSink(str(syslog_path)))
    detect(corpus["pcap"], corpus["model"], audit_csv=str(audit_b))
    return {"audit_a": audit_a, "audit_b": audit_b,
            "syslog": syslog_path, "events": events}


def labelled_rows(corpus):
    from ocpp_flowguard.fl.data import label_flows, read_truth_csv

    labels, _, _ = label_flows(corpus["rows"], read_truth_csv(corpus["truth"]))
    return list(zip(corpus["rows"], labels))


def test_criterion_1_detection_thresholds(corpus):
    counts = {name: 0 for name in LABELS}
    for i in corpus["dataset"].y:
        counts[LABELS[i]] += 1
    benign = counts["normal"]
    attack = len(corpus["dataset"]) - benign
    ok = benign >= 400 and attack >= 40
    details = [f"{benign} benign / {attack} attack flows"]
    for method in ("fedavg", "fedprox", "fedyogi"):
        m = corpus["results"][method]
        ok &= (m.accuracy >= 0.95 and m.tpr >= 0.95 and m.fpr <= 0.02 and m.f1 >= 0.95)
        details.append(f"{method} acc={m.accuracy:.4f} tpr={m.tpr:.4f} "
                       f"fpr={m.fpr:.4f} f1={m.f1:.4f}")
    ok &= corpus["elapsed"] < 600.0
    details.append(f"pipeline {corpus['elapsed']:.1f}s")
    verdict(1, ok, "; ".join(details))


def test_criterion_2_fedprox_beats_fedadagrad(corpus):
    prox = corpus["results"]["fedprox"].accuracy
    ada = corpus["results"]["fedadagrad"].accuracy
    verdict(2, prox >= ada, f"fedprox acc {prox:.4f} >= fedadagrad acc {ada:.4f}")


def test_criterion_3_feature_oracle_equivalence(tmp_path):
    checked = 0
    for seed in range(20):
        cfg = trace_config(seed)
        path = tmp_path / f"trace{seed}.pcap"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sim.write_pcap(sim.simulate(cfg), str(path))
        decoder = Decoder()
        packets = [p for raw in read_pcap(str(path))
                   if (p := decoder.decode(raw.timestamp, raw.link_bytes)) is not None]
        assert len(packets) <= 200
        meter_rows = extract_feature_rows(str(path))
        oracle_rows = oracle.recount_features(packets)
        assert len(meter_rows) == len(oracle_rows)
        for m, o in zip(meter_rows, oracle_rows):
            compare_rows(m, o, seed)
            checked += 1
    verdict(3, True, f"{checked} flows across 20 traces match the brute-force recount")


def test_criterion_4_flow_timeout_boundary():
    two = len(assemble_flows([make_pkt(t=0.0), make_pkt(t=120.1)]))
    one = len(assemble_flows([make_pkt(t=0.0), make_pkt(t=119.9)]))
    verdict(4, two == 2 and one == 1,
            f"t=120.1 -> {two} flows, t=119.9 -> {one} flow")


def test_criterion_5_attack_observables(corpus):
    rows = labelled_rows(corpus)
    by_label = {name: [] for name in LABELS}
    for row, label in rows:
        if label is not None:
            by_label[label].append(row)
    benign = by_label["normal"]

    benign_max_limit = max(r["flow_max_ocpp16_setchargingprofile_limit"] for r in benign)
    pm_ok = all(r["flow_max_ocpp16_setchargingprofile_limit"] == 80.0
                for r in by_label["ProfileManipulation"]) and benign_max_limit <= 32.0

    doc_ok = (all(r["flow_total_ocpp16_authorize_not_accepted_packets"] >= 1
                  for r in by_label["DenialOfCharge"])
              and all(r["flow_total_ocpp16_authorize_not_accepted_packets"] == 0
                      for r in benign))

    benign_hb = sorted(r["flow_total_ocpp16_heartbeat_packets"] for r in benign)
    median_hb = benign_hb[len(benign_hb) // 2]
    flood_ok = all(r["flow_total_ocpp16_heartbeat_packets"] >= 10 * max(median_hb, 1)
                   for r in by_label["HeartbeatFlood"])

    ua_ok = (all(r["flow_total_http_4xx_packets"] >= 1
                 for r in by_label["UnauthorizedAccess"])
             and all(r["flow_total_http_4xx_packets"] == 0 for r in benign))

    ok = (pm_ok and doc_ok and flood_ok and ua_ok
          and all(by_label[k] for k in LABELS))
    verdict(5, ok,
            f"profile max=80 vs benign<={benign_max_limit}; "
            f"DoC rejects>=1 (ok={doc_ok}); flood heartbeats >= 10x median {median_hb} "
            f"(ok={flood_ok}); 404s only on unauthorized access (ok={ua_ok})")


def test_criterion_6_numerical_suite():
    # FedAvg weighted-mean exactness
    out = aggregate_fedavg([ModelUpdate("a", np.array([1.0, 3.0]), 1),
                            ModelUpdate("b", np.array([3.0, 5.0]), 3)])
    avg_ok = np.allclose(out, [2.5, 4.5], atol=1e-12)

    # FedProx(mu=0) bit-identical to FedAvg
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 0.3, (30, 4)), rng.normal(3, 0.3, (30, 4))])
    y = np.array([0] * 30 + [1] * 30)
    clients = [("a", X[::2], y[::2]), ("b", X[1::2], y[1::2])]
    base = dict(rounds=3, local=LocalConfig(epochs=2, batch_size=16, lr=0.05, mu=0.0),
                seed=1, layout=(4, 8, 2))
    p1, h1 = run_rounds(clients, RoundConfig(method="fedavg", **base), holdout=(X, y))
    p2, h2 = run_rounds(clients, RoundConfig(method="fedprox", **base), holdout=(X, y))
    prox_ok = np.array_equal(p1, p2) and [m.accuracy for m in h1] == [m.accuracy for m in h2]

    # adaptive fixed point at delta = 0
    fixed_ok = True
    for method in ("adam", "adagrad", "yogi"):
        state = ServerOptState.zeros(3, method)
        state.v[:] = 0.1
        cur = np.array([1.0, 2.0, 3.0])
        new, _ = aggregate_adaptive(state, cur, [ModelUpdate("a", cur.copy(), 2)])
        fixed_ok &= bool(np.array_equal(new, cur))

    # analytic vs finite-difference gradient
    layout = (4, 6, 3)
    w = nn.init_params(layout, np.random.default_rng(2))
    Xg = np.random.default_rng(3).normal(size=(8, 4))
    yg = np.random.default_rng(4).integers(0, 3, 8)
    _, grad = nn.loss_and_grad(w, Xg, yg, layout)
    eps, grad_ok = 1e-6, True
    for i in np.random.default_rng(5).choice(len(w), 20, replace=False):
        wp, wm = w.copy(), w.copy()
        wp[i] += eps
        wm[i] -= eps
        fd = (nn.loss_and_grad(wp, Xg, yg, layout)[0]
              - nn.loss_and_grad(wm, Xg, yg, layout)[0]) / (2 * eps)
        grad_ok &= abs(fd - grad[i]) < 1e-4 * max(1.0, abs(fd))

    # Eqs. (1)-(4) on TP=8 / TN=90 / FP=1 / FN=1
    eq_ok = (abs(accuracy_eq(8, 90, 1, 1) - 0.98) < 1e-3
             and abs(tpr_eq(8, 1) - 0.889) < 1e-3
             and abs(fpr_eq(1, 90) - 0.011) < 1e-3
             and abs(f1_eq(8, 1, 1) - 0.889) < 1e-3)

    ok = avg_ok and prox_ok and fixed_ok and grad_ok and eq_ok
    verdict(6, ok, f"fedavg={avg_ok} fedprox0={prox_ok} fixed_point={fixed_ok} "
                   f"gradient={grad_ok} equations={eq_ok}")


def test_criterion_7_determinism(corpus, detect_artifacts, tmp_path):
    # simulate twice -> byte-identical PCAPs
    again = tmp_path / "again.pcap"
    sim.write_pcap(sim.simulate(acceptance_config()), str(again))
    with open(corpus["pcap"], "rb") as fh:
        sim_ok = fh.read() == again.read_bytes()

    # train twice -> identical metric histories
    cfg_r = RoundConfig(method="fedavg", rounds=5, seed=0, layout=DEFAULT_LAYOUT)
    _, h1 = run_rounds(corpus["clients"], cfg_r, holdout=corpus["holdout"])
    _, h2 = run_rounds(corpus["clients"], cfg_r, holdout=corpus["holdout"])
    train_ok = ([(m.accuracy, m.tpr, m.fpr, m.f1) for m in h1]
                == [(m.accuracy, m.tpr, m.fpr, m.f1) for m in h2])

    # detect twice -> identical audit CSVs
    detect_ok = (detect_artifacts["audit_a"].read_bytes()
                 == detect_artifacts["audit_b"].read_bytes())

    verdict(7, sim_ok and train_ok and detect_ok,
            f"simulate={sim_ok} train={train_ok} detect={detect_ok}")


def test_criterion_8_syslog_conformance(detect_artifacts):
    lines = detect_artifacts["syslog"].read_text().splitlines()
    n_events = len(detect_artifacts["events"])
    parsed = sum(1 for l in lines if RFC5424_RE.match(l))
    pri_ok = all(l.startswith("<108>1 ") for l in lines)
    ok = n_events > 0 and len(lines) == n_events and parsed == len(lines) and pri_ok
    verdict(8, ok, f"{parsed}/{len(lines)} events parse as RFC 5424 with PRI <108> "
                   f"({n_events} security events)")
