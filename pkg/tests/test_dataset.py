import numpy as np
import pytest

from ocpp_flowguard.fl.data import (LABELS, JoinError, MinMaxScaler, label_flows,
                                    load_dataset, read_truth_csv, stratified_split)


def feature_row(src="10.1.0.10", sport=40000, dst="10.0.0.1", dport=8180,
                start=100.0, end=150.0):
    return {"src_ip": src, "src_port": sport, "dst_ip": dst, "dst_port": dport,
            "flow_start_timestamp": start, "flow_end_timestamp": end}


def truth_row(label="normal", src="10.1.0.10", sport=40000, dst="10.0.0.1",
              dport=8180, start=90.0, end=200.0, hub=1):
    return {"src_ip": src, "src_port": sport, "dst_ip": dst, "dst_port": dport,
            "start": start, "end": end, "label": label, "hub": hub}


def test_key_and_window_join():
    labels, hubs, unmatched = label_flows([feature_row()], [truth_row()])
    assert labels == ["normal"] and hubs == [1] and unmatched == 0


def test_attack_precedence_over_normal():
    truth = [truth_row("normal"), truth_row("HeartbeatFlood", start=120.0, end=130.0)]
    labels, _, _ = label_flows([feature_row()], truth)
    assert labels == ["HeartbeatFlood"]


def test_reversed_endpoints_still_match():
    # flow keyed by responder-first packet order still joins canonically
    row = feature_row(src="10.0.0.1", sport=8180, dst="10.1.0.10", dport=40000)
    labels, _, _ = label_flows([row], [truth_row()])
    assert labels == ["normal"]


def test_disjoint_window_no_match():
    labels, _, unmatched = label_flows([feature_row(start=500.0, end=600.0)], [truth_row()])
    assert labels == [None] and unmatched == 1


def test_slack_covers_handshake_overhang():
    # flow starts 0.5 s before the app-level truth span
    labels, _, _ = label_flows([feature_row(start=89.5)], [truth_row()])
    assert labels == ["normal"]


def test_benign_run_defaults_unmatched_to_normal():
    labels, _, _ = label_flows([feature_row(src="1.2.3.4")], [truth_row()], benign_run=True)
    assert labels == ["normal"]


def test_read_truth_csv_types(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("src_ip,src_port,dst_ip,dst_port,start,end,label,hub\n"
                 "10.1.0.10,40000,10.0.0.1,8180,1.5,2.5,normal,1\n")
    (row,) = read_truth_csv(str(p))
    assert row["src_port"] == 40000 and row["start"] == 1.5 and row["hub"] == 1


def test_load_dataset_join_rate_gate(tmp_path):
    from ocpp_flowguard.features import FEATURE_NAMES, format_value

    feat = tmp_path / "f.csv"
    values = {name: 0 for name in FEATURE_NAMES}
    values.update(flow_id="f1", src_ip="9.9.9.9", dst_ip="8.8.8.8",
                  src_port=1, dst_port=2, label="unlabelled")
    feat.write_text(",".join(FEATURE_NAMES) + "\n"
                    + ",".join(format_value(values[n]) for n in FEATURE_NAMES) + "\n")
    truth = tmp_path / "t.csv"
    truth.write_text("src_ip,src_port,dst_ip,dst_port,start,end,label,hub\n"
                     "10.1.0.10,40000,10.0.0.1,8180,0,1,normal,0\n")
    with pytest.raises(JoinError, match="joined onto truth"):
        load_dataset([str(feat)], [str(truth)])


def test_minmax_scaler_unit_interval_and_constants():
    X = np.array([[0.0, 5.0, 7.0], [10.0, 15.0, 7.0]])
    s = MinMaxScaler.fit(X)
    out = s.transform(X)
    np.testing.assert_allclose(out[:, 0], [0.0, 1.0])
    np.testing.assert_allclose(out[:, 2], [0.0, 0.0])  # constant column -> 0


def test_minmax_pooled_equals_global_fit():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(20, 4)), rng.normal(size=(30, 4))
    pooled = MinMaxScaler.fit_pooled([(A.min(axis=0), A.max(axis=0)),
                                      (B.min(axis=0), B.max(axis=0))])
    direct = MinMaxScaler.fit(np.vstack([A, B]))
    np.testing.assert_array_equal(pooled.col_min, direct.col_min)
    np.testing.assert_array_equal(pooled.col_max, direct.col_max)


def test_minmax_dict_round_trip():
    s = MinMaxScaler(col_min=np.array([1.0, 2.0]), col_max=np.array([3.0, 4.0]))
    back = MinMaxScaler.from_dict(s.to_dict())
    np.testing.assert_array_equal(back.col_min, s.col_min)


def test_stratified_split_preserves_classes():
    y = np.array([0] * 50 + [1] * 10 + [2] * 3)
    train, test = stratified_split(y, 0.3, np.random.default_rng(0))
    assert len(train) + len(test) == len(y)
    assert set(np.unique(y[train])) == {0, 1, 2}  # every class trains
    assert abs(len(test) - round(0.3 * len(y))) <= 2
    assert not set(train) & set(test)


def test_stratified_split_tiny_class_keeps_train_row():
    y = np.array([0] * 20 + [1])
    train, _ = stratified_split(y, 0.5, np.random.default_rng(0))
    assert 1 in y[train]


def test_labels_vocabulary():
    assert LABELS == ["normal", "ProfileManipulation", "DenialOfCharge",
                      "HeartbeatFlood", "UnauthorizedAccess"]
