import json
import math

import pytest

import qxfer


def test_suite_shape():
    suite = qxfer.generate_suite(42)
    assert len(suite) == 85
    families = {c["family"] for c in suite}
    assert families == {"Random", "Bell", "GHZ", "QFT"}
    assert all(2 <= c["n_qubits"] <= 5 for c in suite)


def test_distributions_normalized():
    cid = qxfer.generate_suite(42)[0]["id"]
    ideal = qxfer.ideal_distribution(42, cid)
    noisy = qxfer.noisy_distribution(42, cid, "TargetB")
    assert len(ideal) == len(noisy)
    assert math.isclose(sum(ideal), 1.0, abs_tol=1e-12)
    assert math.isclose(sum(noisy), 1.0, abs_tol=1e-12)
    assert min(noisy) >= 0.0


def test_metrics_hand_values():
    assert qxfer.kl_metric([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2.0))
    assert qxfer.tv_metric([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.25)
    assert qxfer.kl_metric([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-12)


def test_improvement_stats():
    s = qxfer.improvement_stats(0.1423, 0.1016, 0.0258)
    assert s["improvement_pct"] == pytest.approx(28.6015, abs=1e-3)
    assert s["gap_recovery_pct"] == pytest.approx(34.9356, abs=1e-3)
    degenerate = qxfer.improvement_stats(0.02, 0.01, 0.03)
    assert degenerate["gap_recovery_pct"] is None


def test_presets_and_errors():
    a = qxfer.device_preset("SourceA")
    assert a.t1_us == pytest.approx(142.4)
    with pytest.raises(ValueError):
        qxfer.device_preset("nope")
    with pytest.raises(qxfer.ConfigError):
        qxfer.Pipeline(json.dumps({"shots": 0}), "unused")


def test_small_pipeline(tmp_path):
    cfg = json.loads(qxfer.default_config())
    cfg["shots"] = 512
    cfg["train"]["max_epochs"] = 3
    cfg["adapt"]["ks"] = [5]
    cfg["adapt"]["seeds"] = [0]
    p = qxfer.Pipeline(json.dumps(cfg), tmp_path)
    assert p.gen() == 85
    assert p.simulate("SourceA") == 85
    assert p.simulate("TargetB") == 85
    with pytest.raises(qxfer.UsageError):
        p.simulate("Elsewhere")
    log = p.train()
    assert 1 <= log["best_epoch"] <= 3
    m = p.eval("zero-shot")
    assert m["kl"] > 0.0 and 0.0 <= m["tv"] <= 1.0
    runs = p.adapt([5], [0])
    assert len(runs) == 1 and runs[0]["frozen_intact"]
    rows = p.ablate()
    assert [r["feature_index"] for r in rows] == [5, 6, 7, 8]
    p.report()
    assert (tmp_path / "report" / "results.md").exists()
