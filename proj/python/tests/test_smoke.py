import json
import math

import pytest

import vlmood


def test_score_id_ood_never_exceeds_score_id():
    sims = [0.31, 0.28, 0.12, 0.25, 0.30]
    sid = vlmood.score_id(sims, id_count=3, tau=0.5)
    sid_ood = vlmood.score_id_ood(sims, id_count=3, tau=0.5)
    expected = math.exp(0.31 / 0.5) / sum(math.exp(s / 0.5) for s in sims[:3])
    assert sid == pytest.approx(expected, rel=1e-12)
    assert sid_ood < sid


def test_baselines_on_small_logits():
    z = [1.0, 2.0, 3.0]
    denom = sum(math.exp(v) for v in z)
    assert vlmood.score_msp(z) == pytest.approx(math.exp(3.0) / denom, rel=1e-12)
    assert vlmood.score_maxlogit(z) == 3.0
    assert vlmood.score_energy(z) == pytest.approx(math.log(denom), rel=1e-12)
    assert vlmood.score_odin(z, 1.0) == pytest.approx(vlmood.score_msp(z), rel=1e-12)


def test_metrics():
    assert vlmood.auroc([3.0, 4.0], [1.0, 2.0]) == 1.0
    assert vlmood.auroc([1.0], [1.0]) == 0.5
    fpr, threshold = vlmood.fpr_at_tpr([1.0, 2.0, 3.0, 4.0], [2.5, 0.0], 0.5)
    assert threshold == 3.0 and fpr == 0.0
    assert vlmood.pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        vlmood.pearson_r([1, 1, 1], [1, 2, 3])


def test_bundle_round_trip(tmp_path):
    out = tmp_path / "bundle"
    vlmood.generate_synthetic(out, {"n_id": 40, "n_ood": 30, "seed": 3})
    assert vlmood.validate_bundle(out) == []
    scores = vlmood.score_bundle(out, "score_id_ood", jobs=2)
    assert len(scores["id"]) == 40
    assert len(scores["ood:synthetic_ood"]) == 30
    assert 0.5 < vlmood.auroc(scores["id"], scores["ood:synthetic_ood"]) <= 1.0


def test_unknown_config_key_is_rejected(tmp_path):
    with pytest.raises(vlmood.ConfigError):
        vlmood.generate_synthetic(tmp_path / "b", {"no_such_key": 1})


def test_corrupted_bundle_is_reported(tmp_path):
    out = tmp_path / "bundle"
    vlmood.generate_synthetic(out, {"n_id": 20, "n_ood": 20})
    path = out / "id_images.f32"
    data = bytearray(path.read_bytes())
    data[0] ^= 0x01
    path.write_bytes(bytes(data))
    problems = vlmood.validate_bundle(out)
    assert any("checksum" in p for p in problems)


def test_temperature_sweep(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "kind": "temperature",
        "taus": [1.0, 0.5, 1.0],
        "points": [{"label": "s", "synthetic": {"n_id": 50, "n_ood": 50}}],
    }))
    report = vlmood.run_sweep(spec, tmp_path / "out", jobs=2)
    assert report["kind"] == "temperature"
    assert [r["axis"]["tau"] for r in report["rows"] if r["dataset"] == "average"] == [0.5, 0.5, 1.0, 1.0]
    assert report["warnings"]
    assert (tmp_path / "out" / "report.csv").exists()
