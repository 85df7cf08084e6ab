import json

import numpy as np
import pytest

from footforce.cli import main
from footforce.core import InsoleLayout, load_take
from footforce.grf import contact_labels


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--minutes", "1", "--take-seconds", "30", "--seed", "1",
                 "--out", str(d / "takes")]) == 0
    return d


def test_synth_writes_takes(data):
    kids = sorted((data / "takes").iterdir())
    assert [k.name for k in kids] == ["take_000", "take_001"]
    t = load_take(kids[0])
    assert t.synchronized and len(t) == 3000


def test_label_and_eval(data, tmp_path):
    take = data / "takes" / "take_000"
    assert main(["label", "--take", str(take), "--out", str(tmp_path / "c.u8")]) == 0
    lab = np.frombuffer((tmp_path / "c.u8").read_bytes(), dtype=np.uint8).reshape(-1, 2, 2)
    tk = load_take(take)
    assert np.array_equal(lab, contact_labels(tk.vgrf, tk.layout or InsoleLayout.default()).labels)
    assert main(["eval", "contacts", "--pred", str(tmp_path / "c.u8"), "--truth", str(take),
                 "--bins", "4", "--out", str(tmp_path / "r.json")]) == 0
    rows = json.loads((tmp_path / "r.json").read_text())
    assert rows[-1]["take"] == "ALL" and rows[-1]["f1"] > 0.98 and "fp_bin3" in rows[-1]


def test_ot_fit_apply(data, tmp_path):
    assert main(["ot", "fit", "--data", str(data / "takes"), "--grid", "5", "--levels", "2",
                 "--out", str(tmp_path / "ot.json")]) == 0
    assert main(["ot", "apply", "--thresholds", str(tmp_path / "ot.json"),
                 "--take", str(data / "takes" / "take_001"), "--out", str(tmp_path / "o.u8")]) == 0
    assert (tmp_path / "o.u8").stat().st_size == 3000 * 4


def test_train_estimate_cleanup(data, tmp_path):
    model = tmp_path / "m.upm"
    assert main(["train", "--data", str(data / "takes"), "--width-scale", "0.0625", "--epochs", "1",
                 "--steps-per-epoch", "2", "--batch-size", "4", "--lr", "1e-3",
                 "--history", str(tmp_path / "h.csv"), "--out", str(model)]) == 0
    assert (tmp_path / "h.csv").read_text().startswith("epoch,")
    take = data / "takes" / "take_001"
    assert main(["estimate", "--model", str(model), "--take", str(take),
                 "--out", str(tmp_path / "f.f32")]) == 0
    f = np.frombuffer((tmp_path / "f.f32").read_bytes(), dtype="<f4").reshape(-1, 2, 16)
    assert f.shape[0] == 3000 and f.min() >= 0
    assert main(["eval", "vgrf", "--pred", str(tmp_path / "f.f32"), "--truth", str(take),
                 "--out", str(tmp_path / "v.csv")]) == 0
    assert "rmse_left_bw" in (tmp_path / "v.csv").read_text()


def test_perturb_and_cleanup(data, tmp_path):
    take = data / "takes" / "take_000"
    assert main(["perturb", "noise", "--take", str(take), "--sigma-m", "0.02",
                 "--out", str(tmp_path / "noisy")]) == 0
    assert load_take(tmp_path / "noisy").attrs["noise_sigma_m"] == 0.02
    assert main(["perturb", "blend", "--data", str(data / "takes"), "--count", "2",
                 "--out", str(tmp_path / "blends")]) == 0
    b = tmp_path / "blends" / "blend_000"
    assert len(load_take(b)) == 80
    assert main(["cleanup", "--take", str(b), "--weights", "iterations=50",
                 "--out", str(tmp_path / "clean")]) == 0
    rep = json.loads((tmp_path / "clean" / "cleanup_report.json").read_text())
    assert rep["footskate_after_mps"] <= rep["footskate_before_mps"]


def test_sync_unsynchronized(tmp_path):
    assert main(["synth", "--minutes", "0.5", "--take-seconds", "30", "--jump-markers",
                 "--out", str(tmp_path / "raw")]) == 0
    raw = tmp_path / "raw" / "take_000"
    assert not load_take(raw).synchronized
    assert main(["sync", "--take", str(raw), "--out", str(tmp_path / "synced")]) == 0
    assert load_take(tmp_path / "synced").synchronized


def test_exit_codes_and_cleanup_of_outputs(data, tmp_path):
    assert main(["label", "--take", str(tmp_path / "missing"), "--out", str(tmp_path / "x.u8")]) == 2
    assert main(["label", "--take", str(data / "takes" / "take_000"), "--min-phase-s", "-1",
                 "--out", str(tmp_path / "y.u8")]) == 1
    assert not (tmp_path / "y.u8").exists()
    assert main(["cleanup", "--take", str(data / "takes" / "take_000"), "--weights", "bogus=1",
                 "--out", str(tmp_path / "z")]) == 1
    with pytest.raises(SystemExit):
        main(["nonsense"])
