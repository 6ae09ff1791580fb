import math

import numpy as np
import pytest

import deskflow

SMALL = {"width": "64", "height": "48"}


def test_flo_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    flow = rng.uniform(-5, 5, size=(7, 9, 2)).astype(np.float32).astype(np.float64)
    path = str(tmp_path / "f.flo")
    deskflow.write_flo(path, flow)
    assert np.array_equal(deskflow.read_flo(path), flow)


def test_metrics_and_color():
    gt = np.zeros((4, 5, 2))
    pred = gt.copy()
    pred[..., 0] = 3.0
    pred[..., 1] = 4.0
    m = deskflow.compute_metrics(pred, gt)
    assert m["epe"] == pytest.approx(5.0)
    assert m["n_evaluated"] == 20
    rgb = deskflow.flow_to_color(pred)
    assert rgb.shape == (4, 5, 3)


def test_correlation_channels_and_values():
    rng = np.random.default_rng(1)
    f1 = rng.normal(size=(1, 2, 6, 6))
    f2 = rng.normal(size=(1, 2, 6, 6))
    out = deskflow.correlate(f1, f2, k=0, d=1, s1=1, s2=1)
    assert out.shape == (1, 9, 6, 6)
    # Channel 4 is the zero displacement: plain per-pixel dot product.
    assert np.allclose(out[0, 4], (f1[0] * f2[0]).sum(axis=0))
    assert deskflow.correlate(f1, f2).shape[1] == 441


def test_generated_sample_is_consistent():
    s = deskflow.generate_sample(SMALL, seed=3, index=0)
    assert s["img1"].shape == (48, 64, 3)
    assert s["flow"].shape == (48, 64, 2)
    again = deskflow.generate_sample(SMALL, seed=3, index=0)
    assert np.array_equal(s["img2"], again["img2"])


def test_schedule_breakpoints():
    assert deskflow.lr_schedule(299999) == 1e-4
    assert deskflow.lr_schedule(300000) == 5e-5
    with pytest.raises(deskflow.ConfigError):
        deskflow.lr_schedule(0, {"train.no_such_key": "1"})


def test_refine_improves_noisy_flow():
    s = deskflow.generate_sample({"width": "128", "height": "96", "sprite_count_min": "0", "sprite_count_max": "0"},
                                 seed=5, index=1)
    rng = np.random.default_rng(2)
    init = deskflow.to_quarter(s["flow"]) + rng.normal(0, 0.25, size=(24, 32, 2))
    plain = deskflow.refine(init, s["img1"], s["img2"], {"var.coarse_iters": "0", "var.fullres_iters": "0"})
    refined = deskflow.refine(init, s["img1"], s["img2"])

    def epe(f):
        return np.linalg.norm(f - s["flow"], axis=2).mean()

    assert epe(refined) < epe(plain)


def test_model_trains_saves_and_predicts(tmp_path):
    data = tmp_path / "data"
    assert deskflow.generate_dataset(str(data), 6, seed=1, config=SMALL) == 6
    model = deskflow.Model({"model.channel_scale": "32"})
    log = model.train(str(data), {"train.total_iters": "4", "train.batch_size": "2", "train.val_every": "2",
                                  "train.val_count": "2"})
    assert [r["iter"] for r in log] == [2, 4]
    assert all(math.isfinite(r["val_epe"]) for r in log)
    (tmp_path / "model.cfg").write_text(model.config_text)
    model.save(str(tmp_path / "net.ckpt"))
    loaded = deskflow.Model.load(str(tmp_path / "net.ckpt"))
    s = deskflow.generate_sample(SMALL, seed=1, index=0)
    a = model.predict(s["img1"], s["img2"])
    assert a.shape == (48, 64, 2)
    assert np.array_equal(a, loaded.predict(s["img1"], s["img2"]))


def test_gradcheck_suite_passes():
    rows = deskflow.gradcheck(cases=2)
    assert {r["op"] for r in rows} == {"conv2d", "upconv2d", "relu", "concat", "resize", "correlation"}
    assert all(r["passed"] for r in rows)
