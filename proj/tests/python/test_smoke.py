import numpy as np
import pytest

import cainet


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    cainet.synth_corpus(str(root), train=4, val=2, test=2, seed=3)
    return root


def test_synth_scene_is_deterministic():
    a = cainet.synth_scene(4)
    b = cainet.synth_scene(4)
    assert a["rgb"].shape == (3, 32, 32)
    assert a["thermal"].shape == (1, 32, 32)
    assert a["labels"].dtype == np.int32
    np.testing.assert_array_equal(a["rgb"], b["rgb"])
    assert set(np.unique(a["labels"])) <= {0, 1, 2}


def test_model_shapes_and_argmax():
    model = cainet.Model(3)
    s = cainet.synth_scene(1)
    logits = model.logits(s["rgb"], s["thermal"])
    assert logits.shape == (3, 32, 32)
    np.testing.assert_array_equal(model.predict(s["rgb"], s["thermal"]), np.argmax(logits, axis=0))
    params = model.parameters()
    assert params["inference"] < params["total"]
    assert "gcm.reduce1" in model.parameter_names()


def test_paper_preset_parameter_count():
    total = cainet.Model(9, {"preset": "paper"}).parameters()["total"]
    assert abs(total - 12.16e6) / 12.16e6 <= 0.2


def test_aux_targets():
    labels = np.zeros((9, 9), dtype=np.int32)
    labels[3:6, 3:6] = 2
    binary, boundary, attention = cainet.aux_targets(labels)
    np.testing.assert_array_equal(binary, (labels != 0).astype(np.uint8))
    assert boundary.sum() == 8 and boundary[4, 4] == 0
    assert attention.min() >= 0.0 and attention.max() <= 1.0


def test_metrics_hand_example():
    truth = np.array([[0, 0, 0, 1]], dtype=np.int32)
    pred = np.array([[0, 0, 1, 1]], dtype=np.int32)
    m = cainet.metrics(pred, truth, 2)
    assert m["macc"] == pytest.approx(5 / 6)
    assert m["miou"] == pytest.approx(7 / 12)


def test_losses():
    q = np.random.default_rng(0).uniform(size=(1, 6, 6)).astype(np.float32)
    assert cainet.attention_loss(q, q) == pytest.approx(-1.0, abs=1e-6)
    labels = np.array([[1]], dtype=np.int32)
    assert cainet.lovasz_softmax(np.array([[[0.0]], [[0.0]]], dtype=np.float32), labels) == pytest.approx(0.5)
    w = cainet.enet_class_weights([0.0, 1.0])
    assert w[0] == pytest.approx(50.50, rel=1e-3)
    with pytest.raises(IndexError):
        cainet.lovasz_softmax(np.zeros((2, 1, 1), dtype=np.float32), np.array([[5]], dtype=np.int32))


def test_gradcheck_single_instance():
    lines = cainet.gradcheck(instances=1)
    assert len(lines) == 10
    assert all(ok for _, _, ok in lines)


def test_train_evaluate_roundtrip(corpus, tmp_path):
    settings = {
        "data": str(corpus),
        "out": str(tmp_path / "runs"),
        "batch_size": "2",
        "steps.rgb": "1",
        "steps.thermal": "1",
        "steps.gcm": "1",
        "steps.full": "2",
    }
    stages = cainet.train(settings)
    assert [s["stage"] for s in stages] == ["rgb", "thermal", "gcm", "full"]
    ckpt = stages[-1]["checkpoint"]
    report = cainet.evaluate(ckpt, "val", settings)
    assert 0.0 <= report["miou"] <= 1.0
    assert report["pixels"] == 2 * 32 * 32
    sample = cainet.load_split(str(corpus), "val")[0]
    model = cainet.Model(3, checkpoint=ckpt)
    assert model.predict(sample["rgb"], sample["thermal"]).shape == (32, 32)
    with pytest.raises(cainet.ClassCountError):
        cainet.Model(4, checkpoint=ckpt)


def test_full_stage_requires_prerequisites(corpus, tmp_path):
    with pytest.raises(cainet.PrerequisiteError):
        cainet.train({"data": str(corpus), "out": str(tmp_path), "stage": "full"})
