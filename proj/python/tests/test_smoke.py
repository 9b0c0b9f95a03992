import math

import numpy as np
import pytest

import poseforge as pf


def test_skeleton():
    spec = pf.coco17_skeleton()
    assert spec.K == 17
    assert spec.keypoint_names[0] == "nose"
    m = pf.flip_index_map(spec)
    assert [m[i] for i in m] == list(range(17))


def test_encode_decode_roundtrip():
    spec = pf.coco17_skeleton()
    cfg = pf.make_heatmap_config((48, 64), 2.0)
    assert cfg.heatmap_size == (12, 16)
    inst = pf.PersonInstance()
    inst.keypoints = [pf.Keypoint(10.3 + k, 20.7 + 0.5 * k, 2) for k in range(17)]
    hm = pf.encode(inst, cfg, spec)
    assert hm.shape == (17, 16, 12)
    for (x, y, conf), kp in zip(pf.decode(hm, cfg), inst.keypoints):
        assert abs(x - kp.x) < 1e-6 and abs(y - kp.y) < 1e-6
        assert 0.5 < conf <= 1.0
    flipped = pf.flip_heatmap(pf.flip_heatmap(hm, cfg, spec), cfg, spec)
    np.testing.assert_allclose(flipped, hm, atol=1e-12)


def test_oks_examples():
    params = pf.OksParams.from_skeleton(pf.coco17_skeleton())
    gt = pf.PersonInstance()
    gt.keypoints = [pf.Keypoint(50.0 + k, 60.0, 2) for k in range(17)]
    gt.area = 400.0
    assert pf.oks(gt, gt, params) == 1.0
    with pytest.raises(pf.PoseforgeError) as e:
        pf.oks(pf.PersonInstance(), gt, params)
    assert e.value.code == "KeypointCountMismatch" or e.value.code == "NoVisibleKeypoints"


def test_excerpt_parses_and_evaluates(tmp_path):
    import pathlib

    spec = pf.coco17_skeleton()
    text = (pathlib.Path(__file__).parents[2] / "data" / "coco_val2017_excerpt.json").read_text()
    f = pf.parse_annotations(text, spec)
    assert len(f.images) == 10
    assert pf.parse_annotations(pf.write_annotations(f), spec) == f
    preds = [a for a in f.annotations if a.num_labeled() > 0]
    report = pf.evaluate(f, preds, pf.OksParams.from_skeleton(spec))
    assert report.ap == pytest.approx(1.0)


def test_malformed_json_raises_typed_error():
    with pytest.raises(pf.PoseforgeError) as e:
        pf.parse_annotations("{", pf.coco17_skeleton())
    assert e.value.code == "MalformedJson"


def test_verification_entry_points():
    assert pf.codec_roundtrip(200).max_error < 0.05
    assert pf.flip_consistency(200).max_error < 0.1
    assert pf.gradcheck_tiny(0) < 1e-4


def test_scene_and_stylize():
    img, people = pf.generate_scene(3, 1, (96, 96))
    assert img.shape == (96, 96, 3) and img.dtype == np.float32
    assert len(people) == 1
    same, _ = pf.generate_scene(3, 1, (96, 96))
    np.testing.assert_array_equal(img, same)
    np.testing.assert_array_equal(pf.stylize(img, pf.StyleParams.neutral()), img)
    styl = pf.stylize(img, pf.StyleParams.monet_like())
    assert styl.shape == img.shape
    assert float(np.abs(styl - img).mean()) > 0.0
    assert not math.isnan(float(styl.sum()))
