import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (PLANTED_BOX, PLANTED_CONFIDENCE, PLANTED_SIGMA9,
                      planted_image)
from littleyolo.boxes import BBox, iou
from littleyolo.pipeline import (AnchorSet, Detection, LetterboxTransform,
                                 RawDetections, decode_yolo, detect,
                                 detection_to_dict, filter_confidence,
                                 letterbox, nms, resize_bilinear,
                                 resize_nearest, unletterbox)
from littleyolo.tensor import ShapeError
from littleyolo.weights import init_random


def make_det(box, conf, class_id=0):
    return Detection(bbox=BBox(*box), class_id=class_id,
                     class_name="car" if class_id == 0 else "bus",
                     objectness=conf, class_prob=1.0, confidence=conf)


class TestResize:
    def test_same_size_is_identity(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, (3, 7, 9)).astype(np.float32)
        np.testing.assert_array_equal(resize_bilinear(x, 7, 9), x)

    def test_integer_upscale_nearest(self):
        x = np.array([[[0.0, 1.0]]], dtype=np.float32)
        out = resize_nearest(x, 1, 4)
        np.testing.assert_array_equal(out, [[[0, 0, 1, 1]]])

    def test_bilinear_midpoint(self):
        x = np.array([[[0.0, 1.0]]], dtype=np.float32)
        out = resize_bilinear(x, 1, 3)
        # half-pixel centers: positions -1/6, 3/6, 7/6 clamped -> 0, .5, 1
        np.testing.assert_allclose(out, [[[0.0, 0.5, 1.0]]], atol=1e-7)

    def test_range_preserved(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, (3, 11, 5)).astype(np.float32)
        out = resize_bilinear(x, 23, 17)
        assert out.min() >= 0 and out.max() <= 1


class TestLetterbox:
    def test_square_identity(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 1, (3, 416, 416)).astype(np.float32)
        canvas, t = letterbox(x, 416, 416)
        np.testing.assert_array_equal(canvas, x)
        assert t == LetterboxTransform(scale=1.0, pad_x=0.0, pad_y=0.0,
                                       orig_w=416, orig_h=416)

    def test_wide_image_pads_rows(self):
        x = np.ones((3, 416, 832), dtype=np.float32)
        canvas, t = letterbox(x, 416, 416)
        assert canvas.shape == (3, 416, 416)
        assert t.scale == 0.5 and t.pad_x == 0.0 and t.pad_y == 104.0
        np.testing.assert_array_equal(canvas[:, :104], np.full((3, 104, 416), 0.5))
        np.testing.assert_array_equal(canvas[:, 104:312], np.ones((3, 208, 416)))
        np.testing.assert_array_equal(canvas[:, 312:], np.full((3, 104, 416), 0.5))

    def test_tall_image_pads_columns(self):
        x = np.ones((3, 100, 50), dtype=np.float32)
        canvas, t = letterbox(x, 64, 64)
        assert t.scale == 0.64
        assert t.pad_x == (64 - 32) // 2 and t.pad_y == 0.0

    def test_tiny_image_never_zero_content(self):
        x = np.ones((3, 1, 1000), dtype=np.float32)
        canvas, t = letterbox(x, 32, 32)
        assert canvas.shape == (3, 32, 32)  # scaled height clamps to >= 1

    def test_bad_shape(self):
        with pytest.raises(ShapeError):
            letterbox(np.zeros((416, 416, 3), np.float32), 416, 416)

    def test_bad_resample(self):
        with pytest.raises(ValueError, match="resample"):
            letterbox(np.zeros((3, 4, 4), np.float32), 8, 8, resample="bicubic")

    @given(st.integers(5, 200), st.integers(5, 200))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_within_half_pixel(self, w, h):
        x = np.zeros((3, h, w), dtype=np.float32)
        _, t = letterbox(x, 64, 64)
        for fx, fy in [(0.0, 0.0), (0.25, 0.75), (1.0, 1.0), (0.5, 0.5)]:
            ox1, oy1 = fx * w * 0.3, fy * h * 0.3
            ox2, oy2 = ox1 + 0.5 * w, oy1 + 0.4 * h
            net_box = BBox(ox1 * t.scale + t.pad_x, oy1 * t.scale + t.pad_y,
                           ox2 * t.scale + t.pad_x, oy2 * t.scale + t.pad_y)
            det = make_det(net_box, 0.9)
            back = unletterbox([det], t)[0].bbox
            for got, want in zip(back, (ox1, oy1, min(ox2, w), min(oy2, h))):
                assert abs(got - want) <= 0.5

    def test_unletterbox_clamps(self):
        t = LetterboxTransform(scale=1.0, pad_x=0.0, pad_y=0.0, orig_w=10, orig_h=10)
        det = make_det((-5, -5, 20, 20), 0.9)
        back = unletterbox([det], t)[0].bbox
        assert back == BBox(0, 0, 10, 10)


class TestDecode:
    ANCHORS = ((4, 4), (6, 6), (8, 8), (16, 16))

    def test_zero_logits_geometry(self):
        raw = np.zeros((14, 2, 2), dtype=np.float32)
        out = decode_yolo(raw, self.ANCHORS, (2, 3), 32, 32, 2)
        assert out.boxes.shape == (8, 4)
        assert out.objectness.shape == (8,)
        assert out.class_probs.shape == (8, 2)
        np.testing.assert_allclose(out.objectness, 0.5)
        np.testing.assert_allclose(out.class_probs, 0.5)
        # row 0: slot 0 (anchor (8, 8)), cell (0, 0)
        cx = (0.5 + 0) / 2 * 32
        np.testing.assert_allclose(out.boxes[0], [cx - 4, cx - 4, cx + 4, cx + 4])
        # row 3: slot 0, cell (1, 1); row 4: slot 1 (anchor (16, 16)), cell (0, 0)
        cx11 = (0.5 + 1) / 2 * 32
        np.testing.assert_allclose(out.boxes[3],
                                   [cx11 - 4, cx11 - 4, cx11 + 4, cx11 + 4])
        np.testing.assert_allclose(out.boxes[4], [cx - 8, cx - 8, cx + 8, cx + 8])

    def test_offsets_and_exp_sizing(self):
        raw = np.zeros((7, 1, 1), dtype=np.float32)
        raw[0] = 100.0    # sigmoid -> 1: center at right cell edge
        raw[2] = math.log(2.0)  # bw = 2 * anchor_w
        out = decode_yolo(raw, ((10, 20),), (0,), 40, 40, 2)
        x1, y1, x2, y2 = out.boxes[0]
        assert x2 - x1 == pytest.approx(20.0)
        assert y2 - y1 == pytest.approx(20.0)
        assert (x1 + x2) / 2 == pytest.approx(40.0)
        assert (y1 + y2) / 2 == pytest.approx(20.0)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError, match="channels"):
            decode_yolo(np.zeros((15, 2, 2), np.float32), self.ANCHORS,
                        (2, 3), 32, 32, 2)


class TestFilter:
    def raw(self, objectness, probs):
        n = len(objectness)
        return RawDetections(boxes=np.tile(np.array([0.0, 0.0, 4.0, 4.0]), (n, 1)),
                             objectness=np.array(objectness, float),
                             class_probs=np.array(probs, float))

    def test_product_rule_and_argmax(self):
        dets = filter_confidence(self.raw([0.5, 0.9], [[0.6, 0.4], [0.1, 0.2]]), 0.25)
        assert len(dets) == 1
        d = dets[0]
        assert d.class_id == 0 and d.class_name == "car"
        assert d.confidence == pytest.approx(0.3)
        assert d.objectness == pytest.approx(0.5)
        assert d.class_prob == pytest.approx(0.6)

    def test_threshold_strict(self):
        dets = filter_confidence(self.raw([0.5], [[0.5, 0.1]]), 0.25)
        assert dets == []  # 0.25 is not > 0.25

    def test_zero_threshold_keeps_everything_positive(self):
        dets = filter_confidence(self.raw([0.1, 0.2], [[0.5, 0.4]] * 2), 0.0)
        assert len(dets) == 2

    def test_order_preserved(self):
        dets = filter_confidence(
            self.raw([0.5, 0.9, 0.8], [[0.9, 0.1]] * 3), 0.25)
        assert [d.objectness for d in dets] == [0.5, 0.9, 0.8]

    def test_custom_names(self):
        dets = filter_confidence(self.raw([0.9], [[0.1, 0.9]]), 0.25,
                                 class_names=("moto", "lorry"))
        assert dets[0].class_name == "lorry"


class TestNMS:
    def test_overlapping_same_class_suppressed(self):
        # areas 100 vs 81, intersection 81 -> iou 0.81
        a = make_det((0, 0, 10, 10), 0.9)
        b = make_det((0, 0, 9, 9), 0.8)
        assert nms([b, a], 0.45) == [a]

    def test_below_threshold_survives(self):
        a = make_det((0, 0, 10, 10), 0.9)
        b = make_det((6, 0, 16, 10), 0.8)  # iou = 4/16 = 0.25
        assert nms([a, b], 0.45) == [a, b]

    def test_classes_do_not_interact(self):
        a = make_det((0, 0, 10, 10), 0.9, class_id=0)
        b = make_det((0, 0, 10, 10), 0.8, class_id=1)
        assert nms([a, b], 0.45) == [a, b]

    def test_ties_keep_lower_index(self):
        a = make_det((0, 0, 10, 10), 0.8)
        b = make_det((0, 0, 10, 10), 0.8)
        kept = nms([a, b], 0.45)
        assert len(kept) == 1 and kept[0] is a

    def test_output_sorted_by_confidence(self):
        dets = [make_det((i * 100, 0, i * 100 + 10, 10), c)
                for i, c in enumerate([0.3, 0.9, 0.6])]
        assert [d.confidence for d in nms(dets, 0.45)] == [0.9, 0.6, 0.3]

    def test_chain_suppression_is_greedy(self):
        # b overlaps a (kept) -> b dies; c only overlapped b -> c survives
        a = make_det((0, 0, 10, 10), 0.9)
        b = make_det((4, 0, 14, 10), 0.8)    # iou(a,b) = 60/140 > 0.42
        c = make_det((9, 0, 19, 10), 0.7)    # iou(a,c) = 10/190, iou(b,c) = 1/3
        kept = nms([a, b, c], 0.42)
        assert kept == [a, c]

    @given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 50),
                              st.floats(1, 20), st.floats(1, 20),
                              st.floats(0.01, 1), st.integers(0, 1)),
                    max_size=12))
    @settings(max_examples=100, deadline=None)
    def test_properties(self, rows):
        dets = [make_det((x, y, x + w, y + h), c, cls)
                for x, y, w, h, c, cls in rows]
        kept = nms(dets, 0.45)
        assert all(d in dets for d in kept)
        for i, a in enumerate(kept):
            for b in kept[i + 1:]:
                if a.class_id == b.class_id:
                    assert iou(a.bbox, b.bbox) <= 0.45 + 1e-9
        if dets:
            best = max(dets, key=lambda d: d.confidence)
            assert any(k.confidence >= best.confidence for k in kept)


class TestDetect:
    def test_planted_single_detection(self, planted_tiny):
        dets = detect(planted_tiny, planted_image())
        assert len(dets) == 1
        d = dets[0]
        assert d.class_id == 0 and d.class_name == "car"
        np.testing.assert_allclose(tuple(d.bbox), PLANTED_BOX, atol=1e-5)
        assert d.objectness == pytest.approx(PLANTED_SIGMA9, abs=1e-6)
        assert d.confidence == pytest.approx(PLANTED_CONFIDENCE, abs=1e-6)

    def test_planted_empty_image(self, planted_tiny):
        assert detect(planted_tiny, np.zeros((3, 32, 32), np.float32)) == []

    def test_planted_survives_letterbox(self, planted_tiny):
        # doubling the image size halves the scale; box maps back to 2x coords
        img = planted_image().repeat(2, axis=1).repeat(2, axis=2)
        dets = detect(planted_tiny, img)
        assert len(dets) == 1
        np.testing.assert_allclose(tuple(dets[0].bbox),
                                   tuple(2 * v for v in PLANTED_BOX), atol=1.0)

    def test_random_weights_bounded_boxes(self, tiny_graph):
        init_random(tiny_graph, seed=21)
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 1, (3, 48, 40)).astype(np.float32)
        dets = detect(tiny_graph, img, conf_threshold=0.1)
        for d in dets:
            assert 0 <= d.bbox.x1 <= d.bbox.x2 <= 40
            assert 0 <= d.bbox.y1 <= d.bbox.y2 <= 48
            assert 0 < d.confidence <= 1

    def test_determinism(self, tiny_graph):
        init_random(tiny_graph, seed=21)
        img = np.random.default_rng(5).uniform(0, 1, (3, 32, 32)).astype(np.float32)
        assert detect(tiny_graph, img) == detect(tiny_graph, img)

    def test_anchor_override_mask_count_checked(self, planted_tiny):
        bad = AnchorSet(anchors=((4, 4),), masks=((0,),))
        with pytest.raises(ShapeError, match="masks"):
            detect(planted_tiny, planted_image(), anchors=bad)

    def test_anchor_override_applies(self, planted_tiny):
        # same anchors, same masks, spelled explicitly -> identical result
        override = AnchorSet(anchors=((4, 4), (6, 6), (8, 8), (16, 16)),
                             masks=((2, 3), (0, 1)))
        assert detect(planted_tiny, planted_image(), anchors=override) == \
            detect(planted_tiny, planted_image())

    def test_headless_graph_rejected(self):
        from littleyolo.config import Convolutional, NetParams
        from littleyolo.graph import build_graph
        g = build_graph([NetParams(width=8, height=8, channels=3),
                         Convolutional(filters=2, size=1, activation="linear")])
        with pytest.raises(ShapeError, match="yolo"):
            detect(g, np.zeros((3, 8, 8), np.float32))


class TestDetectionDict:
    def test_schema(self):
        d = detection_to_dict(make_det((1, 2, 3, 4), 0.5))
        assert set(d) == {"class_id", "class_name", "confidence",
                          "objectness", "class_prob", "bbox"}
        assert set(d["bbox"]) == {"x1", "y1", "x2", "y2"}
        assert d["bbox"]["x2"] == 3.0
        import json
        json.dumps(d)  # JSON-serializable
