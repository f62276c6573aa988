import math

import numpy as np
import pytest

from krescale import (
    LayerSpec,
    ModelSpec,
    SurgeryPlan,
    Tensor,
    forward,
    format_manifest,
    logit_agreement,
    parse_manifest,
    supersample_model,
    synth_dataset,
    upsample_input,
    validate_model,
    zoo,
)
from krescale.errors import (
    BadMethod,
    NoSpatialFc,
    ParseError,
    ShapeError,
    UnknownLayerKind,
)

from conftest import rand_tensor
from oracles import naive_resample2d


class TestParseManifest:
    def test_minimal(self):
        model = parse_manifest(
            "input 8 8 1\nconv w b stride 1 1 pad 1 1\nsoftmax\n"
        )
        assert (model.input_h, model.input_w, model.input_c) == (8, 8, 1)
        assert [l.kind for l in model.layers] == ["conv", "softmax"]
        conv = model.layers[0]
        assert (conv.weight_name, conv.bias_name) == ("w", "b")
        assert (conv.stride_h, conv.stride_w, conv.pad_h, conv.pad_w) == (1, 1, 1, 1)
        assert not conv.patch_embed

    def test_comments_and_blanks(self):
        model = parse_manifest(
            "# toy\n\ninput 4 4 2   # dims\nrelu\n  \nflatten\n"
        )
        assert [l.kind for l in model.layers] == ["relu", "flatten"]

    def test_patch_embed_flag(self):
        model = parse_manifest(
            "input 8 8 1\nconv w b stride 4 4 pad 0 0 patch_embed\n"
        )
        assert model.layers[0].patch_embed

    def test_fc_and_pools(self):
        model = parse_manifest(
            "input 8 8 1\nmaxpool 2 2\navgpool_adaptive 2 2\nflatten\n"
            "fc w b spatial 16\nsoftmax\n"
        )
        fc = model.layers[3]
        assert fc.spatial_channels == 16
        assert model.layers[0].window == 2
        assert model.layers[0].pool_stride == 2
        assert (model.layers[1].out_h, model.layers[1].out_w) == (2, 2)

    def test_empty_text(self):
        with pytest.raises(ParseError):
            parse_manifest("")

    def test_missing_bias_name(self):
        with pytest.raises(ParseError):
            parse_manifest("input 4 4 1\nconv w stride 1 1 pad 0 0\n")

    def test_input_must_come_first(self):
        with pytest.raises(ParseError):
            parse_manifest("relu\ninput 4 4 1\n")

    def test_duplicate_input(self):
        with pytest.raises(ParseError):
            parse_manifest("input 4 4 1\ninput 4 4 1\n")

    def test_unknown_kind_carries_lineno(self):
        with pytest.raises(UnknownLayerKind) as exc:
            parse_manifest("input 4 4 1\nconv w b stride 1 1 pad 0 0\ndropout\n")
        assert exc.value.lineno == 3

    def test_bad_integer(self):
        with pytest.raises(ParseError):
            parse_manifest("input 4 4 one\n")
        with pytest.raises(ParseError):
            parse_manifest("input 4 4 1\nmaxpool 0 2\n")

    def test_missing_keywords(self):
        with pytest.raises(ParseError):
            parse_manifest("input 4 4 1\nconv w b 1 1 1 1 0 0\n")
        with pytest.raises(ParseError):
            parse_manifest("input 4 4 1\nfc w b 16\n")

    def test_format_round_trip(self):
        text = (
            "input 32 32 3\n"
            "conv c1.w c1.b stride 1 1 pad 1 1\n"
            "relu\n"
            "maxpool 2 2\n"
            "conv p.w p.b stride 4 4 pad 0 0 patch_embed\n"
            "avgpool_adaptive 2 2\n"
            "flatten\n"
            "fc f.w f.b spatial 8\n"
            "softmax\n"
        )
        model = parse_manifest(text)
        assert format_manifest(model) == text
        assert parse_manifest(format_manifest(model)) == model


class TestValidateModel:
    def make_block_model(self, rng):
        # three conv blocks, 32x32x3 input, ending in a 5-way classifier
        text = (
            "input 32 32 3\n"
            "conv c1.w c1.b stride 1 1 pad 1 1\nrelu\nmaxpool 2 2\n"
            "conv c2.w c2.b stride 1 1 pad 1 1\nrelu\nmaxpool 2 2\n"
            "conv c3.w c3.b stride 1 1 pad 1 1\nrelu\nmaxpool 2 2\n"
            "flatten\nfc f.w f.b spatial 8\nsoftmax\n"
        )
        weights = {
            "c1.w": rand_tensor(rng, (4, 3, 3, 3)),
            "c1.b": rand_tensor(rng, (4,)),
            "c2.w": rand_tensor(rng, (6, 4, 3, 3)),
            "c2.b": rand_tensor(rng, (6,)),
            "c3.w": rand_tensor(rng, (8, 6, 3, 3)),
            "c3.b": rand_tensor(rng, (8,)),
            "f.w": rand_tensor(rng, (5, 8 * 4 * 4)),
            "f.b": rand_tensor(rng, (5,)),
        }
        return parse_manifest(text), weights

    def test_trace_ends_in_class_vector(self, rng):
        model, weights = self.make_block_model(rng)
        trace = validate_model(model, weights)
        assert trace[-1] == (5,)
        assert trace[0] == (32, 32, 4)
        assert trace[-3] == (8 * 4 * 4,)

    def test_channel_mismatch_names_layer(self, rng):
        model, weights = self.make_block_model(rng)
        weights["c2.w"] = rand_tensor(rng, (6, 3, 3, 3))
        with pytest.raises(ShapeError, match="layer 3"):
            validate_model(model, weights)

    def test_fc_in_features_mismatch(self, rng):
        model, weights = self.make_block_model(rng)
        weights["f.w"] = rand_tensor(rng, (5, 100))
        with pytest.raises(ShapeError, match="fc"):
            validate_model(model, weights)

    def test_missing_tensor(self, rng):
        model, weights = self.make_block_model(rng)
        del weights["c1.b"]
        with pytest.raises(ShapeError, match="c1.b"):
            validate_model(model, weights)

    def test_fc_spatial_consistency(self, rng):
        model = parse_manifest("input 4 4 1\nflatten\nfc w b spatial 3\n")
        weights = {"w": rand_tensor(rng, (2, 16)), "b": rand_tensor(rng, (2,))}
        with pytest.raises(ShapeError, match="divisible"):
            validate_model(model, weights)

    def test_fc_spatial_square(self, rng):
        model = parse_manifest("input 2 3 1\nflatten\nfc w b spatial 1\n")
        weights = {"w": rand_tensor(rng, (2, 6)), "b": rand_tensor(rng, (2,))}
        with pytest.raises(ShapeError, match="square"):
            validate_model(model, weights)

    def test_avgpool_divisibility(self, rng):
        model = parse_manifest("input 5 4 1\navgpool_adaptive 2 2\n")
        with pytest.raises(ShapeError, match="avgpool"):
            validate_model(model, {})


class TestForward:
    def test_hand_computed_conv_relu_fc_softmax(self):
        # input [[1,2],[3,4]], 1x1 conv w=2 b=1, identity fc, softmax:
        # logits are softmax([3,5,7,9]) computed by hand below
        model = parse_manifest(
            "input 2 2 1\nconv cw cb stride 1 1 pad 0 0\nrelu\nflatten\n"
            "fc fw fb spatial 0\nsoftmax\n"
        )
        weights = {
            "cw": Tensor((1, 1, 1, 1), [2.0]),
            "cb": Tensor((1,), [1.0]),
            "fw": Tensor.from_array(np.eye(4)),
            "fb": Tensor((4,), np.zeros(4)),
        }
        out = forward(model, weights, Tensor((2, 2, 1), [1, 2, 3, 4]))
        exps = [math.exp(v - 9.0) for v in (3.0, 5.0, 7.0, 9.0)]
        expect = [e / sum(exps) for e in exps]
        np.testing.assert_allclose(out.array, expect, atol=1e-15)

    def test_hand_computed_pools(self):
        vals = np.arange(1.0, 17.0).reshape(4, 4, 1)
        model = parse_manifest("input 4 4 1\nmaxpool 2 2\n")
        out = forward(model, {}, Tensor.from_array(vals))
        np.testing.assert_array_equal(out.array[:, :, 0], [[6, 8], [14, 16]])
        model = parse_manifest("input 4 4 1\navgpool_adaptive 2 2\n")
        out = forward(model, {}, Tensor.from_array(vals))
        np.testing.assert_array_equal(
            out.array[:, :, 0], [[3.5, 5.5], [11.5, 13.5]]
        )

    def test_softmax_on_pair(self):
        model = parse_manifest("input 1 1 2\nflatten\nsoftmax\n")
        out = forward(model, {}, Tensor((1, 1, 2), [0.0, 0.0]))
        np.testing.assert_allclose(out.array, [0.5, 0.5], atol=1e-15)

    def test_identity_network_passthrough(self):
        model = parse_manifest(
            "input 2 2 1\nconv cw cb stride 1 1 pad 0 0\nflatten\n"
            "fc fw fb spatial 0\n"
        )
        weights = {
            "cw": Tensor((1, 1, 1, 1), [1.0]),
            "cb": Tensor((1,), [0.0]),
            "fw": Tensor.from_array(np.eye(4)),
            "fb": Tensor((4,), np.zeros(4)),
        }
        out = forward(model, weights, Tensor((2, 2, 1), [1, 2, 3, 4]))
        np.testing.assert_array_equal(out.array, [1.0, 2.0, 3.0, 4.0])

    def test_flatten_is_channel_major(self):
        model = parse_manifest("input 1 2 2\nflatten\n")
        # (H=1, W=2, C=2) values [[ [1,10], [2,20] ]] -> (C,H,W) order
        out = forward(model, {}, Tensor((1, 2, 2), [1, 10, 2, 20]))
        np.testing.assert_array_equal(out.array, [1.0, 2.0, 10.0, 20.0])

    def test_input_shape_checked(self, rng):
        model = parse_manifest("input 4 4 1\nrelu\n")
        with pytest.raises(ShapeError):
            forward(model, {}, rand_tensor(rng, (4, 5, 1)))

    def test_golden_toy_logits(self):
        # frozen output of the bundled toy CNN on a fixed synthetic input;
        # guards the weight bundle, the forward engine, and the dataset
        # generator against silent drift
        model, weights = zoo.toy_cnn()
        x, label = synth_dataset(42, 1, 32, 32, 1, 4)[0]
        assert label == 0
        logits = forward(model, weights, x)
        np.testing.assert_allclose(
            logits.array,
            [
                0.23534106796666646,
                7.2773963085064874,
                -1.8452761841964223,
                9.5350496797842421,
            ],
            rtol=1e-12,
        )


class TestSupersampleModel:
    def test_toy_cnn_shapes(self):
        model, weights = zoo.toy_cnn()
        plan = SurgeryPlan(2, 2, "bicubic", True)
        new_model, new_weights = supersample_model(model, weights, plan)
        assert (new_model.input_h, new_model.input_w) == (64, 64)
        assert new_weights["conv1.weight"].shape == (8, 1, 5, 5)
        assert new_weights["conv2.weight"].shape == (16, 8, 5, 5)
        conv1 = new_model.layers[0]
        assert (conv1.pad_h, conv1.pad_w) == (2, 2)
        assert (conv1.stride_h, conv1.stride_w) == (1, 1)
        # maxpool hyperparameters are untouched by surgery
        pools = [l for l in new_model.layers if l.kind == "maxpool"]
        assert all((p.window, p.pool_stride) == (2, 2) for p in pools)
        assert new_weights["fc.weight"].shape == (4, 4096)
        # biases are shared, not copied
        assert new_weights["conv1.bias"] is weights["conv1.bias"]
        assert new_weights["fc.bias"] is weights["fc.bias"]

    def test_identity_plan_shares_everything(self):
        model, weights = zoo.toy_cnn()
        new_model, new_weights = supersample_model(
            model, weights, SurgeryPlan(1, 1, "bicubic", True)
        )
        assert new_model == model
        assert all(new_weights[k] is weights[k] for k in weights)

    def test_fc_interpolation_matches_naive(self, rng):
        model = parse_manifest("input 4 4 2\nflatten\nfc w b spatial 2\n")
        weights = {"w": rand_tensor(rng, (3, 32)), "b": rand_tensor(rng, (3,))}
        plan = SurgeryPlan(2, 3, "bilinear", True)
        _, new_weights = supersample_model(model, weights, plan)
        grown = new_weights["w"].array
        assert grown.shape == (3, 2 * 8 * 12)
        for row in range(3):
            planes = weights["w"].array[row].reshape(2, 4, 4)
            expect = np.concatenate(
                [
                    naive_resample2d(planes[ch], 8, 12, "bilinear").ravel() / 6.0
                    for ch in range(2)
                ]
            )
            np.testing.assert_allclose(grown[row], expect, atol=1e-12)

    def test_anisotropic_clears_fc_spatial_tag(self, rng):
        model = parse_manifest("input 4 4 2\nflatten\nfc w b spatial 2\n")
        weights = {"w": rand_tensor(rng, (3, 32)), "b": rand_tensor(rng, (3,))}
        new_model, _ = supersample_model(
            model, weights, SurgeryPlan(2, 3, "bilinear", True)
        )
        assert new_model.layers[1].spatial_channels == 0

    def test_isotropic_keeps_fc_spatial_tag(self):
        model, weights = zoo.toy_cnn()
        new_model, _ = supersample_model(
            model, weights, SurgeryPlan(2, 2, "bicubic", True)
        )
        fc = [l for l in new_model.layers if l.kind == "fc"][0]
        assert fc.spatial_channels == 16

    def test_only_first_spatial_fc_rescaled(self, rng):
        model = parse_manifest(
            "input 4 4 1\nflatten\nfc a.w a.b spatial 1\nrelu\n"
            "fc b.w b.b spatial 0\n"
        )
        weights = {
            "a.w": rand_tensor(rng, (9, 16)),
            "a.b": rand_tensor(rng, (9,)),
            "b.w": rand_tensor(rng, (2, 9)),
            "b.b": rand_tensor(rng, (2,)),
        }
        _, new_weights = supersample_model(
            model, weights, SurgeryPlan(2, 2, "bilinear", True)
        )
        assert new_weights["a.w"].shape == (9, 64)
        assert new_weights["b.w"] is weights["b.w"]

    def test_no_spatial_fc_raises(self, rng):
        model = parse_manifest("input 4 4 1\nflatten\nfc w b spatial 0\n")
        weights = {"w": rand_tensor(rng, (2, 16)), "b": rand_tensor(rng, (2,))}
        with pytest.raises(NoSpatialFc):
            supersample_model(model, weights, SurgeryPlan(2, 2, "bicubic", True))
        # the check fires even for the identity plan
        with pytest.raises(NoSpatialFc):
            supersample_model(model, weights, SurgeryPlan(1, 1, "bicubic", True))


    def test_dilation_with_fc_rejected(self):
        model, weights = zoo.toy_cnn()
        with pytest.raises(BadMethod):
            supersample_model(model, weights, SurgeryPlan(2, 2, "dilation", True))

    def test_dilation_without_fc(self, rng):
        model = parse_manifest(
            "input 4 4 1\nconv w b stride 1 1 pad 1 1\n"
        )
        weights = {"w": rand_tensor(rng, (2, 1, 3, 3)), "b": rand_tensor(rng, (2,))}
        new_model, new_weights = supersample_model(
            model, weights, SurgeryPlan(2, 2, "dilation", False)
        )
        assert new_weights["w"].shape == (2, 1, 5, 5)
        np.testing.assert_array_equal(
            new_weights["w"].array[:, :, ::2, ::2], weights["w"].array
        )

    def test_patch_embed_preserves_tokens(self, rng):
        model = parse_manifest(
            "input 8 8 1\nconv p.w p.b stride 4 4 pad 0 0 patch_embed\n"
            "flatten\nfc f.w f.b spatial 0\n"
        )
        weights = {
            "p.w": rand_tensor(rng, (3, 1, 4, 4)),
            "p.b": rand_tensor(rng, (3,)),
            "f.w": rand_tensor(rng, (4, 12)),
            "f.b": rand_tensor(rng, (4,)),
        }
        trace = validate_model(model, weights)
        assert trace[0] == (2, 2, 3)
        new_model, new_weights = supersample_model(
            model, weights, SurgeryPlan(2, 2, "bicubic", False)
        )
        conv = new_model.layers[0]
        assert (conv.stride_h, conv.stride_w) == (8, 8)
        assert (conv.pad_h, conv.pad_w) == (0, 0)  # padding kept, not recomputed
        assert new_weights["p.w"].shape == (3, 1, 7, 7)
        new_trace = validate_model(new_model, new_weights)
        assert new_trace[0] == (2, 2, 3)  # token grid unchanged
        # with tokens preserved the fc needs no rescale, so opting out of
        # fc interpolation leaves its tensors shared
        assert new_weights["f.w"] is weights["f.w"]

    def test_patch_embed_requires_isotropic_plan(self, rng):
        model = parse_manifest(
            "input 8 8 1\nconv p.w p.b stride 4 4 pad 0 0 patch_embed\n"
        )
        weights = {
            "p.w": rand_tensor(rng, (3, 1, 4, 4)),
            "p.b": rand_tensor(rng, (3,)),
        }
        with pytest.raises(ShapeError, match="patch_embed"):
            supersample_model(model, weights, SurgeryPlan(2, 3, "bicubic", False))

    def test_avgpool_target_scaled(self, rng):
        model = parse_manifest(
            "input 8 8 1\nconv w b stride 1 1 pad 1 1\navgpool_adaptive 2 2\n"
        )
        weights = {"w": rand_tensor(rng, (2, 1, 3, 3)), "b": rand_tensor(rng, (2,))}
        new_model, _ = supersample_model(
            model, weights, SurgeryPlan(2, 3, "bilinear", False)
        )
        pool = new_model.layers[1]
        assert (pool.out_h, pool.out_w) == (4, 6)

    def test_surgered_model_validates(self):
        model, weights = zoo.toy_cnn()
        new_model, new_weights = supersample_model(
            model, weights, SurgeryPlan(3, 3, "bilinear", True)
        )
        trace = validate_model(new_model, new_weights)
        assert trace[-1] == (4,)

    def test_plan_validation(self):
        with pytest.raises(ShapeError):
            SurgeryPlan(0, 2)


class TestUpsampleInput:
    def test_identity(self, rng):
        img = rand_tensor(rng, (4, 4, 2))
        assert upsample_input(img, 1, 1, "bicubic") is img

    def test_constant_image(self):
        img = Tensor((2, 2, 1), np.full(4, 3.0))
        out = upsample_input(img, 2, 2, "bilinear")
        assert out.shape == (4, 4, 1)
        np.testing.assert_allclose(out.array, 3.0, atol=1e-12)

    def test_matches_naive_per_channel(self, rng):
        img = rand_tensor(rng, (3, 4, 2))
        out = upsample_input(img, 2, 3, "bicubic")
        assert out.shape == (6, 12, 2)
        for ch in range(2):
            np.testing.assert_allclose(
                out.array[:, :, ch],
                naive_resample2d(img.array[:, :, ch], 6, 12, "bicubic"),
                atol=1e-12,
            )

    def test_dilation_rejected(self, rng):
        with pytest.raises(BadMethod):
            upsample_input(rand_tensor(rng, (2, 2, 1)), 2, 2, "dilation")


class TestLogitAgreement:
    def test_identity_surgery_perfect(self):
        model, weights = zoo.toy_cnn()
        inputs = [x for x, _ in synth_dataset(5, 8, 32, 32, 1, 4)]
        rep = logit_agreement(
            (model, weights), (model, dict(weights)), inputs, "bicubic"
        )
        assert rep.argmax_match_rate == 1.0
        assert rep.mean_cosine_sim == pytest.approx(1.0, abs=1e-15)

    def test_zero_inputs_bias_only_path(self, rng):
        # conv bias -> 1x1 avgpool -> fc with s=1 spatial rows: constant
        # extension keeps row mass exact, so the surgered logits are
        # bit-identical on all-zero inputs (biases are never scaled)
        model = parse_manifest(
            "input 4 4 1\nconv c.w c.b stride 1 1 pad 1 1\nrelu\n"
            "avgpool_adaptive 1 1\nflatten\nfc f.w f.b spatial 3\nsoftmax\n"
        )
        weights = {
            "c.w": rand_tensor(rng, (3, 1, 3, 3)),
            "c.b": rand_tensor(rng, (3,), lo=0.1, hi=1.0),
            "f.w": rand_tensor(rng, (2, 3)),
            "f.b": rand_tensor(rng, (2,)),
        }
        surgered = supersample_model(model, weights, SurgeryPlan(2, 2, "bicubic", True))
        zeros = [Tensor((4, 4, 1), np.zeros(16)) for _ in range(3)]
        base_logits = forward(model, weights, zeros[0])
        surg_logits = forward(
            surgered[0], surgered[1], upsample_input(zeros[0], 2, 2, "bicubic")
        )
        np.testing.assert_allclose(
            surg_logits.array, base_logits.array, atol=1e-15
        )
        rep = logit_agreement((model, weights), surgered, zeros, "bicubic")
        assert rep.argmax_match_rate == 1.0
        assert rep.mean_cosine_sim == pytest.approx(1.0, abs=1e-12)

    def test_toy_agreement_meets_thresholds(self):
        model, weights = zoo.toy_cnn()
        surgered = supersample_model(
            model, weights, SurgeryPlan(2, 2, "bicubic", True)
        )
        inputs = [x for x, _ in synth_dataset(0, 50, 32, 32, 1, 4)]
        rep = logit_agreement((model, weights), surgered, inputs, "bicubic")
        assert rep.argmax_match_rate >= 0.9
        assert rep.mean_cosine_sim >= 0.95

    def test_non_multiple_dims_rejected(self):
        base = parse_manifest("input 4 4 1\nrelu\n")
        surg = parse_manifest("input 6 4 1\nrelu\n")
        with pytest.raises(ShapeError):
            logit_agreement((base, {}), (surg, {}), [], "bilinear")

    def test_empty_inputs_rejected(self):
        model = parse_manifest("input 4 4 1\nrelu\n")
        with pytest.raises(ShapeError):
            logit_agreement((model, {}), (model, {}), [], "bilinear")


class TestSynthDataset:
    def test_deterministic(self):
        a = synth_dataset(3, 4, 16, 16, 2, 4)
        b = synth_dataset(3, 4, 16, 16, 2, 4)
        assert len(a) == 4
        for (xa, la), (xb, lb) in zip(a, b):
            assert la == lb
            assert xa == xb

    def test_single_sample(self):
        samples = synth_dataset(0, 1, 8, 8, 1, 3)
        assert len(samples) == 1
        x, label = samples[0]
        assert x.shape == (8, 8, 1)
        assert 0 <= label < 3

    def test_label_coverage(self):
        labels = {label for _, label in synth_dataset(0, 60, 8, 8, 1, 4)}
        assert labels == {0, 1, 2, 3}

    def test_count_validated(self):
        with pytest.raises(ShapeError):
            synth_dataset(0, 0, 8, 8, 1, 2)


class TestZoo:
    def test_toy_cnn_validates(self):
        model, weights = zoo.toy_cnn()
        trace = validate_model(model, weights)
        assert trace[-1] == (4,)
        assert (model.input_h, model.input_w, model.input_c) == (32, 32, 1)

    def test_toy_cnn_deterministic(self):
        _, w1 = zoo.toy_cnn()
        _, w2 = zoo.toy_cnn()
        assert all(w1[k] == w2[k] for k in w1)

    def test_vgg16_structure(self):
        model, weights = zoo.vgg16()
        convs = [l for l in model.layers if l.kind == "conv"]
        assert len(convs) == 13
        assert all(
            weights[c.weight_name].shape[2:] == (3, 3) for c in convs
        )
        assert all((c.pad_h, c.pad_w) == (1, 1) for c in convs)
        fcs = [l for l in model.layers if l.kind == "fc"]
        assert len(fcs) == 3
        assert fcs[0].spatial_channels == 512
        assert weights[fcs[0].weight_name].shape[1] == 512 * 7 * 7
        trace = validate_model(model, weights)
        assert trace[-1] == (10,)
