import json
import math

import numpy as np
import pytest

from cmrqa.classifier import (
    ClassifierSpec,
    ConstantStub,
    INPUT_SHAPE,
    load_classifier,
    make_stub,
    predict,
    softmax,
)
from cmrqa.errors import FormatError, ValidationError
from cmrqa.sampler import Patch


def make_patch(pixels, subject="sub-01", slice_index=0, representation="intensity"):
    return Patch(
        pixels=np.asarray(pixels, dtype=np.float64),
        origin=(0, 0),
        slice_index=slice_index,
        representation=representation,
        fallback=False,
        subject_id=subject,
    )


def flat_patch(value, size=32, **kw):
    return make_patch(np.full((size, size), float(value)), **kw)


class TestSoftmax:
    def test_sums_to_one(self):
        rng = np.random.default_rng(3)
        z = rng.normal(size=(40, 3)) * 10
        p = softmax(z)
        assert np.allclose(p.sum(axis=1), 1.0)
        assert (p > 0).all()

    def test_shift_invariant(self):
        z = np.array([1.0, -2.0, 0.5])
        assert np.allclose(softmax(z), softmax(z + 1000.0), atol=1e-12)

    def test_hand_value(self):
        # softmax(-2, 0, 0.4) computed from first principles
        e = [math.exp(-2.0), math.exp(0.0), math.exp(0.4)]
        want = np.array(e) / sum(e)
        assert np.allclose(softmax(np.array([-2.0, 0.0, 0.4])), want, atol=1e-15)


class TestSpec:
    def test_key(self):
        spec = ClassifierSpec("vit", "gradmag", "stub_constant", params={"p": [1, 0, 0]})
        assert spec.key == "vit-gradmag"

    def test_rejects_unknown_architecture(self):
        with pytest.raises(ValidationError):
            ClassifierSpec("alexnet", "intensity", "stub_constant")

    def test_rejects_unknown_representation(self):
        with pytest.raises(ValidationError):
            ClassifierSpec("resnet", "wavelet", "stub_constant")

    def test_rejects_unknown_backend(self):
        with pytest.raises(ValidationError):
            ClassifierSpec("resnet", "intensity", "pickle")

    def test_model_file_needs_path(self):
        with pytest.raises(ValidationError):
            ClassifierSpec("resnet", "intensity", "model_file")

    def test_dict_round_trip(self):
        spec = ClassifierSpec(
            "efficientnet", "intensity", "stub_sharpness", params={"t1": 0.2}
        )
        again = ClassifierSpec.from_dict(spec.to_dict())
        assert again == spec

    def test_from_dict_rejects_unknown_fields(self):
        with pytest.raises(ValidationError):
            ClassifierSpec.from_dict({"architecture": "vit", "weights": "x"})


class TestConstantStub:
    def test_emits_fixed_triple(self):
        h = make_stub("stub_constant", {"p": [0.5, 0.25, 0.25]})
        batch = [flat_patch(0.1), flat_patch(0.9)]
        out = predict(h, batch)
        assert out.shape == (2, 3)
        assert np.allclose(out, [[0.5, 0.25, 0.25]] * 2)

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            make_stub("stub_constant", {"p": [1.2, -0.1, -0.1]})

    def test_rejects_bad_sum(self):
        with pytest.raises(ValidationError):
            make_stub("stub_constant", {"p": [0.5, 0.25, 0.1]})

    def test_requires_p(self):
        with pytest.raises(ValidationError):
            make_stub("stub_constant", {})


class TestLookupStub:
    def test_keys_on_subject_and_slice(self):
        table = {
            ("a", 0): [1.0, 0.0, 0.0],
            ("a", 1): [0.0, 1.0, 0.0],
            ("b", 0): [0.0, 0.0, 1.0],
        }
        h = make_stub("stub_lookup", {"table": table})
        batch = [
            flat_patch(0.5, subject="b", slice_index=0),
            flat_patch(0.5, subject="a", slice_index=1),
            flat_patch(0.5, subject="a", slice_index=0),
        ]
        out = predict(h, batch)
        assert np.allclose(out, [[0, 0, 1], [0, 1, 0], [1, 0, 0]])

    def test_missing_key_raises(self):
        h = make_stub("stub_lookup", {"table": {("a", 0): [1.0, 0.0, 0.0]}})
        with pytest.raises(ValidationError, match="no entry"):
            predict(h, [flat_patch(0.5, subject="zz", slice_index=4)])

    def test_empty_table_rejected(self):
        with pytest.raises(ValidationError):
            make_stub("stub_lookup", {"table": {}})


class TestSharpnessStub:
    def test_constant_patch_logits(self):
        # flat patch: zero gradient everywhere, so logits are
        # (20*(0-0.10), 0, 20*(0.02-0)) = (-2, 0, 0.4)
        h = make_stub("stub_sharpness", {})
        out = predict(h, [flat_patch(0.7)])
        assert np.allclose(out[0], softmax(np.array([-2.0, 0.0, 0.4])), atol=1e-12)

    def test_sharp_patch_leans_mild(self):
        rng = np.random.default_rng(0)
        noisy = make_patch(rng.uniform(size=(64, 64)))
        h = make_stub("stub_sharpness", {})
        out = predict(h, [noisy, flat_patch(0.5, size=64)])
        assert out[0, 0] > out[0, 2]  # noisy: mild beats severe
        assert out[1, 2] > out[1, 0]  # flat: severe beats mild

    def test_custom_thresholds(self):
        h = make_stub("stub_sharpness", {"t1": 0.5, "t2": 0.1, "s": 2.0})
        out = predict(h, [flat_patch(0.0)])
        assert np.allclose(out[0], softmax(np.array([-1.0, 0.0, 0.2])), atol=1e-12)

    def test_unknown_param_rejected(self):
        with pytest.raises(ValidationError):
            make_stub("stub_sharpness", {"gamma": 3})


class TestPredictValidation:
    def test_empty_batch(self):
        h = make_stub("stub_constant", {"p": [1.0, 0.0, 0.0]})
        with pytest.raises(ValidationError, match="non-empty"):
            predict(h, [])

    def test_representation_mismatch(self):
        spec = ClassifierSpec(
            "resnet", "gradmag", "stub_constant", params={"p": [1.0, 0.0, 0.0]}
        )
        h = load_classifier(spec)
        with pytest.raises(ValidationError, match="representation"):
            predict(h, [flat_patch(0.5, representation="intensity")])

    def test_bare_stub_accepts_any_representation(self):
        h = ConstantStub([1.0, 0.0, 0.0])
        out = predict(h, [flat_patch(0.5, representation="gradmag")])
        assert out.shape == (1, 3)

    def test_load_classifier_dispatches_stub(self):
        spec = ClassifierSpec(
            "vit", "intensity", "stub_sharpness", params={"t1": 0.3, "t2": 0.1, "s": 1.0}
        )
        h = load_classifier(spec)
        assert h.spec is spec
        assert h.representation == "intensity"


torch = pytest.importorskip("torch")


def script_mean_logits(path, input_shape=INPUT_SHAPE, output_shape=(3,), contract=True):
    class MeanLogits(torch.nn.Module):
        def forward(self, x):
            m = x.mean(dim=(1, 2, 3))
            return torch.stack([m, torch.zeros_like(m), -m], dim=1)

    module = torch.jit.script(MeanLogits())
    extra = {}
    if contract:
        extra["contract.json"] = json.dumps(
            {"input_shape": list(input_shape), "output_shape": list(output_shape)}
        )
    torch.jit.save(module, str(path), _extra_files=extra)


class TestModelFile:
    def test_round_trip_softmax_on_logits(self, tmp_path):
        path = tmp_path / "m.pt"
        script_mean_logits(path)
        spec = ClassifierSpec("resnet", "intensity", "model_file", model_path=str(path))
        h = load_classifier(spec)
        batch = [flat_patch(0.25, size=224), flat_patch(-1.5, size=224)]
        out = predict(h, batch)
        # module emits logits (m, 0, -m) with m the patch mean
        want = softmax(np.array([[0.25, 0.0, -0.25], [-1.5, 0.0, 1.5]]))
        assert np.allclose(out, want, atol=1e-6)

    def test_logit_shift_does_not_change_probs(self, tmp_path):
        class Shifted(torch.nn.Module):
            def forward(self, x):
                m = x.mean(dim=(1, 2, 3))
                return torch.stack([m, torch.zeros_like(m), -m], dim=1) + 40.0

        path = tmp_path / "m.pt"
        extra = {
            "contract.json": json.dumps({"input_shape": [1, 224, 224], "output_shape": [3]})
        }
        torch.jit.save(torch.jit.script(Shifted()), str(path), _extra_files=extra)
        h = load_classifier(
            ClassifierSpec("vit", "intensity", "model_file", model_path=str(path))
        )
        out = predict(h, [flat_patch(0.25, size=224)])
        want = softmax(np.array([0.25, 0.0, -0.25]))
        assert np.allclose(out[0], want, atol=1e-6)

    def test_contract_shape_mismatch(self, tmp_path):
        path = tmp_path / "m.pt"
        script_mean_logits(path, input_shape=(3, 224, 224))
        spec = ClassifierSpec("resnet", "intensity", "model_file", model_path=str(path))
        with pytest.raises(ValidationError, match="declares input"):
            load_classifier(spec)

    def test_missing_contract(self, tmp_path):
        path = tmp_path / "m.pt"
        script_mean_logits(path, contract=False)
        spec = ClassifierSpec("resnet", "intensity", "model_file", model_path=str(path))
        with pytest.raises(FormatError, match="contract.json"):
            load_classifier(spec)

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "m.pt"
        path.write_bytes(b"not a torchscript archive")
        spec = ClassifierSpec("resnet", "intensity", "model_file", model_path=str(path))
        with pytest.raises(FormatError, match="not a readable"):
            load_classifier(spec)

    def test_missing_file(self, tmp_path):
        spec = ClassifierSpec(
            "resnet", "intensity", "model_file", model_path=str(tmp_path / "absent.pt")
        )
        with pytest.raises(FileNotFoundError):
            load_classifier(spec)

    def test_wrong_patch_size_rejected(self, tmp_path):
        path = tmp_path / "m.pt"
        script_mean_logits(path)
        h = load_classifier(
            ClassifierSpec("resnet", "intensity", "model_file", model_path=str(path))
        )
        with pytest.raises(ValidationError, match="patches"):
            predict(h, [flat_patch(0.5, size=64)])
