import numpy as np
import pytest
import torch
from torch import nn

from cmrqa_trainer import (
    ARCHITECTURES,
    TrainerError,
    WeightsUnavailableError,
    build_model,
    frozen_drift,
    parameter_counts,
    snapshot_frozen,
)


def fresh(arch, **kw):
    torch.manual_seed(0)
    return build_model(arch, "intensity", pretrained=False, **kw)


def head_of(model):
    backbone = model.backbone
    if hasattr(backbone, "fc") and isinstance(backbone.fc, nn.Sequential):
        return backbone.fc
    if hasattr(backbone, "classifier"):
        return backbone.classifier
    return backbone.heads


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_shape_contract(arch):
    model = fresh(arch)
    model.eval()
    with torch.inference_mode():
        out = model(torch.rand(2, 1, 224, 224))
    assert out.shape == (2, 3)
    assert torch.isfinite(out).all()


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_mostly_frozen(arch):
    trainable, total = parameter_counts(fresh(arch))
    assert 0 < trainable < 0.05 * total


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_one_step_touches_only_trainable_weights(arch):
    torch.manual_seed(1)
    model = fresh(arch)
    model.train()
    frozen = snapshot_frozen(model)
    before_head = [p.detach().clone() for p in head_of(model).parameters()]

    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.Adam(params, lr=1e-3)
    loss = nn.CrossEntropyLoss()(model(torch.rand(4, 1, 224, 224)), torch.tensor([0, 1, 2, 0]))
    loss.backward()
    opt.step()

    assert frozen_drift(model, frozen) == []
    after_head = list(head_of(model).parameters())
    assert any(not torch.equal(a, b) for a, b in zip(before_head, after_head))


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_adapter_shape_and_trainability(arch):
    model = fresh(arch)
    conv = model.adapter[0]
    assert isinstance(conv, nn.Conv2d)
    assert conv.in_channels == 1 and conv.out_channels == 3
    assert conv.kernel_size == (3, 3)
    assert isinstance(model.adapter[1], nn.BatchNorm2d)
    assert isinstance(model.adapter[2], nn.ReLU)
    assert all(p.requires_grad for p in model.adapter.parameters())


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_normalization_layers_are_trainable(arch):
    model = fresh(arch)
    norm_types = (nn.BatchNorm1d, nn.BatchNorm2d, nn.BatchNorm3d, nn.LayerNorm, nn.GroupNorm)
    norms = [m for m in model.backbone.modules() if isinstance(m, norm_types)]
    assert norms
    for module in norms:
        assert all(p.requires_grad for p in module.parameters())


def test_vit_uses_layer_norms():
    model = fresh("vit")
    kinds = {type(m) for m in model.backbone.modules()}
    assert nn.LayerNorm in kinds
    assert nn.BatchNorm2d not in kinds


@pytest.mark.parametrize("arch", ARCHITECTURES)
@pytest.mark.parametrize("dropout", [0.5, 0.3])
def test_head_has_requested_dropout(arch, dropout):
    model = fresh(arch, dropout=dropout)
    drops = [m for m in head_of(model).modules() if isinstance(m, nn.Dropout)]
    assert len(drops) == 1
    assert drops[0].p == pytest.approx(dropout)


def test_non_head_backbone_weights_are_frozen():
    model = fresh("resnet")
    head_params = {id(p) for p in head_of(model).parameters()}
    norm_types = (nn.BatchNorm1d, nn.BatchNorm2d, nn.BatchNorm3d, nn.LayerNorm, nn.GroupNorm)
    norm_params = {
        id(p)
        for m in model.backbone.modules()
        if isinstance(m, norm_types)
        for p in m.parameters()
    }
    for p in model.backbone.parameters():
        expected = id(p) in head_params or id(p) in norm_params
        assert p.requires_grad is expected


def test_unknown_architecture_and_representation():
    with pytest.raises(TrainerError):
        build_model("densenet", "intensity", pretrained=False)
    with pytest.raises(TrainerError):
        build_model("resnet", "phase", pretrained=False)
    with pytest.raises(TrainerError):
        build_model("resnet", "intensity", variant="vit_b_16", pretrained=False)


def test_unavailable_weights_surface_clearly(monkeypatch):
    import torchvision.models

    def boom(*args, **kwargs):
        raise RuntimeError("no route to weight host")

    monkeypatch.setattr(torchvision.models, "get_model", boom)
    with pytest.raises(WeightsUnavailableError, match="resnet18"):
        build_model("resnet", "intensity", pretrained=True)


def test_snapshot_detects_tampering():
    model = fresh("resnet")
    frozen = snapshot_frozen(model)
    with torch.no_grad():
        weight = model.backbone.conv1.weight
        assert not weight.requires_grad
        weight.add_(1e-3)
    drifted = frozen_drift(model, frozen)
    assert "backbone.conv1.weight" in drifted


def test_random_init_is_seeded():
    a = fresh("resnet")
    b = fresh("resnet")
    xa = dict(a.named_parameters())
    xb = dict(b.named_parameters())
    assert all(torch.equal(xa[k], xb[k]) for k in xa)
    assert np.isfinite(sum(p.abs().sum().item() for p in a.parameters()))
