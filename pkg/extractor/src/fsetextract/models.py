"""Backbone architectures whose penultimate activations feed the feature file.

Two architectures are supported:

* ``wrn-28-10``: a wide residual network with 28 convolutional layers and
  widening factor 10. The penultimate activations are the global-average-
  pooled outputs of the final BN+ReLU, 640 per image.
* ``resnet18``: torchvision's ResNet18 with the first convolution shrunk to
  3x3 and the first two down-sampling stages removed (conv1 stride 1, no
  max-pool), appropriate for small inputs. Pooled features are 512 wide.

Both feature heads sit behind a ReLU, so every emitted activation is
nonnegative.
"""
from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F
from torchvision.models import resnet18

ARCHITECTURES = ("wrn-28-10", "resnet18")

FEATURE_DIMS = {"wrn-28-10": 640, "resnet18": 512}


class ArchitectureMismatchError(RuntimeError):
    """Checkpoint weights do not fit the requested architecture."""


class _WideBlock(nn.Module):
    """Pre-activation basic block with a widening-friendly shortcut."""

    def __init__(self, in_planes: int, planes: int, stride: int):
        super().__init__()
        self.bn1 = nn.BatchNorm2d(in_planes)
        self.conv1 = nn.Conv2d(in_planes, planes, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, 3, stride=1, padding=1, bias=False)
        self.shortcut = None
        if stride != 1 or in_planes != planes:
            self.shortcut = nn.Conv2d(in_planes, planes, 1, stride=stride, bias=False)

    def forward(self, x):
        out = F.relu(self.bn1(x))
        identity = self.shortcut(out) if self.shortcut is not None else x
        out = self.conv2(F.relu(self.bn2(self.conv1(out))))
        return out + identity


class WideResNet(nn.Module):
    """WRN-d-w for 28 layers / widen 10: three stages of (d - 4) / 6 blocks."""

    def __init__(self, depth: int = 28, widen: int = 10):
        super().__init__()
        if (depth - 4) % 6:
            raise ValueError(f"depth must be 6n + 4, got {depth}")
        n = (depth - 4) // 6
        widths = [16, 16 * widen, 32 * widen, 64 * widen]
        self.conv1 = nn.Conv2d(3, widths[0], 3, stride=1, padding=1, bias=False)
        self.stage1 = self._stage(widths[0], widths[1], n, stride=1)
        self.stage2 = self._stage(widths[1], widths[2], n, stride=2)
        self.stage3 = self._stage(widths[2], widths[3], n, stride=2)
        self.bn_final = nn.BatchNorm2d(widths[3])
        self.feature_dim = widths[3]

    @staticmethod
    def _stage(in_planes: int, planes: int, blocks: int, stride: int) -> nn.Sequential:
        layers = [_WideBlock(in_planes, planes, stride)]
        layers += [_WideBlock(planes, planes, 1) for _ in range(blocks - 1)]
        return nn.Sequential(*layers)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        out = self.conv1(x)
        out = self.stage3(self.stage2(self.stage1(out)))
        out = F.relu(self.bn_final(out))
        out = F.adaptive_avg_pool2d(out, 1)
        return torch.flatten(out, 1)

    forward = features


class SmallInputResNet18(nn.Module):
    """ResNet18 with a 3x3 first conv and the first two down-samplings removed."""

    def __init__(self):
        super().__init__()
        net = resnet18(weights=None)
        net.conv1 = nn.Conv2d(3, 64, 3, stride=1, padding=1, bias=False)
        net.maxpool = nn.Identity()
        self.net = net
        self.feature_dim = 512

    def features(self, x: torch.Tensor) -> torch.Tensor:
        net = self.net
        out = net.relu(net.bn1(net.conv1(x)))
        out = net.maxpool(out)
        out = net.layer4(net.layer3(net.layer2(net.layer1(out))))
        out = net.avgpool(out)
        return torch.flatten(out, 1)

    forward = features


def build_model(arch: str) -> nn.Module:
    if arch == "wrn-28-10":
        return WideResNet(depth=28, widen=10)
    if arch == "resnet18":
        return SmallInputResNet18()
    raise ValueError(f"unknown architecture {arch!r}, expected one of {ARCHITECTURES}")


def load_checkpoint(model: nn.Module, path: str, arch: str) -> None:
    """Load backbone weights, tolerating classifier heads the model lacks.

    Checkpoints may be a bare state dict or wrapped under a 'state',
    'state_dict', or 'model' key, with or without 'module.' prefixes. Every
    backbone parameter must be present with a matching shape; extra keys
    (classifier heads, rotation heads) are ignored.
    """
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise ArchitectureMismatchError(f"cannot load checkpoint {path}: {exc}") from exc
    state = payload
    if isinstance(payload, dict):
        for key in ("state_dict", "state", "model"):
            if key in payload and isinstance(payload[key], dict):
                state = payload[key]
                break
    if not isinstance(state, dict):
        raise ArchitectureMismatchError(f"{path} does not contain a state dict")
    state = {k.removeprefix("module."): v for k, v in state.items()}
    try:
        missing, _unexpected = model.load_state_dict(state, strict=False)
    except RuntimeError as exc:
        raise ArchitectureMismatchError(
            f"checkpoint {path} does not fit {arch}: {exc}"
        ) from exc
    if missing:
        raise ArchitectureMismatchError(
            f"checkpoint {path} is missing {len(missing)} {arch} weights "
            f"(first: {missing[0]})"
        )
