"""Feature extractors mapping a 12x1000 signal to the prototype-matching spaces.

Two latent contracts, independent of which extractor is installed:

* 1D: a single length-512 vector (adaptive average pooling over time).
* 2D: a 512 x 1 x 32 map; the lead axis is collapsed by the first layer's
  full-height (12 x 7) kernel and time is downsampled 1000 -> 32.

The 18-layer residual networks are the reference extractors; the "tiny"
two-stage CNNs keep the same output contracts and run fast enough for CPU
test suites. Tiny extractors end in a linear conv (no norm layers), so their
eval-mode outputs match train-mode outputs exactly.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .container import read_container, write_container
from .errors import ConfigurationError

LATENT_CHANNELS = 512
LATENT_TIME = 32


class Tiny1d(nn.Module):
    """Two-stage CNN; signal (B, 12, 1000) -> latent vector (B, 512)."""

    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv1d(12, 32, kernel_size=7, stride=4, padding=3)
        self.conv2 = nn.Conv1d(32, LATENT_CHANNELS, kernel_size=7, stride=4, padding=3)
        self.act = nn.ReLU()
        self.pool = nn.AdaptiveAvgPool1d(1)

    def forward(self, x):
        x = self.act(self.conv1(x))
        x = self.conv2(x)
        return self.pool(x).squeeze(-1)


class Tiny2d(nn.Module):
    """Two-stage CNN; signal (B, 1, 12, 1000) -> latent map (B, 512, 1, 32)."""

    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 32, kernel_size=(12, 7), stride=(1, 4), padding=(0, 3))
        self.conv2 = nn.Conv2d(32, LATENT_CHANNELS, kernel_size=(1, 7), stride=(1, 4),
                               padding=(0, 3))
        self.act = nn.ReLU()
        self.pool = nn.AdaptiveAvgPool2d((1, LATENT_TIME))

    def forward(self, x):
        x = self.act(self.conv1(x))
        x = self.conv2(x)
        return self.pool(x)


class BasicBlock1d(nn.Module):
    def __init__(self, in_ch, out_ch, stride=1):
        super().__init__()
        self.conv1 = nn.Conv1d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm1d(out_ch)
        self.conv2 = nn.Conv1d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm1d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or in_ch != out_ch:
            self.downsample = nn.Sequential(
                nn.Conv1d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm1d(out_ch),
            )
        else:
            self.downsample = None

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class ResNet1d18(nn.Module):
    """18-layer 1D residual network; signal (B, 12, 1000) -> (B, 512)."""

    def __init__(self, dropout=0.0):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv1d(12, 64, kernel_size=7, stride=2, padding=3, bias=False),
            nn.BatchNorm1d(64),
            nn.ReLU(inplace=True),
            nn.MaxPool1d(kernel_size=3, stride=2, padding=1),
        )
        self.layer1 = self._layer(64, 64, stride=1)
        self.layer2 = self._layer(64, 128, stride=2)
        self.layer3 = self._layer(128, 256, stride=2)
        self.layer4 = self._layer(256, LATENT_CHANNELS, stride=2)
        self.pool = nn.AdaptiveAvgPool1d(1)
        self.dropout = nn.Dropout(dropout)

    @staticmethod
    def _layer(in_ch, out_ch, stride):
        return nn.Sequential(
            BasicBlock1d(in_ch, out_ch, stride=stride),
            BasicBlock1d(out_ch, out_ch),
        )

    def forward(self, x):
        x = self.stem(x)
        x = self.layer4(self.layer3(self.layer2(self.layer1(x))))
        x = self.pool(x).squeeze(-1)
        return self.dropout(x)


class BasicBlock2d(nn.Module):
    def __init__(self, in_ch, out_ch, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or in_ch != out_ch:
            self.downsample = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        else:
            self.downsample = None

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class ResNet2d18(nn.Module):
    """ResNet18 with a (12 x 7) first kernel collapsing the lead axis and the
    global pooling removed; signal (B, 1, 12, 1000) -> map (B, 512, 1, 32)."""

    def __init__(self, dropout=0.0):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 64, kernel_size=(12, 7), stride=(1, 2),
                               padding=(0, 3), bias=False)
        self.bn1 = nn.BatchNorm2d(64)
        self.relu = nn.ReLU(inplace=True)
        self.maxpool = nn.MaxPool2d(kernel_size=(1, 3), stride=(1, 2), padding=(0, 1))
        self.layer1 = self._layer(64, 64, stride=1)
        self.layer2 = self._layer(64, 128, stride=2)
        self.layer3 = self._layer(128, 256, stride=2)
        self.layer4 = self._layer(256, LATENT_CHANNELS, stride=2)
        self.dropout = nn.Dropout2d(dropout)

    @staticmethod
    def _layer(in_ch, out_ch, stride):
        return nn.Sequential(
            BasicBlock2d(in_ch, out_ch, stride=stride),
            BasicBlock2d(out_ch, out_ch),
        )

    def forward(self, x):
        x = self.maxpool(self.relu(self.bn1(self.conv1(x))))
        x = self.layer4(self.layer3(self.layer2(self.layer1(x))))
        return self.dropout(x)


EXTRACTORS_1D = {"tiny": Tiny1d, "resnet18": ResNet1d18}
EXTRACTORS_2D = {"tiny": Tiny2d, "resnet18": ResNet2d18}


def build_extractor(dim: str, variant: str, dropout: float = 0.0) -> nn.Module:
    registry = {"1d": EXTRACTORS_1D, "2d": EXTRACTORS_2D}.get(dim)
    if registry is None or variant not in registry:
        raise ConfigurationError(f"no extractor {variant!r} for dim {dim!r}")
    cls = registry[variant]
    if variant == "resnet18":
        return cls(dropout=dropout)
    return cls()


def extract_1d(signal: np.ndarray, extractor: nn.Module) -> np.ndarray:
    """Latent vector for one preprocessed 12x1000 signal."""
    if signal.shape != (12, 1000):
        raise ConfigurationError(f"expected (12, 1000) signal, got {signal.shape}")
    with torch.no_grad():
        x = torch.as_tensor(np.asarray(signal, dtype=np.float32)).unsqueeze(0)
        out = extractor(x)
    if out.shape != (1, LATENT_CHANNELS):
        raise ConfigurationError(f"1D extractor returned {tuple(out.shape)}")
    return out.squeeze(0).numpy()


def extract_2d(signal: np.ndarray, extractor: nn.Module) -> np.ndarray:
    """Latent map (512, 1, 32) for one preprocessed 12x1000 signal."""
    if signal.shape != (12, 1000):
        raise ConfigurationError(f"expected (12, 1000) signal, got {signal.shape}")
    with torch.no_grad():
        x = torch.as_tensor(np.asarray(signal, dtype=np.float32)).reshape(1, 1, 12, 1000)
        out = extractor(x)
    if out.shape != (1, LATENT_CHANNELS, 1, LATENT_TIME):
        raise ConfigurationError(f"2D extractor returned {tuple(out.shape)}")
    return out.squeeze(0).numpy()


def save_extractor(path, extractor: nn.Module, variant: str, dim: str,
                   extra_meta: dict | None = None) -> None:
    """Checkpoint: named float32 parameter arrays + JSON header with the variant."""
    arrays = {}
    for name, tensor in extractor.state_dict().items():
        if not torch.is_floating_point(tensor):
            continue  # counters like num_batches_tracked are not model weights
        arrays[name] = tensor.detach().cpu().numpy().astype(np.float32)
    meta = {"kind": "extractor", "variant": variant, "dim": dim}
    meta.update(extra_meta or {})
    write_container(path, arrays, meta)


def load_extractor(path, dropout: float = 0.0) -> tuple[nn.Module, dict]:
    arrays, meta = read_container(path)
    extractor = build_extractor(meta["dim"], meta["variant"], dropout=dropout)
    load_weight_arrays(extractor, arrays)
    return extractor, meta


def load_weight_arrays(module: nn.Module, arrays: dict[str, np.ndarray],
                       skip_missing: bool = False) -> list[str]:
    """Copy named float arrays into a module; shape mismatches always raise."""
    state = module.state_dict()
    loaded = []
    for name, arr in arrays.items():
        if name not in state:
            if skip_missing:
                continue
            raise ConfigurationError(f"unknown parameter {name!r}")
        if tuple(state[name].shape) != tuple(arr.shape):
            raise ConfigurationError(
                f"parameter {name!r}: checkpoint shape {arr.shape} vs "
                f"model shape {tuple(state[name].shape)}"
            )
        state[name] = torch.as_tensor(arr)
        loaded.append(name)
    module.load_state_dict(state)
    return loaded


def load_pretrained_2d(extractor: ResNet2d18, state_dict_path) -> list[str]:
    """Optional hook: copy natural-image ResNet18 weights into every layer
    whose name and shape match (the adapted first conv never matches)."""
    state = torch.load(state_dict_path, map_location="cpu", weights_only=True)
    own = extractor.state_dict()
    loaded = []
    for name, tensor in state.items():
        if name in own and tuple(own[name].shape) == tuple(tensor.shape):
            own[name] = tensor
            loaded.append(name)
    extractor.load_state_dict(own)
    return loaded
