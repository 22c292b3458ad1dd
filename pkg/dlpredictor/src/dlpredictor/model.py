"""2D CNN-LSTM regressor mapping (residual, parameter) series to the
normalized tipping label.

The convolution slides over the length axis with a 2-wide kernel spanning
both channels, max pooling shortens the feature sequence, two stacked LSTMs
summarize it, and a dense head emits the scalar prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class NetworkSpec:
    conv_filters: int = 60
    conv_kernel: tuple = (8, 2)
    pool: tuple = (4, 1)
    lstm1: int = 40
    lstm2: int = 60
    dense_out: int = 1
    lr: float = 0.01

    @classmethod
    def for_variant(cls, variant):
        if variant == "dl":
            return cls()
        if variant == "null":
            return cls(conv_filters=50, conv_kernel=(10, 2), pool=(4, 1),
                       lstm1=50, lstm2=50, lr=0.005)
        raise ValueError(f"unknown variant: {variant}")

    def to_dict(self):
        return {"conv_filters": self.conv_filters,
                "conv_kernel": list(self.conv_kernel),
                "pool": list(self.pool), "lstm1": self.lstm1,
                "lstm2": self.lstm2, "dense_out": self.dense_out,
                "lr": self.lr}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    ensemble: int = 10
    seed: int = 0
    batch_size: int = 64
    split: tuple = (0.95, 0.04, 0.01)
    variant: str = "dl"

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


class TippingNet(nn.Module):
    """Input (batch, 1, 500, 2) -> scalar normalized tipping label."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        self.conv = nn.Conv2d(1, spec.conv_filters, spec.conv_kernel)
        self.pool = nn.MaxPool2d(spec.pool)
        self.lstm1 = nn.LSTM(spec.conv_filters, spec.lstm1, batch_first=True)
        self.lstm2 = nn.LSTM(spec.lstm1, spec.lstm2, batch_first=True)
        self.head = nn.Linear(spec.lstm2, spec.dense_out)

    def forward(self, x):
        h = torch.relu(self.conv(x))      # (B, F, L', 1)
        h = self.pool(h)                  # (B, F, L'', 1)
        h = h.squeeze(-1).permute(0, 2, 1)  # (B, L'', F)
        h, _ = self.lstm1(h)
        h, _ = self.lstm2(h)
        return self.head(h[:, -1, :]).squeeze(-1)
