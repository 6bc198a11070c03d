"""Compact RepVGG-A0 backbone (torchvision has no RepVGG).

Train-form blocks: parallel 3x3, 1x1 and (when shapes allow) identity
branches, each batch-normalized, summed, then ReLU.  The reparameterized
inference form is irrelevant here; features are tapped from the train-form
graph in eval mode.
"""

from __future__ import annotations

from torch import nn


class RepVGGBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        self.conv3 = nn.Sequential(
            nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False),
            nn.BatchNorm2d(out_ch),
        )
        self.conv1 = nn.Sequential(
            nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
            nn.BatchNorm2d(out_ch),
        )
        self.identity = (
            nn.BatchNorm2d(out_ch) if in_ch == out_ch and stride == 1 else None
        )
        self.act = nn.ReLU(inplace=True)

    def forward(self, x):
        out = self.conv3(x) + self.conv1(x)
        if self.identity is not None:
            out = out + self.identity(x)
        return self.act(out)


class RepVGGA0(nn.Module):
    """RepVGG-A0 layout: widths (48, 48, 96, 192, 1280), blocks (1, 2, 4, 14, 1)."""

    def __init__(self, num_classes: int = 1000):
        super().__init__()
        widths = [48, 48, 96, 192, 1280]
        blocks = [1, 2, 4, 14, 1]
        in_ch = 3
        stages = []
        for width, depth in zip(widths, blocks):
            layers = []
            for i in range(depth):
                layers.append(RepVGGBlock(in_ch, width, stride=2 if i == 0 else 1))
                in_ch = width
            stages.append(nn.Sequential(*layers))
        self.stage0, self.stage1, self.stage2, self.stage3, self.stage4 = stages
        self.gap = nn.AdaptiveAvgPool2d(1)
        self.linear = nn.Linear(widths[-1], num_classes)

    def forward(self, x):
        x = self.stage0(x)
        x = self.stage1(x)
        x = self.stage2(x)
        x = self.stage3(x)
        x = self.stage4(x)
        x = self.gap(x).flatten(1)
        return self.linear(x)


def repvgg_a0() -> RepVGGA0:
    return RepVGGA0()


__all__ = ["RepVGGA0", "RepVGGBlock", "repvgg_a0"]
