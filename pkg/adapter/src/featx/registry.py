"""Backbone registry: builders, layer tap tables, pinned preprocessing.

Preprocessing (resize filter, crop, normalization constants) is pinned per
extractor in the versioned table below so runs stay comparable; resizing
details measurably affect evaluation scores, so they are part of the recipe,
not a free choice.  ViT taps emit the global (class) token; convolutional
taps are spatially average-pooled.

Without a checkpoint file, weights are initialized from a seeded generator
(checkpoint id "seeded-random:<seed>"), which keeps extraction byte-for-byte
reproducible; pass a state-dict path to use real weights, and its file name
becomes the recorded checkpoint id.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torchvision import models
from torchvision.transforms import InterpolationMode, transforms

from .errors import UnknownExtractor, UnknownLayer
from .repvgg import repvgg_a0

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)

PREPROCESS_TABLE = {
    # id: (resize, crop, interpolation, mean, std)
    "imagenet-224-bilinear-v1": (256, 224, InterpolationMode.BILINEAR, IMAGENET_MEAN, IMAGENET_STD),
    "clip-224-bicubic-v1": (224, 224, InterpolationMode.BICUBIC, CLIP_MEAN, CLIP_STD),
    "inception-299-bilinear-v1": (342, 299, InterpolationMode.BILINEAR, IMAGENET_MEAN, IMAGENET_STD),
}


def build_transform(preprocess_id: str):
    resize, crop, interp, mean, std = PREPROCESS_TABLE[preprocess_id]
    return transforms.Compose(
        [
            transforms.Resize(resize, interpolation=interp, antialias=True),
            transforms.CenterCrop(crop),
            transforms.ToTensor(),
            transforms.Normalize(mean=mean, std=std),
        ]
    )


@dataclass(frozen=True)
class BackboneSpec:
    """One extractor: how to build it, where to tap it, how to feed it."""

    extractor_id: str
    builder: object  # () -> nn.Module
    taps: dict[str, tuple[str, str]]  # layer_id -> (module path, pooling kind)
    preprocess_id: str
    architecture: str
    default_layers: tuple[str, ...] = ("pool",)

    def tap_for(self, layer_id: str) -> tuple[str, str]:
        if layer_id not in self.taps:
            raise UnknownLayer(
                f"{self.extractor_id} has no layer {layer_id!r}; "
                f"available: {sorted(self.taps)}"
            )
        return self.taps[layer_id]


def _spec(extractor_id, builder, taps, preprocess_id, architecture):
    return BackboneSpec(
        extractor_id=extractor_id,
        builder=builder,
        taps=taps,
        preprocess_id=preprocess_id,
        architecture=architecture,
    )


# pooling kinds: "spatial" = mean over H,W of a (B,C,H,W) map;
# "token" = class token of a (B,seq,hidden) sequence; "flat" = flatten (B,C,1,1)
_VIT_TAPS = {
    "block3": ("encoder.layers.encoder_layer_2", "token"),
    "block6": ("encoder.layers.encoder_layer_5", "token"),
    "block9": ("encoder.layers.encoder_layer_8", "token"),
    "block12": ("encoder.layers.encoder_layer_11", "token"),
    "pool": ("encoder.ln", "token"),
}

REGISTRY: dict[str, BackboneSpec] = {
    "convnext": _spec(
        "convnext",
        lambda: models.convnext_tiny(weights=None),
        {
            "stage1": ("features.1", "spatial"),
            "stage2": ("features.3", "spatial"),
            "stage3": ("features.5", "spatial"),
            "stage4": ("features.7", "spatial"),
            "pool": ("avgpool", "flat"),
        },
        "imagenet-224-bilinear-v1",
        "torchvision/convnext_tiny",
    ),
    "repvgg": _spec(
        "repvgg",
        repvgg_a0,
        {
            "stage1": ("stage1", "spatial"),
            "stage2": ("stage2", "spatial"),
            "stage3": ("stage3", "spatial"),
            "stage4": ("stage4", "spatial"),
            "pool": ("gap", "flat"),
        },
        "imagenet-224-bilinear-v1",
        "featx/repvgg_a0",
    ),
    "swav": _spec(
        "swav",
        lambda: models.resnet50(weights=None),
        {
            "stage1": ("layer1", "spatial"),
            "stage2": ("layer2", "spatial"),
            "stage3": ("layer3", "spatial"),
            "stage4": ("layer4", "spatial"),
            "pool": ("avgpool", "flat"),
        },
        "imagenet-224-bilinear-v1",
        "torchvision/resnet50 (SWAV checkpoints use this trunk)",
    ),
    "vit": _spec(
        "vit",
        lambda: models.vit_b_16(weights=None),
        dict(_VIT_TAPS),
        "imagenet-224-bilinear-v1",
        "torchvision/vit_b_16",
    ),
    "moco_vit": _spec(
        "moco_vit",
        lambda: models.vit_b_16(weights=None),
        dict(_VIT_TAPS),
        "imagenet-224-bilinear-v1",
        "torchvision/vit_b_16 (MoCo-v3 checkpoints use this trunk)",
    ),
    "clip_vit": _spec(
        "clip_vit",
        lambda: models.vit_b_32(weights=None),
        dict(_VIT_TAPS),
        "clip-224-bicubic-v1",
        "torchvision/vit_b_32 (stand-in for the CLIP visual tower)",
    ),
    "inception_v3": _spec(
        "inception_v3",
        lambda: models.inception_v3(weights=None, aux_logits=True, init_weights=True),
        {
            "mixed5": ("Mixed_5d", "spatial"),
            "mixed6": ("Mixed_6e", "spatial"),
            "mixed7": ("Mixed_7c", "spatial"),
            "pool": ("avgpool", "flat"),
        },
        "inception-299-bilinear-v1",
        "torchvision/inception_v3",
    ),
}

EXTRACTOR_IDS = tuple(sorted(REGISTRY))


def get_backbone(extractor_id: str) -> BackboneSpec:
    try:
        return REGISTRY[extractor_id]
    except KeyError:
        raise UnknownExtractor(
            f"unknown extractor {extractor_id!r}; available: {list(EXTRACTOR_IDS)}"
        ) from None


def build_model(spec: BackboneSpec, seed: int, weights_path: str | None = None):
    """Instantiate the backbone deterministically.

    Seeded construction: every default initializer draws from a generator
    seeded per (extractor, seed), so two builds are parameter-identical.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed + hash_extractor(spec.extractor_id))
        model = spec.builder()
    checkpoint = f"seeded-random:{seed}"
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
        checkpoint = str(weights_path)
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model, checkpoint


def hash_extractor(extractor_id: str) -> int:
    """Stable small offset so distinct extractors never share init streams."""
    return sum(i * ord(c) for i, c in enumerate(extractor_id, start=1)) % 100003
