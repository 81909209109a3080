"""
TA_SignNet.py

The attribute network: whole / body / edge convolutional branches, the color
and fur heads on the whole branch, token-attention fusion of the color and fur features into
the body and edge branches, and the eight routed attribute heads. Also the label derivation
for the auxiliary color and fur targets and the weighted multi-task loss.

Attribute routing:
    edge branch (fused)  -> pale, ecchymosis, tipsidered
    body branch (fused)  -> redspot, furthick, furyellow
    body branch (direct) -> crack
    edge branch (direct) -> toothmark

Dependencies:
    - torch: nn.Module parameter registry; all math goes through TA_Tensor_AD.
    - numpy: median-frequency class weights.

Usage Example:
    >>> net = SignNet(SignNetConfig.toy(), seed=0)
    >>> pred = net(whole, body, edge)
    >>> loss = total_loss(pred, *label_tensors(attrs), LossWeights())
"""

import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from TA_Errors import ShapeMismatchError, ZeroCountError
from TA_Tensor_AD import (
    DTYPE, Rng, concat, conv2d, ffn, global_avg_pool, layer_norm, linear, maxpool, relu,
    scaled_dot_attention, sigmoid_bce_with_logits,
)

ATTRIBUTES: Tuple[str, ...] = (
    "pale", "tipsidered", "redspot", "ecchymosis", "crack", "toothmark", "furthick", "furyellow",
)
COLOR_NAMES: Tuple[str, ...] = ("white", "yellow", "black", "red")

# heads on the fused features, in head-output order
EDGE_HEAD_ATTRS = ("pale", "ecchymosis", "tipsidered")
BODY_HEAD_ATTRS = ("redspot", "furthick", "furyellow")

ROUTING: Dict[str, str] = {
    "pale": "edge", "ecchymosis": "edge", "tipsidered": "edge", "toothmark": "edge",
    "redspot": "body", "furthick": "body", "furyellow": "body", "crack": "body",
}

# attributes that never carry fur under any configuration
FUR_FREE = ("pale", "ecchymosis", "tipsidered", "crack", "toothmark")


# --- labels -----------------------------------------------------------------

@dataclass(frozen=True)
class AttributeVector:
    pale: int = 0
    tipsidered: int = 0
    redspot: int = 0
    ecchymosis: int = 0
    crack: int = 0
    toothmark: int = 0
    furthick: int = 0
    furyellow: int = 0

    def __post_init__(self):
        for name in ATTRIBUTES:
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"attribute '{name}' must be 0 or 1, got {getattr(self, name)!r}")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "AttributeVector":
        if len(bits) != len(ATTRIBUTES):
            raise ValueError(f"expected {len(ATTRIBUTES)} bits, got {len(bits)}")
        return cls(*(int(b) for b in bits))

    def to_bits(self) -> Tuple[int, ...]:
        return tuple(getattr(self, name) for name in ATTRIBUTES)

    def positives(self) -> List[str]:
        return [name for name in ATTRIBUTES if getattr(self, name)]


@dataclass(frozen=True)
class AuxLabels:
    color: Tuple[int, int, int, int]
    fur_present: int


def derive_color_labels(t: AttributeVector) -> Tuple[int, int, int, int]:
    """(white, yellow, black, red)."""
    return (
        int(t.pale or t.furthick),
        int(t.furyellow),
        int(t.ecchymosis),
        int(t.tipsidered or t.redspot),
    )


def derive_fur_label(t: AttributeVector, include_redspot: bool = False) -> int:
    fur = t.furthick or t.furyellow
    if include_redspot:
        fur = fur or t.redspot
    return int(fur)


def derive_aux(t: AttributeVector, include_redspot: bool = False) -> AuxLabels:
    return AuxLabels(derive_color_labels(t), derive_fur_label(t, include_redspot))


def label_tensors(attrs: Sequence[AttributeVector], include_redspot: bool = False):
    """Stacks (targets B x 8, color B x 4, fur B) as float64 tensors."""
    targets = torch.tensor([a.to_bits() for a in attrs], dtype=DTYPE).reshape(-1, len(ATTRIBUTES))
    color = torch.tensor([derive_color_labels(a) for a in attrs], dtype=DTYPE).reshape(-1, 4)
    fur = torch.tensor([derive_fur_label(a, include_redspot) for a in attrs], dtype=DTYPE)
    return targets, color, fur


def aux_from_targets(targets: torch.Tensor, include_redspot: bool = False):
    """Color and fur targets straight from a B x 8 bit tensor."""
    col = {name: targets[:, i] for i, name in enumerate(ATTRIBUTES)}
    color = torch.stack([
        torch.maximum(col["pale"], col["furthick"]),
        col["furyellow"],
        col["ecchymosis"],
        torch.maximum(col["tipsidered"], col["redspot"]),
    ], dim=1)
    fur = torch.maximum(col["furthick"], col["furyellow"])
    if include_redspot:
        fur = torch.maximum(fur, col["redspot"])
    return color, fur


# --- class weights ------------------------------------------------------------

def attr_weights(pos_counts: Sequence[float]) -> np.ndarray:
    """alpha_j = median(F) / F_j over the positive-label counts of the training split."""
    counts = np.asarray(pos_counts, dtype=np.float64)
    if counts.shape != (len(ATTRIBUTES),):
        raise ValueError(f"expected {len(ATTRIBUTES)} counts, got shape {counts.shape}")
    zero = [ATTRIBUTES[i] for i in np.flatnonzero(counts <= 0)]
    if zero:
        raise ZeroCountError(f"no positive training labels for: {', '.join(zero)}")
    return np.median(counts) / counts


@dataclass
class LossWeights:
    w_color: float = 1.0
    w_fur: float = 0.6
    alpha: Tuple[float, ...] = (1.0,) * len(ATTRIBUTES)

    def __post_init__(self):
        self.alpha = tuple(float(a) for a in self.alpha)
        if len(self.alpha) != len(ATTRIBUTES):
            raise ValueError(f"alpha needs {len(ATTRIBUTES)} entries, got {len(self.alpha)}")
        if self.w_color < 0 or self.w_fur < 0 or min(self.alpha) < 0:
            raise ValueError("loss weights must be non-negative")


# --- model ------------------------------------------------------------------

@dataclass
class SignNetConfig:
    widths: Tuple[int, ...] = (32, 64, 128, 256)
    blocks: int = 2
    d_model: int = 128
    ffn_mult: int = 4
    side: int = 256
    fuse_color: bool = True
    fuse_fur: bool = True
    fur_includes_redspot: bool = False

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if not self.widths or min(self.widths) < 1:
            raise ValueError(f"backbone widths must be >= 1, got {self.widths}")
        if self.blocks < 1:
            raise ValueError("at least one residual block per stage")
        if self.d_model < 8:
            raise ValueError(f"d_model must be >= 8, got {self.d_model}")
        if self.ffn_mult < 1 or self.side < 8:
            raise ValueError("ffn_mult must be >= 1 and side >= 8")

    @classmethod
    def toy(cls, **overrides) -> "SignNetConfig":
        base = dict(widths=(8, 16), blocks=1, d_model=16, side=32)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["widths"] = list(self.widths)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SignNetConfig":
        return cls(**{k: (tuple(v) if k == "widths" else v) for k, v in data.items()})


@dataclass
class Predictions:
    attr_logits: torch.Tensor   # B x 8, canonical attribute order
    color_logits: torch.Tensor  # B x 4
    fur_logit: torch.Tensor     # B


def _param(t: torch.Tensor) -> nn.Parameter:
    return nn.Parameter(t)


def _he(rng: Rng, shape: Sequence[int], fan_in: int) -> nn.Parameter:
    return _param(rng.normal(shape, math.sqrt(2.0 / fan_in)))


class Dense(nn.Module):
    def __init__(self, rng: Rng, d_in: int, d_out: int, zero: bool = False):
        super().__init__()
        self.weight = _param(torch.zeros(d_in, d_out, dtype=DTYPE)) if zero else _he(rng, (d_in, d_out), d_in)
        self.bias = _param(torch.zeros(d_out, dtype=DTYPE))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return linear(x, self.weight, self.bias)


class ResidualBlock(nn.Module):
    def __init__(self, rng: Rng, c_in: int, c_out: int, stride: int):
        super().__init__()
        self.stride = stride
        self.conv1 = _he(rng, (c_out, c_in, 3, 3), c_in * 9)
        self.bias1 = _param(torch.zeros(c_out, dtype=DTYPE))
        self.conv2 = _he(rng, (c_out, c_out, 3, 3), c_out * 9)
        self.bias2 = _param(torch.zeros(c_out, dtype=DTYPE))
        if stride != 1 or c_in != c_out:
            self.shortcut = _he(rng, (c_out, c_in, 1, 1), c_in)
        else:
            self.register_parameter("shortcut", None)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = relu(conv2d(x, self.conv1, self.bias1, stride=self.stride, padding=1))
        y = conv2d(y, self.conv2, self.bias2, padding=1)
        skip = x if self.shortcut is None else conv2d(x, self.shortcut, stride=self.stride)
        return relu(y + skip)


class Backbone(nn.Module):
    """Stem conv + 2x2 max-pool, residual stages (stride 2 between stages), GAP, projection."""

    def __init__(self, rng: Rng, cfg: SignNetConfig):
        super().__init__()
        w0 = cfg.widths[0]
        self.stem = _he(rng, (w0, 3, 3, 3), 27)
        self.stem_bias = _param(torch.zeros(w0, dtype=DTYPE))
        blocks, c_in = [], w0
        for i, width in enumerate(cfg.widths):
            for j in range(cfg.blocks):
                blocks.append(ResidualBlock(rng, c_in, width, 2 if (i > 0 and j == 0) else 1))
                c_in = width
        self.blocks = nn.ModuleList(blocks)
        self.project = Dense(rng, c_in, cfg.d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = maxpool(relu(conv2d(x, self.stem, self.stem_bias, padding=1)), 2)
        for block in self.blocks:
            y = block(y)
        return self.project(global_avg_pool(y))


class AuxHead(nn.Module):
    """Hidden layer (the fusion token) followed by the output logits."""

    def __init__(self, rng: Rng, d_model: int, n_out: int):
        super().__init__()
        self.hidden = Dense(rng, d_model, d_model)
        self.out = Dense(rng, d_model, n_out)

    def forward(self, feature: torch.Tensor):
        token = relu(self.hidden(feature))
        return token, self.out(token)


class Fusion(nn.Module):
    """
    Single-head attention over the token sequence [F_fur; F_color; F_i]; the attended value
    at the F_i position is added back, normalized, and passed through the FFN sub-layer.
    """

    def __init__(self, rng: Rng, d_model: int, ffn_mult: int):
        super().__init__()
        hidden = d_model * ffn_mult
        self.wq = _he(rng, (d_model, d_model), d_model)
        self.wk = _he(rng, (d_model, d_model), d_model)
        self.wv = _he(rng, (d_model, d_model), d_model)
        self.ln1_gamma = _param(torch.ones(d_model, dtype=DTYPE))
        self.ln1_beta = _param(torch.zeros(d_model, dtype=DTYPE))
        self.w1 = _he(rng, (d_model, hidden), d_model)
        self.b1 = _param(torch.zeros(hidden, dtype=DTYPE))
        self.w2 = _he(rng, (hidden, d_model), hidden)
        self.b2 = _param(torch.zeros(d_model, dtype=DTYPE))
        self.ln2_gamma = _param(torch.ones(d_model, dtype=DTYPE))
        self.ln2_beta = _param(torch.zeros(d_model, dtype=DTYPE))

    def forward(self, feature: torch.Tensor, context: Sequence[torch.Tensor]) -> torch.Tensor:
        tokens = concat([t.unsqueeze(1) for t in (*context, feature)], axis=1)
        attended = scaled_dot_attention(tokens, self.wq, self.wk, self.wv)[:, -1, :]
        f1 = layer_norm(feature + attended, self.ln1_gamma, self.ln1_beta)
        return layer_norm(f1 + ffn(f1, self.w1, self.b1, self.w2, self.b2), self.ln2_gamma, self.ln2_beta)


class SignNet(nn.Module):
    def __init__(self, cfg: Optional[SignNetConfig] = None, seed: int = 0):
        super().__init__()
        self.cfg = cfg or SignNetConfig()
        self.seed = seed
        rng = Rng(seed)
        d = self.cfg.d_model
        self.whole = Backbone(rng, self.cfg)
        self.body = Backbone(rng, self.cfg)
        self.edge = Backbone(rng, self.cfg)
        self.color_head = AuxHead(rng, d, len(COLOR_NAMES))
        self.fur_head = AuxHead(rng, d, 1)
        self.fuse_body = Fusion(rng, d, self.cfg.ffn_mult)
        self.fuse_edge = Fusion(rng, d, self.cfg.ffn_mult)
        self.crack_head = Dense(rng, d, 1)
        self.toothmark_head = Dense(rng, d, 1)
        self.body_heads = Dense(rng, d, len(BODY_HEAD_ATTRS))
        self.edge_heads = Dense(rng, d, len(EDGE_HEAD_ATTRS))

    def _check_input(self, x: torch.Tensor, name: str) -> None:
        side = self.cfg.side
        if x.dim() != 4 or tuple(x.shape[1:]) != (3, side, side):
            raise ShapeMismatchError(f"{name} input must be B x 3 x {side} x {side}, got {tuple(x.shape)}")

    def forward(self, whole: torch.Tensor, body: torch.Tensor, edge: torch.Tensor) -> Predictions:
        for x, name in ((whole, "whole"), (body, "body"), (edge, "edge")):
            self._check_input(x, name)
        if not (whole.shape[0] == body.shape[0] == edge.shape[0]):
            raise ShapeMismatchError("whole/body/edge batches differ in size")

        f_whole = self.whole(whole)
        f_color, color_logits = self.color_head(f_whole)
        f_fur, fur_logit = self.fur_head(f_whole)
        f_body = self.body(body)
        f_edge = self.edge(edge)

        context = []
        if self.cfg.fuse_fur:
            context.append(f_fur)
        if self.cfg.fuse_color:
            context.append(f_color)
        fused_body = self.fuse_body(f_body, context)
        fused_edge = self.fuse_edge(f_edge, context)

        body_out = self.body_heads(fused_body)
        edge_out = self.edge_heads(fused_edge)
        by_name = {name: body_out[:, i] for i, name in enumerate(BODY_HEAD_ATTRS)}
        by_name.update({name: edge_out[:, i] for i, name in enumerate(EDGE_HEAD_ATTRS)})
        by_name["crack"] = self.crack_head(f_body)[:, 0]
        by_name["toothmark"] = self.toothmark_head(f_edge)[:, 0]
        attr_logits = torch.stack([by_name[name] for name in ATTRIBUTES], dim=1)
        return Predictions(attr_logits, color_logits, fur_logit[:, 0])

    def zero_heads(self) -> None:
        """Zeroes every output layer, so all logits start at 0."""
        with torch.no_grad():
            for head in (self.color_head.out, self.fur_head.out, self.crack_head,
                         self.toothmark_head, self.body_heads, self.edge_heads):
                head.weight.zero_()
                head.bias.zero_()


def effective_weights(w: LossWeights, cfg: SignNetConfig) -> LossWeights:
    """A token left out of fusion also drops its auxiliary loss."""
    return LossWeights(
        w_color=w.w_color if cfg.fuse_color else 0.0,
        w_fur=w.w_fur if cfg.fuse_fur else 0.0,
        alpha=w.alpha,
    )


# --- loss -------------------------------------------------------------------

def loss_terms(pred: Predictions, targets: torch.Tensor, color: torch.Tensor, fur: torch.Tensor,
               w: LossWeights) -> Dict[str, torch.Tensor]:
    """Per-sample L_color, L_fur, L_attr and total, each averaged over the batch."""
    alpha = torch.tensor(w.alpha, dtype=DTYPE)
    l_color = sigmoid_bce_with_logits(pred.color_logits, color).mean(dim=1)
    l_fur = sigmoid_bce_with_logits(pred.fur_logit, fur)
    l_attr = (sigmoid_bce_with_logits(pred.attr_logits, targets) * alpha).sum(dim=1)
    total = w.w_color * l_color + w.w_fur * l_fur + l_attr
    return {"color": l_color.mean(), "fur": l_fur.mean(), "attr": l_attr.mean(), "total": total.mean()}


def total_loss(pred: Predictions, targets: torch.Tensor, color: torch.Tensor, fur: torch.Tensor,
               w: LossWeights) -> torch.Tensor:
    return loss_terms(pred, targets, color, fur, w)["total"]
