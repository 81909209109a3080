"""
TA_Tensor_AD.py

Dense float64 tensor operations with reverse-mode gradients, covering everything the
attribute network needs: matmul, convolution, pooling, ReLU, softmax, layer normalization,
token concatenation, scaled dot-product attention, the feed-forward block and the
sigmoid cross-entropy. Also holds the seeded RNG, the AdamW update and the checkpoint
format.

Tensors are torch tensors of dtype float64. The autograd graph recorded during a forward
pass is the tape. It is released by backward(), and no higher-order gradients are kept.
Every op checks its output for NaN/Inf and raises NonFiniteError.

Dependencies:
    - torch: storage, autograd, functional kernels and the AdamW optimizer.
    - numpy: checkpoint byte encoding.

Usage Example:
    >>> x = tensor([[1.0, 3.0]], requires_grad=True)
    >>> y = layer_norm(x, ones(2), zeros(2))
    >>> backward((y * y).sum(), [x])
"""

import json
import math
from collections import OrderedDict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from TA_Errors import CheckpointError, NonFiniteError, NotScalarError, ShapeMismatchError

DTYPE = torch.float64
CHECKPOINT_MAGIC = "TA-CHECKPOINT"
CHECKPOINT_VERSION = 1


def tensor(data, requires_grad: bool = False) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(data, dtype=np.float64)).clone()
    return t.requires_grad_(requires_grad)


def zeros(*shape) -> torch.Tensor:
    return torch.zeros(*shape, dtype=DTYPE)


def ones(*shape) -> torch.Tensor:
    return torch.ones(*shape, dtype=DTYPE)


def _finite(t: torch.Tensor, op: str) -> torch.Tensor:
    if not bool(torch.isfinite(t).all()):
        raise NonFiniteError(f"{op}: non-finite values")
    return t


def _shape_error(op: str, detail: str):
    raise ShapeMismatchError(f"{op}: {detail}")


class Rng:
    """Seeded draw stream; identical seeds give identical sequences."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.generator = torch.Generator().manual_seed(self.seed)

    def normal(self, shape: Sequence[int], std: float = 1.0) -> torch.Tensor:
        return torch.randn(tuple(shape), generator=self.generator, dtype=DTYPE) * std

    def permutation(self, n: int) -> torch.Tensor:
        return torch.randperm(n, generator=self.generator)


# --- elementary ops ---------------------------------------------------------

def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.shape[-1] != b.shape[-2 if b.dim() > 1 else 0]:
        _shape_error("matmul", f"{tuple(a.shape)} @ {tuple(b.shape)}")
    return _finite(a @ b, "matmul")


def linear(x: torch.Tensor, w: torch.Tensor, b: Optional[torch.Tensor] = None) -> torch.Tensor:
    out = matmul(x, w)
    if b is not None:
        if b.shape[-1] != w.shape[-1]:
            _shape_error("linear", f"bias {tuple(b.shape)} for weight {tuple(w.shape)}")
        out = out + b
    return out


def relu(x: torch.Tensor) -> torch.Tensor:
    return torch.relu(x)


def sigmoid(x: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(x)


def concat(xs: Sequence[torch.Tensor], axis: int) -> torch.Tensor:
    if not xs:
        _shape_error("concat", "nothing to concatenate")
    ref = list(xs[0].shape)
    ax = axis % len(ref)
    for x in xs[1:]:
        other = list(x.shape)
        if len(other) != len(ref) or any(a != b for i, (a, b) in enumerate(zip(ref, other)) if i != ax):
            _shape_error("concat", f"{tuple(xs[0].shape)} vs {tuple(x.shape)} along axis {axis}")
    return torch.cat(list(xs), dim=axis)


def conv2d(x: torch.Tensor, w: torch.Tensor, b: Optional[torch.Tensor] = None,
           stride: int = 1, padding: int = 0) -> torch.Tensor:
    """x: N x C x H x W, w: O x C x kh x kw."""
    if x.dim() != 4 or w.dim() != 4 or x.shape[1] != w.shape[1]:
        _shape_error("conv2d", f"input {tuple(x.shape)} with kernel {tuple(w.shape)}")
    return _finite(F.conv2d(x, w, b, stride=stride, padding=padding), "conv2d")


def maxpool(x: torch.Tensor, k: int, stride: Optional[int] = None) -> torch.Tensor:
    if x.dim() != 4:
        _shape_error("maxpool", f"expected N x C x H x W, got {tuple(x.shape)}")
    return F.max_pool2d(x, kernel_size=k, stride=stride or k)


def global_avg_pool(x: torch.Tensor) -> torch.Tensor:
    if x.dim() != 4:
        _shape_error("global_avg_pool", f"expected N x C x H x W, got {tuple(x.shape)}")
    return x.mean(dim=(2, 3))


def softmax(x: torch.Tensor, axis: int = -1) -> torch.Tensor:
    """Max-subtracted exponential normalization along axis."""
    _finite(x, "softmax input")
    return torch.softmax(x, dim=axis)


def layer_norm(x: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        _shape_error("layer_norm", f"gamma {tuple(gamma.shape)} / beta {tuple(beta.shape)} for width {d}")
    return _finite(F.layer_norm(x, (d,), gamma, beta, eps), "layer_norm")


# --- composite blocks -------------------------------------------------------

def scaled_dot_attention(tokens: torch.Tensor, wq: torch.Tensor, wk: torch.Tensor, wv: torch.Tensor,
                         return_weights: bool = False):
    """
    Single-head attention over the token axis: softmax(Q K^T / sqrt(d_k)) V.

    tokens: (..., n_tok, d_model); wq/wk/wv: d_model x d_k.
    """
    d_model = tokens.shape[-1]
    for name, w in (("Wq", wq), ("Wk", wk), ("Wv", wv)):
        if w.dim() != 2 or w.shape[0] != d_model:
            _shape_error("scaled_dot_attention", f"{name} {tuple(w.shape)} for width {d_model}")
    q, k, v = matmul(tokens, wq), matmul(tokens, wk), matmul(tokens, wv)
    d_k = wk.shape[1]
    weights = softmax(matmul(q, k.transpose(-1, -2)) / math.sqrt(d_k), axis=-1)
    out = _finite(weights @ v, "scaled_dot_attention")
    return (out, weights) if return_weights else out


def ffn(x: torch.Tensor, w1: torch.Tensor, b1: torch.Tensor, w2: torch.Tensor, b2: torch.Tensor) -> torch.Tensor:
    """relu(x W1 + b1) W2 + b2."""
    return linear(relu(linear(x, w1, b1)), w2, b2)


def sigmoid_bce_with_logits(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Elementwise max(x, 0) - x*y + log(1 + exp(-|x|))."""
    if logits.shape != targets.shape:
        _shape_error("sigmoid_bce_with_logits", f"{tuple(logits.shape)} vs {tuple(targets.shape)}")
    _finite(logits, "sigmoid_bce_with_logits input")
    return F.binary_cross_entropy_with_logits(logits, targets.to(DTYPE), reduction="none")


def backward(loss: torch.Tensor, params: Iterable[torch.Tensor] = ()) -> None:
    """Populates .grad of every reachable leaf; listed params that were not reached get zeros."""
    if loss.dim() != 0:
        raise NotScalarError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
    _finite(loss, "loss")
    loss.backward()
    for p in params:
        if p.grad is None:
            p.grad = torch.zeros_like(p)


# --- optimizer --------------------------------------------------------------

class AdamW:
    """Optimizer state for decoupled-weight-decay Adam."""

    def __init__(self, params: Iterable[torch.Tensor], lr: float = 2e-4,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.01):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.optimizer = torch.optim.AdamW(self.params, lr=lr, betas=betas, eps=eps,
                                           weight_decay=weight_decay, foreach=False)

    def zero_grad(self) -> None:
        self.optimizer.zero_grad(set_to_none=True)


def adamw_step(state: AdamW, lr: Optional[float] = None) -> None:
    """One AdamW update using the gradients stored on the parameters."""
    if lr is not None:
        if lr < 0:
            raise ValueError(f"learning rate must be >= 0, got {lr}")
        for group in state.optimizer.param_groups:
            group["lr"] = lr
    for p in state.params:
        if p.grad is None:
            p.grad = torch.zeros_like(p)
    state.optimizer.step()


# --- checkpoints ------------------------------------------------------------

def save_checkpoint(path: str, params: Dict[str, torch.Tensor], seed: int, config: Optional[dict] = None) -> None:
    """
    Text header (version, seed, config, shape registry) then little-endian float64
    blocks in registry order.
    """
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}", f"seed {int(seed)}",
             f"config {json.dumps(config or {}, sort_keys=True)}", f"params {len(params)}"]
    for name, t in params.items():
        dims = "x".join(str(d) for d in t.shape) or "-"
        lines.append(f"{name} {dims}")
    lines.append("end")
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("utf-8"))
        for t in params.values():
            f.write(t.detach().cpu().numpy().astype("<f8").tobytes())


def load_checkpoint(path: str) -> Tuple["OrderedDict[str, torch.Tensor]", int, dict]:
    with open(path, "rb") as f:
        def header_line() -> str:
            raw = f.readline()
            if not raw:
                raise CheckpointError(f"truncated checkpoint header in {path}")
            try:
                return raw.decode("utf-8").rstrip("\n")
            except UnicodeDecodeError as exc:
                raise CheckpointError(f"unreadable checkpoint header in {path}") from exc

        magic = header_line().split()
        if len(magic) != 2 or magic[0] != CHECKPOINT_MAGIC or magic[1] != str(CHECKPOINT_VERSION):
            raise CheckpointError(f"{path} is not a version {CHECKPOINT_VERSION} checkpoint")
        try:
            seed = int(header_line().split()[1])
            config = json.loads(header_line()[len("config "):])
            count = int(header_line().split()[1])
            registry: List[Tuple[str, Tuple[int, ...]]] = []
            for _ in range(count):
                name, dims = header_line().rsplit(" ", 1)
                registry.append((name, () if dims == "-" else tuple(int(d) for d in dims.split("x"))))
        except (ValueError, IndexError) as exc:
            raise CheckpointError(f"malformed checkpoint header in {path}: {exc}") from exc
        if header_line() != "end":
            raise CheckpointError(f"missing header terminator in {path}")

        params: "OrderedDict[str, torch.Tensor]" = OrderedDict()
        for name, shape in registry:
            n = int(np.prod(shape)) if shape else 1
            block = f.read(8 * n)
            if len(block) != 8 * n:
                raise CheckpointError(f"truncated block for '{name}' in {path}")
            params[name] = torch.from_numpy(np.frombuffer(block, dtype="<f8").astype(np.float64).reshape(shape))
        if f.read(1):
            raise CheckpointError(f"trailing bytes after the last block in {path}")
    return params, seed, config
