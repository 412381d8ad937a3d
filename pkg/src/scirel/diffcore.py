"""Minimal dense-tensor ops with hand-written reverse-mode gradients.

There is no autodiff tape: the model calls each op's forward, then runs the
matching *_backward functions in a fixed reverse schedule.  Backward
functions return gradients for every differentiable input; callers decide
where to accumulate them.  Ops that need extra state for backward (pooling
argmaxes, dropout masks) return it alongside the output.

All ops preserve the dtype of their inputs; tests run everything in float64
for finite-difference headroom, production parameters default to float32.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, NumericError

DEFAULT_DTYPE = np.float32

# Every documented op checks its output for NaN/Inf; flip this off only for
# profiling, the checks are part of the op contracts.
CHECK_FINITE = True


class ShapeError(ConfigError):
    """Operand shapes do not line up."""


def _require_finite(name: str, arr) -> None:
    if CHECK_FINITE and not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} produced non-finite values")


class Tensor:
    """Dense float array plus an optional gradient slot of the same shape."""

    __slots__ = ("data", "grad")

    def __init__(self, data, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    def zero_grad(self) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def _conv_padding(width: int) -> tuple[int, int]:
    # total padding width-1, split floor left / ceil right (width 4: 1 left, 2 right)
    left = (width - 1) // 2
    return left, width - 1 - left


def _im2col(x: np.ndarray, width: int) -> np.ndarray:
    length, depth = x.shape
    left, right = _conv_padding(width)
    padded = np.zeros((length + width - 1, depth), dtype=x.dtype)
    padded[left:left + length] = x
    # [L, depth, width] -> [L, width, depth] -> [L, width*depth]
    windows = sliding_window_view(padded, width, axis=0)
    return windows.transpose(0, 2, 1).reshape(length, width * depth)


def conv1d_same(x: Tensor, filters: Tensor, bias: Tensor) -> Tensor:
    """1-d convolution over [L, d_in] with zero padding to keep length L.

    filters is [width, d_in, n_filters], bias [n_filters]; output [L, n_filters].
    """
    if x.data.ndim != 2 or filters.data.ndim != 3:
        raise ShapeError(
            f"conv1d_same expects x [L,d] and filters [w,d,n], got {x.shape} "
            f"and {filters.shape}")
    width, depth, n_filters = filters.shape
    if depth != x.shape[1]:
        raise ShapeError(
            f"conv1d_same depth mismatch: input {x.shape} vs filters {filters.shape}")
    if bias.shape != (n_filters,):
        raise ShapeError(
            f"conv1d_same bias shape {bias.shape} does not match {n_filters} filters")
    cols = _im2col(x.data, width)
    out = cols @ filters.data.reshape(width * depth, n_filters) + bias.data
    _require_finite("conv1d_same", out)
    return Tensor(out)


def conv1d_same_backward(x: Tensor, filters: Tensor, grad_out: np.ndarray
                         ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv1d_same w.r.t. (input, filters, bias)."""
    width, depth, n_filters = filters.shape
    length = x.shape[0]
    left, _ = _conv_padding(width)
    cols = _im2col(x.data, width)
    grad_bias = grad_out.sum(axis=0)
    grad_filters = (cols.T @ grad_out).reshape(width, depth, n_filters)
    grad_cols = (grad_out @ filters.data.reshape(width * depth, n_filters).T)
    grad_cols = grad_cols.reshape(length, width, depth)
    grad_padded = np.zeros((length + width - 1, depth), dtype=grad_out.dtype)
    for k in range(width):
        grad_padded[k:k + length] += grad_cols[:, k, :]
    return grad_padded[left:left + length], grad_filters, grad_bias


def piecewise_max_pool(features: Tensor, p1: int, p2: int, real_length: int
                       ) -> tuple[Tensor, np.ndarray]:
    """Per-filter max over the three segments induced by the entity heads.

    With a = min(p1, p2) and b = max(p1, p2) the segments are [0, a],
    (a, b) and (b, real_length - 1]; an empty segment contributes 0.
    Positions at or beyond real_length never participate.  Returns the
    [3 * n_filters] output plus the argmax positions [3, n_filters]
    (-1 marks an empty segment) used by the backward pass.
    """
    if p1 == p2:
        raise ValueError(f"entity positions must differ, got p1 = p2 = {p1}")
    length, n_filters = features.shape
    a, b = min(p1, p2), max(p1, p2)
    if not (0 <= a and b < real_length <= length):
        raise ValueError(
            f"positions ({p1}, {p2}) with real_length {real_length} out of "
            f"range for feature map of length {length}")
    bounds = ((0, a + 1), (a + 1, b), (b + 1, real_length))
    data = features.data
    out = np.zeros(3 * n_filters, dtype=data.dtype)
    argmax = np.full((3, n_filters), -1, dtype=np.int64)
    for s, (lo, hi) in enumerate(bounds):
        if lo >= hi:
            continue
        seg = data[lo:hi]
        idx = seg.argmax(axis=0)  # first occurrence wins on ties
        argmax[s] = idx + lo
        out[s * n_filters:(s + 1) * n_filters] = seg[idx, np.arange(n_filters)]
    _require_finite("piecewise_max_pool", out)
    return Tensor(out), argmax


def piecewise_max_pool_backward(argmax: np.ndarray, feature_shape: tuple[int, int],
                                grad_out: np.ndarray) -> np.ndarray:
    """Route pooled gradients back to the argmax positions."""
    length, n_filters = feature_shape
    grad = np.zeros((length, n_filters), dtype=grad_out.dtype)
    cols = np.arange(n_filters)
    for s in range(3):
        rows = argmax[s]
        mask = rows >= 0
        np.add.at(grad, (rows[mask], cols[mask]),
                  grad_out[s * n_filters:(s + 1) * n_filters][mask])
    return grad


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along axis; shapes must agree off-axis."""
    if not tensors:
        raise ShapeError("concat of an empty list")
    ref = list(tensors[0].shape)
    for t in tensors[1:]:
        other = list(t.shape)
        if len(other) != len(ref) or any(
                i != axis and other[i] != ref[i] for i in range(len(ref))):
            raise ShapeError(
                f"concat shape mismatch off axis {axis}: "
                f"{[t.shape for t in tensors]}")
    return Tensor(np.concatenate([t.data for t in tensors], axis=axis))


def concat_backward(grad_out: np.ndarray, sizes: list[int], axis: int = 0
                    ) -> list[np.ndarray]:
    """Split the upstream gradient back into the concatenated parts."""
    offsets = np.cumsum(sizes)[:-1]
    return np.split(grad_out, offsets, axis=axis)


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x [d] times weight [d, k] plus bias [k]."""
    if x.data.ndim != 1 or weight.data.ndim != 2 or x.shape[0] != weight.shape[0]:
        raise ShapeError(f"affine mismatch: x {x.shape} vs weight {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"affine bias {bias.shape} vs weight {weight.shape}")
    out = x.data @ weight.data + bias.data
    _require_finite("affine", out)
    return Tensor(out)


def affine_backward(x: Tensor, weight: Tensor, grad_out: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    grad_x = weight.data @ grad_out
    grad_w = np.outer(x.data, grad_out)
    return grad_x, grad_w, grad_out.copy()


def tanh_activation(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    _require_finite("tanh_activation", out)
    return Tensor(out)


def tanh_backward(y: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Backward through tanh given its output y: grad * (1 - y^2)."""
    return grad_out * (1.0 - y * y)


def dropout(x: Tensor, keep_prob: float, mode: str,
            rng: np.random.Generator | None = None
            ) -> tuple[Tensor, np.ndarray | None]:
    """Inverted dropout; identity when inferring or keep_prob is 1.

    Returns (output, mask); the mask already carries the 1/keep_prob scale
    and None means the op was an identity.
    """
    if not 0.0 < keep_prob <= 1.0:
        raise ConfigError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if mode not in ("train", "infer"):
        raise ConfigError(f"dropout mode must be 'train' or 'infer', got {mode!r}")
    if mode == "infer" or keep_prob == 1.0:
        return Tensor(x.data), None
    if rng is None:
        raise ConfigError("dropout in train mode needs an rng")
    mask = (rng.random(x.shape) < keep_prob).astype(x.dtype) / keep_prob
    return Tensor(x.data * mask), mask


def dropout_backward(mask: np.ndarray | None, grad_out: np.ndarray) -> np.ndarray:
    return grad_out if mask is None else grad_out * mask


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_cross_entropy(logits: Tensor, label: int) -> tuple[float, np.ndarray]:
    """Stable -log softmax(logits)[label]; also returns d loss / d logits."""
    k = logits.shape[0]
    if not 0 <= label < k:
        raise ValueError(f"label {label} out of range for {k} classes")
    z = logits.data - logits.data.max()
    e = np.exp(z)
    total = e.sum()
    loss = float(np.log(total) - z[label])
    grad = e / total
    grad[label] -= 1.0
    _require_finite("softmax_cross_entropy", grad)
    if not np.isfinite(loss):
        raise NumericError("softmax_cross_entropy produced a non-finite loss")
    return loss, grad


@dataclass
class AdamState:
    """First/second moment slots plus step count, keyed by parameter name."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    slots: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def slot_for(self, name: str, param: Tensor) -> tuple[np.ndarray, np.ndarray]:
        if name not in self.slots:
            self.slots[name] = (np.zeros_like(param.data), np.zeros_like(param.data))
        m, v = self.slots[name]
        if m.shape != param.data.shape:
            raise ShapeError(
                f"adam slot {name!r} has shape {m.shape}, parameter has "
                f"{param.data.shape}")
        return m, v


def adam_step(named_params: list[tuple[str, Tensor]], state: AdamState) -> None:
    """One bias-corrected Adam update; gradients are cleared afterwards."""
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    for name, param in named_params:
        if param.grad is None:
            raise ValueError(f"parameter {name!r} has no gradient")
        g = param.grad
        m, v = state.slot_for(name, param)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        param.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        _require_finite(f"adam_step({name})", param.data)
        param.grad.fill(0.0)


# --- parameter checkpoint container -----------------------------------------
#
# Custom fixed layout so identical contents produce identical bytes:
#   magic | uint64 header length | header JSON | concatenated raw arrays

_MAGIC = b"SCIRELCK"
_FORMAT_VERSION = 1


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        raw = np.ascontiguousarray(arr).tobytes()
        entries.append({"name": name, "dtype": str(arr.dtype),
                        "shape": list(arr.shape), "offset": offset,
                        "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"format_version": _FORMAT_VERSION, "meta": meta or {}, "arrays": entries},
        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(_MAGIC)] != _MAGIC:
        raise ConfigError(f"{path}: not a checkpoint file")
    header_len = int.from_bytes(blob[8:16], "little")
    header = json.loads(blob[16:16 + header_len].decode("utf-8"))
    if header["format_version"] != _FORMAT_VERSION:
        raise ConfigError(
            f"{path}: unsupported checkpoint version {header['format_version']}")
    base = 16 + header_len
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        start = base + entry["offset"]
        raw = blob[start:start + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]))
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return arrays, header["meta"]
