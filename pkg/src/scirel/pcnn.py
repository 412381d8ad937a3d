"""The piecewise-CNN relation classifier.

Per-token input is word embedding concatenated with the two position
embeddings; rows at or beyond real_length are zeroed so padding can never
influence the encoder.  Each filter width convolves the full sequence,
piecewise max pooling runs over the real tokens split at the entity heads,
the pooled features are concatenated with the direction embedding, then
optional tanh, dropout and the affine classifier head produce 6 logits.

Backward is a fixed reverse schedule over the diffcore ops; gradients
accumulate into the parameter tensors.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import diffcore
from .diffcore import (Tensor, ShapeError, affine, affine_backward, concat,
                       concat_backward, conv1d_same, conv1d_same_backward,
                       dropout, dropout_backward, piecewise_max_pool,
                       piecewise_max_pool_backward, softmax,
                       softmax_cross_entropy, tanh_activation, tanh_backward)
from .embeddings import EmbeddingTable, Vocabulary, lookup, lookup_backward, position_row
from .errors import ConfigError
from .preprocess import PreprocessConfig, RelationInstance


@dataclass(frozen=True)
class ModelConfig:
    filter_widths: tuple[int, ...] = (3, 4, 5)
    n_filters: int = 64
    pos_dim: int = 5
    dir_dim: int = 5
    n_classes: int = 6
    keep_prob: float = 0.5
    max_seq_len: int = 200
    position_window: int = 30
    nonlinearity: str = "tanh"  # "tanh" or "none"
    fine_tune_words: bool = True
    init_scale: float = 0.1

    @property
    def rep_dim(self) -> int:
        return 3 * len(self.filter_widths) * self.n_filters + self.dir_dim

    def validate(self) -> list[str]:
        problems = []
        if not self.filter_widths or any(w <= 0 for w in self.filter_widths):
            problems.append(f"filter_widths must be positive, got {self.filter_widths}")
        for name in ("n_filters", "pos_dim", "dir_dim", "n_classes",
                     "max_seq_len", "position_window"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.keep_prob <= 1.0:
            problems.append(f"keep_prob must be in (0, 1], got {self.keep_prob}")
        if self.nonlinearity not in ("tanh", "none"):
            problems.append(f"nonlinearity must be 'tanh' or 'none', got {self.nonlinearity!r}")
        if self.init_scale <= 0:
            problems.append(f"init_scale must be positive, got {self.init_scale}")
        return problems


@dataclass
class ModelParams:
    word: EmbeddingTable
    pos1: EmbeddingTable
    pos2: EmbeddingTable
    direction: EmbeddingTable
    filters: dict[int, Tensor]    # width -> [width, d_in, n_filters]
    conv_bias: dict[int, Tensor]  # width -> [n_filters]
    out_w: Tensor                 # [rep_dim, n_classes]
    out_b: Tensor                 # [n_classes]
    pad_id: int = 0               # word row pinned at zero

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        """Trainable tensors in a fixed order (word table only if fine-tuned)."""
        named: list[tuple[str, Tensor]] = []
        if self.word.trainable:
            named.append(("word", self.word.matrix))
        named.append(("pos1", self.pos1.matrix))
        named.append(("pos2", self.pos2.matrix))
        named.append(("direction", self.direction.matrix))
        for width in sorted(self.filters):
            named.append((f"filters_w{width}", self.filters[width]))
            named.append((f"conv_bias_w{width}", self.conv_bias[width]))
        named.append(("out_w", self.out_w))
        named.append(("out_b", self.out_b))
        return named

    def all_tensors(self) -> list[tuple[str, Tensor]]:
        named = self.named_parameters()
        if not self.word.trainable:
            named = [("word", self.word.matrix)] + named
        return named

    def zero_grads(self) -> None:
        for _, tensor in self.all_tensors():
            tensor.zero_grad()


def input_dim(word_dim: int, cfg: ModelConfig) -> int:
    return word_dim + 2 * cfg.pos_dim


def init_params(cfg: ModelConfig, word_table: EmbeddingTable, pad_id: int,
                seed: int) -> ModelParams:
    """Fresh parameters; the word matrix is copied so replicas never share."""
    from .embeddings import direction_table, position_table

    rng = np.random.default_rng(seed)
    dtype = word_table.matrix.dtype

    def child_seed() -> int:
        return int(rng.integers(2 ** 31))

    word = EmbeddingTable(word_table.matrix.copy(), trainable=cfg.fine_tune_words)
    pos1 = position_table(cfg.position_window, cfg.pos_dim, child_seed(),
                          scale=cfg.init_scale, dtype=dtype)
    pos2 = position_table(cfg.position_window, cfg.pos_dim, child_seed(),
                          scale=cfg.init_scale, dtype=dtype)
    direction = direction_table(cfg.dir_dim, child_seed(),
                                scale=cfg.init_scale, dtype=dtype)
    d_in = input_dim(word.dim, cfg)
    filters: dict[int, Tensor] = {}
    conv_bias: dict[int, Tensor] = {}
    for width in cfg.filter_widths:
        filt = np.random.default_rng(child_seed()).uniform(
            -cfg.init_scale, cfg.init_scale, size=(width, d_in, cfg.n_filters))
        filters[width] = Tensor(filt.astype(dtype))
        conv_bias[width] = Tensor(np.zeros(cfg.n_filters, dtype=dtype))
    out_w = np.random.default_rng(child_seed()).uniform(
        -cfg.init_scale, cfg.init_scale, size=(cfg.rep_dim, cfg.n_classes))
    return ModelParams(
        word=word, pos1=pos1, pos2=pos2, direction=direction,
        filters=filters, conv_bias=conv_bias,
        out_w=Tensor(out_w.astype(dtype)),
        out_b=Tensor(np.zeros(cfg.n_classes, dtype=dtype)),
        pad_id=pad_id)


def _validate_shapes(instance: RelationInstance, params: ModelParams,
                     cfg: ModelConfig) -> None:
    problems = []
    seq = cfg.max_seq_len
    if len(instance.token_ids) != seq:
        problems.append(f"token_ids length {len(instance.token_ids)} != max_seq_len {seq}")
    if len(instance.rel_pos1) != seq or len(instance.rel_pos2) != seq:
        problems.append("rel_pos arrays do not match max_seq_len")
    if not (0 <= instance.p1 < instance.real_length <= seq):
        problems.append(f"p1 {instance.p1} out of range for real_length "
                        f"{instance.real_length}")
    if not (0 <= instance.p2 < instance.real_length):
        problems.append(f"p2 {instance.p2} out of range for real_length "
                        f"{instance.real_length}")
    if instance.p1 == instance.p2:
        problems.append("p1 and p2 coincide")
    if instance.direction not in (0, 1):
        problems.append(f"direction must be 0 or 1, got {instance.direction}")
    d_in = input_dim(params.word.dim, cfg)
    rows = 2 * cfg.position_window + 1
    for name, table in (("pos1", params.pos1), ("pos2", params.pos2)):
        if table.matrix.shape != (rows, cfg.pos_dim):
            problems.append(f"{name} table {table.matrix.shape} != ({rows}, {cfg.pos_dim})")
    if params.direction.matrix.shape != (2, cfg.dir_dim):
        problems.append(f"direction table {params.direction.matrix.shape} != (2, {cfg.dir_dim})")
    for width in cfg.filter_widths:
        if width not in params.filters:
            problems.append(f"missing filter bank for width {width}")
            continue
        if params.filters[width].shape != (width, d_in, cfg.n_filters):
            problems.append(
                f"filters[{width}] {params.filters[width].shape} != "
                f"({width}, {d_in}, {cfg.n_filters})")
        if params.conv_bias[width].shape != (cfg.n_filters,):
            problems.append(f"conv_bias[{width}] {params.conv_bias[width].shape}")
    if params.out_w.shape != (cfg.rep_dim, cfg.n_classes):
        problems.append(f"out_w {params.out_w.shape} != ({cfg.rep_dim}, {cfg.n_classes})")
    if params.out_b.shape != (cfg.n_classes,):
        problems.append(f"out_b {params.out_b.shape} != ({cfg.n_classes},)")
    if problems:
        raise ShapeError("; ".join(problems))


@dataclass
class ForwardCache:
    instance: RelationInstance
    x: Tensor  # [max_seq_len, d_in] embedded input, padding rows zeroed
    pos1_rows: np.ndarray
    pos2_rows: np.ndarray
    argmax: dict[int, np.ndarray]
    act: Tensor
    used_tanh: bool
    drop_mask: np.ndarray | None
    dropped: Tensor


def forward(instance: RelationInstance, params: ModelParams, cfg: ModelConfig,
            mode: str = "infer", rng: np.random.Generator | None = None
            ) -> tuple[Tensor, ForwardCache]:
    _validate_shapes(instance, params, cfg)
    pos1_rows = position_row(instance.rel_pos1, cfg.position_window)
    pos2_rows = position_row(instance.rel_pos2, cfg.position_window)
    x = np.concatenate([
        lookup(params.word, instance.token_ids),
        lookup(params.pos1, pos1_rows),
        lookup(params.pos2, pos2_rows),
    ], axis=1)
    x[instance.real_length:] = 0.0  # padding must be invisible to the encoder
    xt = Tensor(x)

    pooled_parts: list[Tensor] = []
    argmax: dict[int, np.ndarray] = {}
    for width in cfg.filter_widths:
        conv = conv1d_same(xt, params.filters[width], params.conv_bias[width])
        pooled, am = piecewise_max_pool(conv, instance.p1, instance.p2,
                                        instance.real_length)
        argmax[width] = am
        pooled_parts.append(pooled)
    dir_part = Tensor(lookup(params.direction, [instance.direction])[0])
    rep = concat(pooled_parts + [dir_part], axis=0)
    used_tanh = cfg.nonlinearity == "tanh"
    act = tanh_activation(rep) if used_tanh else rep
    dropped, mask = dropout(act, cfg.keep_prob, mode, rng)
    logits = affine(dropped, params.out_w, params.out_b)
    cache = ForwardCache(instance=instance, x=xt, pos1_rows=pos1_rows,
                         pos2_rows=pos2_rows, argmax=argmax, act=act,
                         used_tanh=used_tanh, drop_mask=mask, dropped=dropped)
    return logits, cache


def backward(cache: ForwardCache, grad_logits: np.ndarray, params: ModelParams,
             cfg: ModelConfig) -> None:
    """Accumulate gradients of the scalar behind grad_logits into params."""
    inst = cache.instance
    grad_dropped, grad_w, grad_b = affine_backward(cache.dropped, params.out_w,
                                                   grad_logits)
    params.out_w.ensure_grad()
    params.out_w.grad += grad_w
    params.out_b.ensure_grad()
    params.out_b.grad += grad_b

    grad_act = dropout_backward(cache.drop_mask, grad_dropped)
    grad_rep = tanh_backward(cache.act.data, grad_act) if cache.used_tanh else grad_act

    seg_size = 3 * cfg.n_filters
    sizes = [seg_size] * len(cfg.filter_widths) + [cfg.dir_dim]
    parts = concat_backward(grad_rep, sizes, axis=0)

    grad_x = np.zeros_like(cache.x.data)
    for width, grad_pooled in zip(cfg.filter_widths, parts[:-1]):
        grad_conv = piecewise_max_pool_backward(
            cache.argmax[width], (cfg.max_seq_len, cfg.n_filters), grad_pooled)
        gx, gf, gb = conv1d_same_backward(cache.x, params.filters[width], grad_conv)
        grad_x += gx
        params.filters[width].ensure_grad()
        params.filters[width].grad += gf
        params.conv_bias[width].ensure_grad()
        params.conv_bias[width].grad += gb
    lookup_backward(params.direction, [inst.direction], parts[-1][np.newaxis, :])

    # only real rows reach the embedding tables; padding rows were zeroed
    real = inst.real_length
    d_w = params.word.dim
    gx_real = grad_x[:real]
    lookup_backward(params.word, inst.token_ids[:real], gx_real[:, :d_w])
    lookup_backward(params.pos1, cache.pos1_rows[:real],
                    gx_real[:, d_w:d_w + cfg.pos_dim])
    lookup_backward(params.pos2, cache.pos2_rows[:real],
                    gx_real[:, d_w + cfg.pos_dim:])


def loss_and_grads(batch: list[RelationInstance], params: ModelParams,
                   cfg: ModelConfig, rng: np.random.Generator | None = None,
                   mode: str = "train") -> float:
    """Mean cross-entropy over the batch; param grads get the mean gradient."""
    if not batch:
        raise ConfigError("loss_and_grads called with an empty batch")
    for inst in batch:
        if inst.label is None:
            raise ConfigError(
                f"unlabeled instance ({inst.arg1_id!r}, {inst.arg2_id!r}) in "
                f"training batch")
    params.zero_grads()
    scale = 1.0 / len(batch)
    total = 0.0
    for inst in batch:
        logits, cache = forward(inst, params, cfg, mode=mode, rng=rng)
        loss, grad_logits = softmax_cross_entropy(logits, inst.label)
        total += loss
        backward(cache, grad_logits * scale, params, cfg)
    if params.word.trainable:
        params.word.matrix.ensure_grad()[params.pad_id] = 0.0  # PAD never trains
    return total * scale


def predict(instance: RelationInstance, params: ModelParams, cfg: ModelConfig
            ) -> tuple[int, np.ndarray]:
    """Class index (ties to the lowest index) and the 6 class probabilities."""
    logits, _ = forward(instance, params, cfg, mode="infer")
    probs = softmax(logits.data)
    return int(np.argmax(probs)), probs


def predict_labels(instances: list[RelationInstance], params: ModelParams,
                   cfg: ModelConfig, labels: tuple[str, ...]) -> list[str]:
    return [labels[predict(inst, params, cfg)[0]] for inst in instances]


# --- checkpointing -----------------------------------------------------------

def save_model(path, params: ModelParams, cfg: ModelConfig,
               vocab: Vocabulary, pre_cfg: PreprocessConfig) -> None:
    """Self-describing checkpoint: every parameter plus both configs and vocab."""
    arrays: dict[str, np.ndarray] = {}
    for name, tensor in params.all_tensors():
        arrays[name] = tensor.data
    meta = {
        "model_config": asdict(cfg),
        "preprocess_config": asdict(pre_cfg),
        "vocab": vocab.tokens,
        "pad_id": params.pad_id,
        "word_trainable": params.word.trainable,
    }
    diffcore.save_checkpoint(path, arrays, meta)


def load_model(path) -> tuple[ModelParams, ModelConfig, Vocabulary, PreprocessConfig]:
    arrays, meta = diffcore.load_checkpoint(path)
    cfg_dict = dict(meta["model_config"])
    cfg_dict["filter_widths"] = tuple(cfg_dict["filter_widths"])
    cfg = ModelConfig(**cfg_dict)
    pre_cfg = PreprocessConfig(**meta["preprocess_config"])
    vocab = Vocabulary(list(meta["vocab"]))
    filters: dict[int, Tensor] = {}
    conv_bias: dict[int, Tensor] = {}
    for width in cfg.filter_widths:
        filters[width] = Tensor(arrays[f"filters_w{width}"])
        conv_bias[width] = Tensor(arrays[f"conv_bias_w{width}"])
    params = ModelParams(
        word=EmbeddingTable(Tensor(arrays["word"]), trainable=meta["word_trainable"]),
        pos1=EmbeddingTable(Tensor(arrays["pos1"])),
        pos2=EmbeddingTable(Tensor(arrays["pos2"])),
        direction=EmbeddingTable(Tensor(arrays["direction"])),
        filters=filters, conv_bias=conv_bias,
        out_w=Tensor(arrays["out_w"]), out_b=Tensor(arrays["out_b"]),
        pad_id=int(meta["pad_id"]))
    return params, cfg, vocab, pre_cfg
