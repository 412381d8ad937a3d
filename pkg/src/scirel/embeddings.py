"""Vocabulary plus the word / position / direction embedding tables.

Word vectors come from a text file (optional "count dim" header, then one
token and its floats per line).  PAD gets a zero row that never trains, UNK
a random row.  Position and direction tables are small trainable tables
initialized uniformly in [-INIT_SCALE, INIT_SCALE].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .diffcore import DEFAULT_DTYPE, Tensor
from .errors import DataError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
INIT_SCALE = 0.1


class EmbeddingLoadError(DataError):
    """Pretrained vector file cannot be parsed."""


@dataclass
class Vocabulary:
    tokens: list[str]  # dense id -> token; PAD and UNK always present

    def __post_init__(self):
        self.token_to_id = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.token_to_id) != len(self.tokens):
            raise DataError("vocabulary contains duplicate tokens")
        if PAD_TOKEN not in self.token_to_id or UNK_TOKEN not in self.token_to_id:
            raise DataError(f"vocabulary must contain {PAD_TOKEN} and {UNK_TOKEN}")

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocabulary":
        return cls([PAD_TOKEN, UNK_TOKEN, *words])

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD_TOKEN]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK_TOKEN]

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, self.unk_id)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class EmbeddingTable:
    matrix: Tensor  # [rows, dim]
    trainable: bool = True

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def _uniform_table(rows: int, dim: int, rng_seed: int, scale: float, dtype) -> np.ndarray:
    rng = np.random.default_rng(rng_seed)
    return rng.uniform(-scale, scale, size=(rows, dim)).astype(dtype)


def load_pretrained(path, vocab_limit: int | None = None, rng_seed: int = 0,
                    trainable: bool = True, dtype=DEFAULT_DTYPE
                    ) -> tuple[Vocabulary, EmbeddingTable]:
    """Load a text vector file into (vocabulary, word table).

    The vocabulary is PAD, UNK, then the file tokens in file order
    (optionally truncated to the first vocab_limit tokens).  PAD is the zero
    vector; UNK is seeded-random since it has no pretrained vector.
    """
    words: list[str] = []
    vectors: list[np.ndarray] = []
    seen: set[str] = set()
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if line_no == 1 and len(fields) == 2:
                try:
                    int(fields[0]), int(fields[1])
                except ValueError:
                    pass
                else:
                    dim = int(fields[1])  # header line "count dim"
                    continue
            token, values = fields[0], fields[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise EmbeddingLoadError(
                        f"{path}: line {line_no}: no vector values")
            if len(values) != dim:
                raise EmbeddingLoadError(
                    f"{path}: line {line_no}: expected {dim} values, got {len(values)}")
            if token in seen:
                raise EmbeddingLoadError(
                    f"{path}: line {line_no}: duplicate token {token!r}")
            try:
                vec = np.array([float(v) for v in values], dtype=dtype)
            except ValueError as exc:
                raise EmbeddingLoadError(
                    f"{path}: line {line_no}: bad float ({exc})") from None
            seen.add(token)
            words.append(token)
            vectors.append(vec)
            if vocab_limit is not None and len(words) >= vocab_limit:
                break
    if not vectors or dim is None:
        raise EmbeddingLoadError(f"{path}: no vectors found")
    vocab = Vocabulary.from_words(words)
    matrix = np.zeros((len(vocab), dim), dtype=dtype)
    matrix[vocab.unk_id] = _uniform_table(1, dim, rng_seed, INIT_SCALE, dtype)[0]
    for i, vec in enumerate(vectors):
        matrix[i + 2] = vec  # PAD and UNK occupy rows 0 and 1
    return vocab, EmbeddingTable(matrix=Tensor(matrix), trainable=trainable)


def position_table(window: int, dim: int, rng_seed: int,
                   scale: float = INIT_SCALE, dtype=DEFAULT_DTYPE) -> EmbeddingTable:
    """Trainable table over clipped distances -window..window (2*window+1 rows)."""
    if window <= 0 or dim <= 0:
        raise ValueError(f"window and dim must be positive, got {window}, {dim}")
    rows = 2 * window + 1
    return EmbeddingTable(Tensor(_uniform_table(rows, dim, rng_seed, scale, dtype)))


def direction_table(dim: int, rng_seed: int, scale: float = INIT_SCALE,
                    dtype=DEFAULT_DTYPE) -> EmbeddingTable:
    """Trainable 2-row table: row 0 forward, row 1 reverse."""
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    return EmbeddingTable(Tensor(_uniform_table(2, dim, rng_seed, scale, dtype)))


def position_row(distance: np.ndarray | int, window: int):
    """Map clipped distance in [-window, window] to its table row."""
    return distance + window


def lookup(table: EmbeddingTable, ids: Sequence[int] | np.ndarray) -> np.ndarray:
    """Rows of the table at ids, as a fresh [len(ids), dim] array."""
    idx = np.asarray(ids, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.rows):
        raise ValueError(
            f"lookup id out of range [0, {table.rows}): "
            f"min {idx.min()}, max {idx.max()}")
    return table.matrix.data[idx]


def lookup_backward(table: EmbeddingTable, ids: Sequence[int] | np.ndarray,
                    grad_out: np.ndarray) -> None:
    """Accumulate grad_out into the selected rows (sums over repeated ids)."""
    if not table.trainable:
        return
    idx = np.asarray(ids, dtype=np.int64)
    np.add.at(table.matrix.ensure_grad(), idx, grad_out)
