"""Turn resolved relation tuples into fixed-length token/position instances.

Cleaning rules: punctuation becomes whitespace except hyphens joining two
alphanumeric characters, maximal digit runs not attached to a letter are
replaced by a single number token, and text is optionally lowercased.
Tokenization is whitespace splitting of the cleaned text.

Entity offsets refer to the raw (tag-stripped) segment, so cleaning tracks
per-character provenance: an entity start whose character was deleted
resolves to the nearest following token.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .corpus import Document, EntitySpan, RelationRecord, ResolvedRelation, LABEL_TO_INDEX
from .errors import DataError
from .embeddings import Vocabulary

FORWARD = 0
REVERSE = 1


class PreprocessError(DataError):
    """Entity positions cannot be mapped into a usable instance."""


class InstanceError(PreprocessError):
    """A single relation tuple cannot become an instance (skippable)."""


@dataclass(frozen=True)
class PreprocessConfig:
    max_seq_len: int = 200
    position_window: int = 30
    lowercase: bool = True
    number_token: str = "<num>"

    def validate(self) -> list[str]:
        problems = []
        if self.max_seq_len <= 0:
            problems.append(f"max_seq_len must be positive, got {self.max_seq_len}")
        if self.position_window <= 0:
            problems.append(f"position_window must be positive, got {self.position_window}")
        if not self.number_token or self.number_token != self.number_token.strip():
            problems.append(f"number_token must be a non-blank token, got {self.number_token!r}")
        return problems


@dataclass
class TokenizedSegment:
    tokens: list[str]
    # char offset -> index of the token containing it, or of the next token
    # when the offset falls on whitespace; offsets past the last token are absent
    char_to_token: dict[int, int]


@dataclass
class RelationInstance:
    token_ids: np.ndarray       # [max_seq_len] vocabulary ids, PAD beyond real_length
    p1: int                     # token index of the arg1 head word
    p2: int                     # token index of the arg2 head word
    rel_pos1: np.ndarray        # [max_seq_len] clipped signed distance to p1
    rel_pos2: np.ndarray        # [max_seq_len] clipped signed distance to p2
    direction: int              # FORWARD or REVERSE
    real_length: int
    label: int | None = None    # class index 0..5
    doc_id: str = ""
    arg1_id: str = ""
    arg2_id: str = ""


@dataclass
class SkippedInstance:
    relation: RelationRecord
    doc_id: str
    reason: str


def _clean_pairs(text: str, cfg: PreprocessConfig) -> list[tuple[str, int]]:
    """Cleaned characters paired with the source offset each came from."""
    chars = list(text)
    if cfg.lowercase:
        # per-character so offsets stay aligned (multi-char lowerings kept as-is)
        chars = [c.lower() if len(c.lower()) == 1 else c for c in chars]
    n = len(chars)
    out: list[tuple[str, int]] = []
    for i, c in enumerate(chars):
        if c.isalnum():
            out.append((c, i))
        elif c == "-" and 0 < i < n - 1 and chars[i - 1].isalnum() and chars[i + 1].isalnum():
            out.append((c, i))
        else:
            out.append((" ", i))

    # replace maximal digit runs unless glued to a letter ("F1" stays intact)
    replaced: list[tuple[str, int]] = []
    i = 0
    while i < len(out):
        if not out[i][0].isdigit():
            replaced.append(out[i])
            i += 1
            continue
        j = i
        while j < len(out) and out[j][0].isdigit():
            j += 1
        attached = (i > 0 and out[i - 1][0].isalpha()) or (j < len(out) and out[j][0].isalpha())
        if attached:
            replaced.extend(out[i:j])
        else:
            src = out[i][1]
            replaced.extend((c, src) for c in cfg.number_token)
        i = j

    collapsed: list[tuple[str, int]] = []
    for c, src in replaced:
        if c == " " and (not collapsed or collapsed[-1][0] == " "):
            continue
        collapsed.append((c, src))
    while collapsed and collapsed[-1][0] == " ":
        collapsed.pop()
    return collapsed


def clean(text: str, cfg: PreprocessConfig) -> str:
    """Apply the cleaning rules; see module docstring."""
    return "".join(c for c, _ in _clean_pairs(text, cfg))


def tokenize(text: str) -> TokenizedSegment:
    """Whitespace tokenization with a char-offset-to-token map."""
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    start = None
    for i, c in enumerate(text):
        if c.isspace():
            if start is not None:
                spans.append((start, i))
                start = None
        elif start is None:
            start = i
    if start is not None:
        spans.append((start, len(text)))
    tokens = [text[s:e] for s, e in spans]

    mapping: dict[int, int] = {}
    k = 0
    for i in range(len(text)):
        while k < len(spans) and i >= spans[k][1]:
            k += 1
        if k < len(spans):
            mapping[i] = k
    return TokenizedSegment(tokens=tokens, char_to_token=mapping)


def prepare_segment(text: str, cfg: PreprocessConfig) -> TokenizedSegment:
    """Clean + tokenize, with char_to_token keyed by raw-segment offsets."""
    pairs = _clean_pairs(text, cfg)
    cleaned = "".join(c for c, _ in pairs)
    src = [s for _, s in pairs]
    seg = tokenize(cleaned)
    mapping: dict[int, int] = {}
    for o in range(len(text)):
        j = bisect_left(src, o)
        if j < len(src) and j in seg.char_to_token:
            mapping[o] = seg.char_to_token[j]
    return TokenizedSegment(tokens=seg.tokens, char_to_token=mapping)


def head_position(segment: TokenizedSegment, span: EntitySpan) -> int:
    """Token index of the first token of the entity mention."""
    idx = segment.char_to_token.get(span.start_char)
    if idx is None:
        raise PreprocessError(
            f"entity {span.entity_id!r} start offset {span.start_char} does not "
            f"resolve to any token")
    return idx


def relative_positions(length: int, p: int, window: int) -> np.ndarray:
    """Signed distance of each position to p, clamped to [-window, window]."""
    if not 0 <= p < length:
        raise ValueError(f"anchor {p} out of range for length {length}")
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    return np.clip(np.arange(length, dtype=np.int32) - p, -window, window)


def build_instance(doc: Document, e1: EntitySpan, e2: EntitySpan,
                   rel: RelationRecord, vocab: Vocabulary,
                   cfg: PreprocessConfig) -> RelationInstance:
    """Build one padded instance from a resolved relation tuple.

    Only the segment holding the entities is used.  When the segment exceeds
    max_seq_len, the kept window is centered on the midpoint of the two entity
    heads and shifted to stay in bounds; both heads must survive.
    """
    if e1.in_title != e2.in_title:
        raise InstanceError(
            f"entities {e1.entity_id!r} and {e2.entity_id!r} are in different segments")
    text = doc.segment(e1.in_title)
    seg = prepare_segment(text, cfg)
    if not seg.tokens:
        raise InstanceError(f"doc {doc.doc_id!r}: segment empty after cleaning")
    p1 = head_position(seg, e1)
    p2 = head_position(seg, e2)
    if p1 == p2:
        raise InstanceError(
            f"entities {e1.entity_id!r} and {e2.entity_id!r} share head token {p1}")

    length = len(seg.tokens)
    max_len = cfg.max_seq_len
    a, b = min(p1, p2), max(p1, p2)
    if b - a >= max_len:
        raise InstanceError(
            f"entity heads {b - a} tokens apart exceed max_seq_len {max_len}")
    start = 0
    if length > max_len:
        start = (a + b) // 2 - max_len // 2
        start = max(0, min(start, length - max_len))
        if not (start <= a and b < start + max_len):
            raise InstanceError(
                f"no window of {max_len} tokens covers heads at {a} and {b}")
    kept = seg.tokens[start:start + max_len]
    p1 -= start
    p2 -= start
    real_length = len(kept)

    ids = np.full(max_len, vocab.pad_id, dtype=np.int32)
    for i, tok in enumerate(kept):
        ids[i] = vocab.id_of(tok)
    return RelationInstance(
        token_ids=ids,
        p1=p1,
        p2=p2,
        rel_pos1=relative_positions(max_len, p1, cfg.position_window),
        rel_pos2=relative_positions(max_len, p2, cfg.position_window),
        direction=REVERSE if rel.reverse else FORWARD,
        real_length=real_length,
        label=LABEL_TO_INDEX[rel.label],
        doc_id=doc.doc_id,
        arg1_id=rel.arg1_id,
        arg2_id=rel.arg2_id,
    )


def build_instances(resolved: list[ResolvedRelation], vocab: Vocabulary,
                    cfg: PreprocessConfig
                    ) -> tuple[list[RelationInstance], list[SkippedInstance]]:
    """Build all instances, collecting (not dropping) the ones that fail."""
    instances: list[RelationInstance] = []
    skipped: list[SkippedInstance] = []
    for item in resolved:
        try:
            instances.append(build_instance(
                item.document, item.arg1, item.arg2, item.relation, vocab, cfg))
        except InstanceError as exc:
            skipped.append(SkippedInstance(
                relation=item.relation, doc_id=item.document.doc_id, reason=str(exc)))
    return instances, skipped
