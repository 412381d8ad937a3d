"""Parsing of entity-annotated documents and relation files.

The corpus comes as two UTF-8 text files: a markup file holding titles and
abstracts with inline entity tags, and a relations file with one labeled
entity pair per line.  The markup grammar is fixed by the constant table
below; anything that deviates from it is a hard parse error, never silently
repaired.

Document markup (canonical layout, one block per paper)::

    <text id="D01">
    <title>A <entity id="D01.1">parser</entity> for X</title>
    <abstract>We use <entity id="D01.2">bigrams</entity> ...</abstract>
    </text>

Relations file, one record per line::

    USAGE(D01.2,D01.1)
    MODEL(D01.3,D01.4,REVERSE)

Character offsets of entity spans always refer to the tag-stripped segment
text, measured in unicode code points.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DataError

# Tag/attribute names of the markup grammar, kept in one place so a dataset
# revision only requires touching this table.
DOC_TAG = "text"
TITLE_TAG = "title"
ABSTRACT_TAG = "abstract"
ENTITY_TAG = "entity"
ID_ATTR = "id"

LABELS = ("USAGE", "RESULT", "MODEL", "PART_WHOLE", "TOPIC", "COMPARISON")
LABEL_TO_INDEX = {label: i for i, label in enumerate(LABELS)}


class ParseError(DataError):
    """Malformed corpus or relations markup."""


class ResolutionError(DataError):
    """A relation references entities that cannot be joined."""


@dataclass(frozen=True)
class EntitySpan:
    entity_id: str
    start_char: int
    end_char: int  # exclusive
    in_title: bool
    surface: str


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    abstract: str
    entities: tuple[EntitySpan, ...]

    def segment(self, in_title: bool) -> str:
        return self.title if in_title else self.abstract


@dataclass(frozen=True)
class RelationRecord:
    label: str
    arg1_id: str
    arg2_id: str
    reverse: bool = False
    line_no: int = -1  # 1-based line in the relations file, -1 if synthetic

    def render(self) -> str:
        flag = ",REVERSE" if self.reverse else ""
        return f"{self.label}({self.arg1_id},{self.arg2_id}{flag})"


@dataclass
class Corpus:
    documents: list[Document]
    relations: list[RelationRecord]
    source_tag: str = "task1.1"


@dataclass(frozen=True)
class ResolvedRelation:
    document: Document
    arg1: EntitySpan
    arg2: EntitySpan
    relation: RelationRecord


_ENTITY_OPEN = re.compile(r'<%s\s+%s="([^"]*)"\s*>' % (ENTITY_TAG, ID_ATTR))
_DOC_OPEN = re.compile(r'<%s\s+%s="([^"]*)"\s*>' % (DOC_TAG, ID_ATTR))
_RELATION_LINE = re.compile(r"^([A-Za-z_]+)\(([^,()\s]+),([^,()\s]+)(,REVERSE)?\)$")


def _parse_segment(raw: str, pos: int, close_tag: str, doc_id: str,
                   in_title: bool, seen_ids: set[str]):
    """Scan one title/abstract body up to its closing tag.

    Returns (stripped_text, spans, position after the closing tag).
    """
    out: list[str] = []
    spans: list[EntitySpan] = []
    open_entity: tuple[str, int, int] | None = None  # (id, stripped start, raw offset)
    n = len(raw)
    while pos < n:
        ch = raw[pos]
        if ch != "<":
            out.append(ch)
            pos += 1
            continue
        if raw.startswith(close_tag, pos):
            if open_entity is not None:
                raise ParseError(
                    f"doc {doc_id!r}: entity {open_entity[0]!r} opened at offset "
                    f"{open_entity[2]} is never closed")
            text = "".join(out)
            return text, spans, pos + len(close_tag)
        if raw.startswith(f"</{ENTITY_TAG}>", pos):
            if open_entity is None:
                raise ParseError(
                    f"doc {doc_id!r}: closing </{ENTITY_TAG}> without an open "
                    f"entity at offset {pos}")
            ent_id, start, _ = open_entity
            end = len(out)
            spans.append(EntitySpan(
                entity_id=ent_id, start_char=start, end_char=end,
                in_title=in_title, surface="".join(out[start:end])))
            open_entity = None
            pos += len(f"</{ENTITY_TAG}>")
            continue
        m = _ENTITY_OPEN.match(raw, pos)
        if m:
            if open_entity is not None:
                raise ParseError(
                    f"doc {doc_id!r}: nested entity tag at offset {pos}")
            ent_id = m.group(1)
            if not ent_id:
                raise ParseError(f"doc {doc_id!r}: empty entity id at offset {pos}")
            if ent_id in seen_ids:
                raise ParseError(
                    f"doc {doc_id!r}: duplicate entity id {ent_id!r} at offset {pos}")
            seen_ids.add(ent_id)
            open_entity = (ent_id, len(out), pos)
            pos = m.end()
            continue
        raise ParseError(
            f"doc {doc_id!r}: malformed tag at offset {pos}: "
            f"{raw[pos:pos + 30]!r}")
    raise ParseError(f"doc {doc_id!r}: missing {close_tag} (input ends at {n})")


def _expect(raw: str, pos: int, token: str, doc_id: str) -> int:
    while pos < len(raw) and raw[pos].isspace():
        pos += 1
    if not raw.startswith(token, pos):
        raise ParseError(
            f"doc {doc_id!r}: expected {token!r} at offset {pos}, found "
            f"{raw[pos:pos + 30]!r}")
    return pos + len(token)


def parse_documents(raw_text: str) -> list[Document]:
    """Parse the concatenated markup file into Documents with entity spans."""
    docs: list[Document] = []
    doc_ids: set[str] = set()
    pos = 0
    n = len(raw_text)
    while True:
        while pos < n and raw_text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _DOC_OPEN.match(raw_text, pos)
        if not m:
            raise ParseError(
                f"expected <{DOC_TAG} {ID_ATTR}=...> at offset {pos}, found "
                f"{raw_text[pos:pos + 30]!r}")
        doc_id = m.group(1)
        if not doc_id:
            raise ParseError(f"empty document id at offset {pos}")
        if doc_id in doc_ids:
            raise ParseError(f"duplicate document id {doc_id!r} at offset {pos}")
        doc_ids.add(doc_id)
        pos = m.end()
        seen_ids: set[str] = set()
        pos = _expect(raw_text, pos, f"<{TITLE_TAG}>", doc_id)
        title, t_spans, pos = _parse_segment(
            raw_text, pos, f"</{TITLE_TAG}>", doc_id, True, seen_ids)
        pos = _expect(raw_text, pos, f"<{ABSTRACT_TAG}>", doc_id)
        abstract, a_spans, pos = _parse_segment(
            raw_text, pos, f"</{ABSTRACT_TAG}>", doc_id, False, seen_ids)
        pos = _expect(raw_text, pos, f"</{DOC_TAG}>", doc_id)
        docs.append(Document(doc_id=doc_id, title=title, abstract=abstract,
                             entities=tuple(t_spans + a_spans)))
    return docs


def parse_relations(raw_text: str) -> list[RelationRecord]:
    """Parse the relations file, one LABEL(id1,id2[,REVERSE]) per line."""
    records: list[RelationRecord] = []
    for line_no, line in enumerate(raw_text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        m = _RELATION_LINE.match(line)
        if not m:
            raise ParseError(f"line {line_no}: malformed relation {line!r}")
        label, arg1, arg2, rev = m.groups()
        if label not in LABEL_TO_INDEX:
            raise ParseError(
                f"line {line_no}: unknown label {label!r}; valid labels are "
                + ", ".join(LABELS))
        if arg1 == arg2:
            raise ParseError(
                f"line {line_no}: relation arguments must differ, got {arg1!r} twice")
        records.append(RelationRecord(label=label, arg1_id=arg1, arg2_id=arg2,
                                      reverse=rev is not None, line_no=line_no))
    return records


def _entity_index(documents: list[Document]) -> dict[str, tuple[Document, EntitySpan]]:
    index: dict[str, tuple[Document, EntitySpan]] = {}
    for doc in documents:
        for span in doc.entities:
            if span.entity_id in index:
                raise ResolutionError(
                    f"entity id {span.entity_id!r} appears in documents "
                    f"{index[span.entity_id][0].doc_id!r} and {doc.doc_id!r}")
            index[span.entity_id] = (doc, span)
    return index


def resolve(corpus: Corpus) -> list[ResolvedRelation]:
    """Join every relation to its document and entity spans.

    Dangling ids, pairs split across documents and pairs straddling title and
    abstract are all resolution errors.
    """
    index = _entity_index(corpus.documents)
    resolved: list[ResolvedRelation] = []
    for rel in corpus.relations:
        where = f"relation {rel.render()}"
        if rel.line_no >= 0:
            where += f" (line {rel.line_no})"
        for arg in (rel.arg1_id, rel.arg2_id):
            if arg not in index:
                raise ResolutionError(f"{where}: unknown entity id {arg!r}")
        doc1, span1 = index[rel.arg1_id]
        doc2, span2 = index[rel.arg2_id]
        if doc1.doc_id != doc2.doc_id:
            raise ResolutionError(
                f"{where}: entities live in different documents "
                f"({doc1.doc_id!r} vs {doc2.doc_id!r})")
        if span1.in_title != span2.in_title:
            raise ResolutionError(
                f"{where}: entities straddle title and abstract of {doc1.doc_id!r}")
        resolved.append(ResolvedRelation(doc1, span1, span2, rel))
    return resolved


def class_histogram(corpus: Corpus) -> dict[str, int]:
    """Relation counts per label, all six labels always present."""
    counts = {label: 0 for label in LABELS}
    for rel in corpus.relations:
        if rel.label not in counts:
            raise DataError(f"unknown label {rel.label!r} in corpus")
        counts[rel.label] += 1
    return counts


def render_segment(text: str, spans: list[EntitySpan]) -> str:
    """Re-insert entity tags into stripped segment text (round-trip helper)."""
    parts: list[str] = []
    cursor = 0
    for span in sorted(spans, key=lambda s: s.start_char):
        parts.append(text[cursor:span.start_char])
        parts.append(f'<{ENTITY_TAG} {ID_ATTR}="{span.entity_id}">')
        parts.append(text[span.start_char:span.end_char])
        parts.append(f"</{ENTITY_TAG}>")
        cursor = span.end_char
    parts.append(text[cursor:])
    return "".join(parts)


def render_document(doc: Document) -> str:
    """Serialize a Document back to canonical markup."""
    title_spans = [s for s in doc.entities if s.in_title]
    abstract_spans = [s for s in doc.entities if not s.in_title]
    return (
        f'<{DOC_TAG} {ID_ATTR}="{doc.doc_id}">\n'
        f"<{TITLE_TAG}>{render_segment(doc.title, title_spans)}</{TITLE_TAG}>\n"
        f"<{ABSTRACT_TAG}>{render_segment(doc.abstract, abstract_spans)}</{ABSTRACT_TAG}>\n"
        f"</{DOC_TAG}>\n"
    )


def load_corpus(text_path, relations_path, source_tag: str = "task1.1") -> Corpus:
    """Read and parse the two corpus files."""
    with open(text_path, encoding="utf-8") as fh:
        documents = parse_documents(fh.read())
    with open(relations_path, encoding="utf-8") as fh:
        relations = parse_relations(fh.read())
    return Corpus(documents=documents, relations=relations, source_tag=source_tag)
