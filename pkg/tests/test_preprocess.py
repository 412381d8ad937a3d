"""Cleaning, tokenization, offset provenance, and instance construction."""

import re

import numpy as np
import pytest

from scirel.corpus import EntitySpan, parse_documents, parse_relations, resolve, Corpus
from scirel.embeddings import Vocabulary
from scirel.preprocess import (FORWARD, REVERSE, InstanceError,
                               PreprocessConfig, PreprocessError,
                               build_instance, build_instances, clean,
                               head_position, prepare_segment,
                               relative_positions, tokenize)

CFG = PreprocessConfig()
CFG_KEEP_CASE = PreprocessConfig(lowercase=False)


def oracle_clean(text: str, cfg: PreprocessConfig) -> str:
    """Independent re-implementation of the cleaning rules (regex based)."""
    if cfg.lowercase:
        text = "".join(c.lower() if len(c.lower()) == 1 else c for c in text)
    n = len(text)
    kept = []
    for i, c in enumerate(text):
        if c.isalnum():
            kept.append(c)
        elif (c == "-" and 0 < i < n - 1
              and text[i - 1].isalnum() and text[i + 1].isalnum()):
            kept.append(c)
        else:
            kept.append(" ")
    s = "".join(kept)

    def swap(m: re.Match) -> str:
        if m.start() > 0 and s[m.start() - 1].isalpha():
            return m.group(0)
        if m.end() < len(s) and s[m.end()].isalpha():
            return m.group(0)
        return cfg.number_token

    return " ".join(re.sub(r"[0-9]+", swap, s).split())


class TestClean:
    def test_worked_example_case_preserved(self):
        assert clean("F1-score of 48.1%!", CFG_KEEP_CASE) == "F1-score of <num> <num>"

    def test_worked_example_lowercased(self):
        assert clean("F1-score of 48.1%!", CFG) == "f1-score of <num> <num>"

    def test_empty(self):
        assert clean("", CFG) == ""

    def test_clean_text_unchanged(self):
        assert clean("already clean text", CFG) == "already clean text"

    @pytest.mark.parametrize("raw,expected", [
        ("state-of-the-art", "state-of-the-art"),
        ("a - b", "a b"),                    # hyphen not between alnum chars
        ("-edge and trailing-", "edge and trailing"),
        ("don't", "don t"),
        ("(parens), [brackets]!", "parens brackets"),
        ("12", "<num>"),
        ("3.5%", "<num> <num>"),
        ("1-2", "<num>-<num>"),              # hyphen kept, runs still replaced
        ("x-1", "x-<num>"),
        ("F1 beats GPT2", "f1 beats gpt2"),  # digits glued to letters survive
        ("  spaced   out  ", "spaced out"),
    ])
    def test_tricky_cases(self, raw, expected):
        assert clean(raw, CFG) == expected

    @pytest.mark.parametrize("raw", [
        "F1-score of 48.1%!", "state-of-the-art 12 systems", "a-1-b 007",
        "--", "- -", "9-9-9", "A1-2B", "100% of 0.5",
    ])
    def test_matches_oracle_on_tricky_inputs(self, raw):
        for cfg in (CFG, CFG_KEEP_CASE):
            assert clean(raw, cfg) == oracle_clean(raw, cfg)

    def test_matches_oracle_on_random_ascii(self):
        rng = np.random.default_rng(7)
        alphabet = list("abXY019 -.%(),'!")
        for _ in range(300):
            raw = "".join(rng.choice(alphabet, size=rng.integers(0, 40)))
            assert clean(raw, CFG) == oracle_clean(raw, CFG), repr(raw)

    def test_custom_number_token(self):
        cfg = PreprocessConfig(number_token="NUM")
        assert clean("12 cats", cfg) == "NUM cats"


class TestTokenize:
    def test_tokens_and_offsets(self):
        seg = tokenize("use of bigrams")
        assert seg.tokens == ["use", "of", "bigrams"]
        assert seg.char_to_token[0] == 0
        assert seg.char_to_token[7] == 2
        assert seg.char_to_token[13] == 2
        assert 14 not in seg.char_to_token

    def test_whitespace_maps_to_next_token(self):
        seg = tokenize("use of bigrams")
        assert seg.char_to_token[3] == 1  # the space before "of"

    def test_single_token(self):
        seg = tokenize("alpha")
        assert seg.tokens == ["alpha"]
        assert all(seg.char_to_token[i] == 0 for i in range(5))

    def test_empty(self):
        seg = tokenize("")
        assert seg.tokens == []
        assert seg.char_to_token == {}


class TestPrepareSegment:
    def test_offsets_are_raw_not_cleaned(self):
        # '(' at raw offset 2 is deleted; it must map to the next token "b"
        seg = prepare_segment("a (b) c", CFG)
        assert seg.tokens == ["a", "b", "c"]
        assert seg.char_to_token[2] == 1
        assert seg.char_to_token[3] == 1
        assert seg.char_to_token[6] == 2

    def test_head_position_first_token_of_mention(self):
        text = "We use statistical parsers here."
        seg = prepare_segment(text, CFG)
        span = EntitySpan(entity_id="D.1", start_char=7, end_char=26,
                          in_title=False, surface="statistical parsers")
        assert seg.tokens[head_position(seg, span)] == "statistical"

    def test_head_position_unresolvable(self):
        seg = prepare_segment("abc !!!", CFG)
        span = EntitySpan(entity_id="D.1", start_char=4, end_char=7,
                          in_title=False, surface="!!!")
        with pytest.raises(PreprocessError, match="D.1"):
            head_position(seg, span)


class TestRelativePositions:
    def test_small_window(self):
        out = relative_positions(5, 2, 4)
        assert out.tolist() == [-2, -1, 0, 1, 2]

    def test_clamped_to_window(self):
        out = relative_positions(100, 0, 30)
        assert out[0] == 0
        assert out[30] == 30
        assert out[45] == 30
        assert out[99] == 30

    def test_anchor_is_zero(self):
        for p in range(7):
            assert relative_positions(7, p, 3)[p] == 0

    def test_errors(self):
        with pytest.raises(ValueError):
            relative_positions(5, 5, 3)
        with pytest.raises(ValueError):
            relative_positions(5, -1, 3)
        with pytest.raises(ValueError):
            relative_positions(5, 2, 0)


def make_doc(abstract_markup: str, doc_id: str = "T1"):
    markup = (f'<text id="{doc_id}">\n<title>t</title>\n'
              f'<abstract>{abstract_markup}</abstract>\n</text>')
    return parse_documents(markup)[0]


def entity(doc, entity_id):
    return next(e for e in doc.entities if e.entity_id == entity_id)


VOCAB = Vocabulary.from_words(["we", "use", "bigrams", "statistical", "parser"])


class TestBuildInstance:
    def build(self, reverse=False, max_seq_len=16):
        doc = make_doc('We use <entity id="T1.1">bigrams</entity> within a '
                       '<entity id="T1.2">statistical parser</entity> framework.')
        (rel,) = parse_relations("USAGE(T1.1,T1.2,REVERSE)" if reverse
                                 else "USAGE(T1.1,T1.2)")
        cfg = PreprocessConfig(max_seq_len=max_seq_len, position_window=4)
        inst = build_instance(doc, entity(doc, "T1.1"), entity(doc, "T1.2"),
                              rel, VOCAB, cfg)
        return inst, cfg

    def test_ids_padding_and_unk(self):
        inst, _ = self.build()
        # we use bigrams within a statistical parser framework
        assert inst.token_ids[:8].tolist() == [2, 3, 4, 1, 1, 5, 6, 1]
        assert inst.token_ids.dtype == np.int32
        assert np.all(inst.token_ids[8:] == VOCAB.pad_id)
        assert inst.real_length == 8

    def test_head_positions_and_ids(self):
        inst, _ = self.build()
        assert (inst.p1, inst.p2) == (2, 5)
        assert inst.token_ids[inst.p1] == VOCAB.id_of("bigrams")
        assert inst.token_ids[inst.p2] == VOCAB.id_of("statistical")

    def test_relative_positions_match_formula(self):
        inst, cfg = self.build()
        for rel_pos, p in ((inst.rel_pos1, inst.p1), (inst.rel_pos2, inst.p2)):
            expected = np.clip(np.arange(cfg.max_seq_len) - p,
                               -cfg.position_window, cfg.position_window)
            assert rel_pos.tolist() == expected.tolist()
            assert rel_pos[p] == 0
            steps = np.diff(rel_pos)
            assert np.all((steps == 0) | (steps == 1))

    def test_direction_passthrough(self):
        assert self.build(reverse=False)[0].direction == FORWARD
        assert self.build(reverse=True)[0].direction == REVERSE

    def test_metadata_and_label(self):
        inst, _ = self.build()
        assert (inst.doc_id, inst.arg1_id, inst.arg2_id) == ("T1", "T1.1", "T1.2")
        assert inst.label == 0  # USAGE

    def test_deterministic(self):
        a, _ = self.build()
        b, _ = self.build()
        assert np.array_equal(a.token_ids, b.token_ids)
        assert np.array_equal(a.rel_pos1, b.rel_pos1)
        assert (a.p1, a.p2, a.real_length) == (b.p1, b.p2, b.real_length)

    def test_deleted_leading_char_still_resolves(self):
        doc = make_doc('We use <entity id="T1.1">(bigrams)</entity> with '
                       '<entity id="T1.2">parser</entity> code.')
        (rel,) = parse_relations("USAGE(T1.1,T1.2)")
        inst = build_instance(doc, entity(doc, "T1.1"), entity(doc, "T1.2"),
                              rel, VOCAB, PreprocessConfig(max_seq_len=16))
        assert inst.token_ids[inst.p1] == VOCAB.id_of("bigrams")


def long_doc(i1: int, i2: int, n: int = 250):
    words = [f"w{k}" for k in range(n)]
    words[i1] = f'<entity id="L.1">{words[i1]}</entity>'
    words[i2] = f'<entity id="L.2">{words[i2]}</entity>'
    return make_doc(" ".join(words), doc_id="L")


LONG_VOCAB = Vocabulary.from_words([f"w{k}" for k in range(250)])
(LONG_REL,) = parse_relations("USAGE(L.1,L.2)")


class TestTruncation:
    def test_window_clamped_to_front(self):
        doc = long_doc(10, 40)
        cfg = PreprocessConfig(max_seq_len=200)
        inst = build_instance(doc, entity(doc, "L.1"), entity(doc, "L.2"),
                              LONG_REL, LONG_VOCAB, cfg)
        assert inst.real_length == 200
        assert (inst.p1, inst.p2) == (10, 40)
        assert inst.token_ids[0] == LONG_VOCAB.id_of("w0")
        assert inst.token_ids[199] == LONG_VOCAB.id_of("w199")
        assert inst.token_ids[inst.p1] == LONG_VOCAB.id_of("w10")

    def test_window_clamped_to_back(self):
        doc = long_doc(150, 180)
        cfg = PreprocessConfig(max_seq_len=200)
        inst = build_instance(doc, entity(doc, "L.1"), entity(doc, "L.2"),
                              LONG_REL, LONG_VOCAB, cfg)
        # start = clamp(165 - 100, 0, 50) = 50
        assert (inst.p1, inst.p2) == (100, 130)
        assert inst.token_ids[0] == LONG_VOCAB.id_of("w50")
        assert inst.token_ids[199] == LONG_VOCAB.id_of("w249")
        assert inst.token_ids[inst.p1] == LONG_VOCAB.id_of("w150")

    def test_heads_too_far_apart(self):
        doc = long_doc(0, 205)
        with pytest.raises(InstanceError, match="exceed max_seq_len"):
            build_instance(doc, entity(doc, "L.1"), entity(doc, "L.2"),
                           LONG_REL, LONG_VOCAB, PreprocessConfig(max_seq_len=200))


class TestBuildInstanceErrors:
    def test_shared_head_token(self):
        doc = make_doc('a <entity id="T1.1">state</entity>-'
                       '<entity id="T1.2">of</entity>-the-art b')
        (rel,) = parse_relations("PART_WHOLE(T1.1,T1.2)")
        with pytest.raises(InstanceError, match="share head token"):
            build_instance(doc, entity(doc, "T1.1"), entity(doc, "T1.2"),
                           rel, VOCAB, CFG)

    def test_cross_segment(self):
        markup = ('<text id="T1">\n'
                  '<title>about <entity id="T1.1">parsing</entity></title>\n'
                  '<abstract>uses <entity id="T1.2">bigrams</entity></abstract>\n'
                  '</text>')
        doc = parse_documents(markup)[0]
        (rel,) = parse_relations("USAGE(T1.1,T1.2)")
        with pytest.raises(InstanceError, match="different segments"):
            build_instance(doc, entity(doc, "T1.1"), entity(doc, "T1.2"),
                           rel, VOCAB, CFG)

    def test_empty_segment_after_cleaning(self):
        doc = make_doc('<entity id="T1.1">!</entity><entity id="T1.2">?</entity>!')
        (rel,) = parse_relations("USAGE(T1.1,T1.2)")
        with pytest.raises(InstanceError, match="empty after cleaning"):
            build_instance(doc, entity(doc, "T1.1"), entity(doc, "T1.2"),
                           rel, VOCAB, CFG)


def test_build_instances_collects_skips():
    markup = (
        '<text id="T1">\n<title>t</title>\n'
        '<abstract>We use <entity id="T1.1">bigrams</entity> in a '
        '<entity id="T1.2">parser</entity> and a '
        '<entity id="T1.3">state</entity>-<entity id="T1.4">of</entity>-the-art '
        'system.</abstract>\n</text>')
    corpus = Corpus(documents=parse_documents(markup),
                    relations=parse_relations("USAGE(T1.1,T1.2)\n"
                                              "PART_WHOLE(T1.3,T1.4)"))
    instances, skipped = build_instances(resolve(corpus), VOCAB, CFG)
    assert len(instances) == 1
    assert len(skipped) == 1
    assert skipped[0].doc_id == "T1"
    assert skipped[0].relation.label == "PART_WHOLE"
    assert "share head token" in skipped[0].reason
