import pytest

from ood_adapters.corpus_io import Record
from ood_adapters.templates import check_template, embedding_text, render


def record(text="some text", pair=None, groups=None):
    return Record(id="r1", text=text, text_pair=pair, groups=groups or {"topic": "energy"})


def test_check_template_accepts_canonical_forms():
    check_template("The attitude of [ARG] is [MASK] regarding [TOPIC]")
    check_template("The sentiment of [REVIEW] is [MASK]")
    check_template("[SENTENCE-1]? [MASK], [SENTENCE-2]")
    check_template("[TEXT] is [MASK] evidence regarding [TOPIC]")


def test_check_template_requires_exactly_one_mask():
    with pytest.raises(ValueError, match="no \\[MASK\\]"):
        check_template("The sentiment of [TEXT] is?")
    with pytest.raises(ValueError, match="2"):
        check_template("[MASK] of [TEXT] is [MASK]")


def test_check_template_rejects_unknown_placeholder():
    with pytest.raises(ValueError, match="ESSAY"):
        check_template("[ESSAY] is [MASK]")


def test_render_fills_text_and_group():
    out = render(
        "The attitude of [ARG] is [MASK] regarding [TOPIC]",
        record(text="we should act"),
        mask_token="[MASK]",
    )
    assert out == "The attitude of we should act is [MASK] regarding energy"


def test_render_pairwise():
    out = render(
        "[SENTENCE-1]? [MASK], [SENTENCE-2]",
        record(text="first", pair="second"),
        mask_token="<mask>",
    )
    assert out == "first? <mask>, second"


def test_render_missing_pair_errors():
    with pytest.raises(ValueError, match="text_pair"):
        render("[SENTENCE-1]? [MASK], [SENTENCE-2]", record(), mask_token="[MASK]")


def test_render_missing_group_errors():
    with pytest.raises(ValueError, match="domain"):
        render("[TEXT] is [MASK] in [DOMAIN]", record(), mask_token="[MASK]")


def test_embedding_text_concatenates_pair():
    assert embedding_text(record(text="a", pair="b")) == "a b"
    assert embedding_text(record(text="a")) == "a"
