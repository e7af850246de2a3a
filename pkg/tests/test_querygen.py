import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from groundline.core import Query, ValidationError
from groundline.gateway import Gateway, OfflineChatProvider, ResponseCache
from groundline.querygen import (
    CORRECT_INSTRUCTION,
    REPHRASE_INSTRUCTION,
    DebiasedQuerySet,
    ParseError,
    build_debias_prompt,
    debias,
    parse_rephrasings,
    read_debiased_jsonl,
    write_debiased_jsonl,
)

QUERY = Query("q1", "girl in a ociture frame")

# Typical chat-model answers, with the items a careful reader would extract.
LLM_OUTPUTS = [
    (
        "1. A girl inside a picture frame.\n2. A young girl framed in a picture.\n3. A girl in an image frame.\n"
        "4. A picture frame showing a girl.\n5. A girl pictured within a frame.",
        ["A girl inside a picture frame.", "A young girl framed in a picture.", "A girl in an image frame.",
         "A picture frame showing a girl.", "A girl pictured within a frame."],
    ),
    (
        '1) "A girl in a picture frame"\n2) "A girl within a photo frame"\n3) "Girl inside an image frame"\n'
        '4) "A framed picture of a girl"\n5) "A girl shown in a frame"',
        ["A girl in a picture frame", "A girl within a photo frame", "Girl inside an image frame",
         "A framed picture of a girl", "A girl shown in a frame"],
    ),
    (
        "Sure! Here are five rephrasings of the corrected query:\n\n1. A girl in a picture frame\n"
        "2. A girl in a photo frame\n3. A young lady in a picture frame\n4. A girl framed in a picture\n"
        "5. A picture of a girl in a frame\n\nLet me know if you need more.",
        ["A girl in a picture frame", "A girl in a photo frame", "A young lady in a picture frame",
         "A girl framed in a picture", "A picture of a girl in a frame"],
    ),
    (
        "Corrected query: girl in a picture frame\n\n1. **A girl inside a picture frame**\n"
        "2. **A picture frame holding a girl**\n3. **A girl framed in a photograph**\n"
        "4. **A young girl within a frame**\n5. **A framed image of a girl**",
        ["A girl inside a picture frame", "A picture frame holding a girl", "A girl framed in a photograph",
         "A young girl within a frame", "A framed image of a girl"],
    ),
    (
        "**1.** A girl in a picture frame.\n**2.** A girl shown inside a frame.\n**3.** An image of a girl in a frame.\n"
        "**4.** A framed picture showing a girl.\n**5.** A girl appearing in a photo frame.",
        ["A girl in a picture frame.", "A girl shown inside a frame.", "An image of a girl in a frame.",
         "A framed picture showing a girl.", "A girl appearing in a photo frame."],
    ),
    (
        "(1) A girl in a picture frame\n(2) A girl within an image frame\n(3) A girl portrayed in a frame\n"
        "(4) A frame containing a girl's picture\n(5) A girl captured in a picture frame",
        ["A girl in a picture frame", "A girl within an image frame", "A girl portrayed in a frame",
         "A frame containing a girl's picture", "A girl captured in a picture frame"],
    ),
    (
        "1: “A girl in a picture frame.”\n2: “A girl inside a photo frame.”\n3: “A young girl in a frame.”\n"
        "4: “A framed photo of a girl.”\n5: “A girl displayed in a frame.”",
        ["A girl in a picture frame.", "A girl inside a photo frame.", "A young girl in a frame.",
         "A framed photo of a girl.", "A girl displayed in a frame."],
    ),
    (
        "  1.   A girl in a picture frame   \n\n  2.   A girl in an image frame\n  3.   A girl within a frame\n"
        "  4.   A frame with a girl in it\n  5.   A picture of a girl in a frame  ",
        ["A girl in a picture frame", "A girl in an image frame", "A girl within a frame",
         "A frame with a girl in it", "A picture of a girl in a frame"],
    ),
    (
        "- 1. A girl in a picture frame\n- 2. A girl shown in a photo frame\n- 3. A girl inside an image frame\n"
        "- 4. A picture frame with a girl\n- 5. A girl framed in an image\n- 6. A bonus rephrasing",
        ["A girl in a picture frame", "A girl shown in a photo frame", "A girl inside an image frame",
         "A picture frame with a girl", "A girl framed in an image"],
    ),
    (
        "1. 'A girl in a picture frame'\n2. 'A girl in a picture frame'\n3. 'A girl in a photo frame'\n"
        "4. 'A girl within a frame'\n5. 'A framed girl'\n6. 'A girl inside an image frame'",
        ["A girl in a picture frame", "A girl in a photo frame", "A girl within a frame", "A framed girl",
         "A girl inside an image frame"],
    ),
]


class Scripted:
    def __init__(self, *answers):
        self.answers = list(answers)
        self.prompts = []

    def complete(self, request):
        self.prompts.append(request.user_text())
        return self.answers[min(len(self.prompts), len(self.answers)) - 1]


def test_prompt_aggregates_instructions():
    req = build_debias_prompt(QUERY, 5)
    assert len(req.messages) == 1 and req.messages[0].role == "user"
    text = req.user_text()
    for part in (CORRECT_INSTRUCTION, REPHRASE_INSTRUCTION, "Provide five different rephrasings.", QUERY.text):
        assert part in text
    assert req.temperature == 0.2


def test_prompt_singular_count():
    assert "Provide one rephrasing." in build_debias_prompt(QUERY, 1).user_text()


def test_empty_query_rejected_upstream():
    with pytest.raises(ValidationError):
        Query("q", "")


def test_parse_canonical():
    assert parse_rephrasings("1. A\n2. B\n3. C\n4. D\n5. E", 5) == ["A", "B", "C", "D", "E"]


@pytest.mark.parametrize("raw, expected", LLM_OUTPUTS)
def test_parse_real_output_variants(raw, expected):
    assert parse_rephrasings(raw, 5) == expected


def test_parse_failure():
    with pytest.raises(ParseError):
        parse_rephrasings("no list here", 5)
    with pytest.raises(ParseError):
        parse_rephrasings("1. A\n2. B\n3. C", 5)


def test_duplicates_kept_when_needed():
    assert parse_rephrasings("1. x\n2. x\n3. x", 3) == ["x", "x", "x"]


@given(st.lists(st.text(alphabet="abcdefgh ", min_size=1, max_size=12).filter(str.strip), min_size=1, max_size=8))
def test_parse_roundtrip(items):
    items = [i.strip() for i in items]
    text = "\n".join(f"{n}. {t}" for n, t in enumerate(items, start=1))
    out = parse_rephrasings(text, len(items))
    assert len(out) == len(items)
    assert set(out) <= set(items)


def test_identity_provider_gives_copies():
    s = debias(QUERY, Gateway(OfflineChatProvider()), 5)
    assert s.rephrasings == (QUERY.text,) * 5
    assert s.original == QUERY


def test_bad_output_reprompts_then_falls_back(caplog):
    chat = Scripted("1. a\n2. b\n3. c")
    with caplog.at_level(logging.WARNING):
        s = debias(QUERY, Gateway(chat), 5)
    assert len(chat.prompts) == 2 and chat.prompts[0] != chat.prompts[1]
    assert s.rephrasings == (QUERY.text,) * 5
    assert "falling back" in caplog.text


def test_reprompt_recovers():
    good = "\n".join(f"{i}. r{i}" for i in range(1, 6))
    s = debias(QUERY, Gateway(Scripted("garbage", good)), 5)
    assert s.rephrasings == ("r1", "r2", "r3", "r4", "r5")


@pytest.mark.parametrize("answer", ["", "nothing", "1. only one", LLM_OUTPUTS[0][0]])
def test_debias_always_returns_n_q(answer):
    assert debias(QUERY, Gateway(Scripted(answer)), 5).n_q == 5


def test_warm_cache_determinism(tmp_path):
    chat = OfflineChatProvider.from_config({"rephrasings": {QUERY.text: [f"v{i}" for i in range(5)]}})
    a = debias(QUERY, Gateway(chat, cache=ResponseCache(tmp_path)))
    b = debias(QUERY, Gateway(None, cache=ResponseCache(tmp_path)))
    assert a == b and chat.calls == 1


def test_jsonl_roundtrip(tmp_path):
    sets = [DebiasedQuerySet(Query(i, f"query {i}"), tuple(f"r{i}{j}" for j in range(5))) for i in range(100)]
    path = tmp_path / "debiased.jsonl"
    write_debiased_jsonl(sets, path)
    back = list(read_debiased_jsonl(path))
    assert back == sets
    assert all(s.n_q == 5 for s in back)


def test_set_invariants():
    with pytest.raises(ValidationError):
        DebiasedQuerySet(QUERY, ())
    with pytest.raises(ValidationError):
        DebiasedQuerySet(QUERY, ("ok", " "))
