import pytest

from reviewscope.errors import ParseFailure
from reviewscope.jsonutil import first_json_object


def test_plain_object():
    assert first_json_object('{"a": 1}') == {"a": 1}


def test_object_inside_fences_and_prose():
    raw = 'Sure!\n```json\n{"a": {"b": [1, 2]}}\n```\ntrailing words'
    assert first_json_object(raw) == {"a": {"b": [1, 2]}}


def test_braces_inside_strings_do_not_confuse_balancing():
    raw = 'prefix {"key": "value with } brace and {", "n": 2} suffix'
    assert first_json_object(raw) == {"key": "value with } brace and {", "n": 2}


def test_escaped_quotes_inside_strings():
    raw = '{"k": "she said \\"hi\\" {"}'
    assert first_json_object(raw) == {"k": 'she said "hi" {'}


def test_first_of_several_objects_wins():
    assert first_json_object('{"first": 1} {"second": 2}') == {"first": 1}


def test_skips_unparseable_candidate_and_finds_later_object():
    raw = "{broken json} and then {\"ok\": true}"
    assert first_json_object(raw) == {"ok": True}


def test_trailing_comma_recovery():
    assert first_json_object('{"a": 1,}') == {"a": 1}
    assert first_json_object('{"a": [1, 2,],}') == {"a": [1, 2]}


def test_array_is_not_an_object():
    with pytest.raises(ParseFailure):
        first_json_object("[1, 2, 3]")


def test_no_object_raises_with_raw_preserved():
    with pytest.raises(ParseFailure) as err:
        first_json_object("nothing to see")
    assert err.value.raw_text == "nothing to see"


def test_unbalanced_brace_raises():
    with pytest.raises(ParseFailure):
        first_json_object('{"a": 1')
