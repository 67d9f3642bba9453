import pytest
from hypothesis import given, strategies as st

from regqa.errors import MalformedId
from regqa.sections import (
    SectionId,
    ancestors,
    detect_cross_references,
    parent_of,
    parse_section_id,
)


def to_roman(n: int) -> str:
    # independent reference used to generate valid roman tokens
    numerals = [(1000, "m"), (900, "cm"), (500, "d"), (400, "cd"),
                (100, "c"), (90, "xc"), (50, "l"), (40, "xl"),
                (10, "x"), (9, "ix"), (5, "v"), (4, "iv"), (1, "i")]
    out = []
    for value, token in numerals:
        while n >= value:
            out.append(token)
            n -= value
    return "".join(out)


class TestParse:
    def test_three_level_id(self):
        sid = parse_section_id("1926.500(a)(2)(i)")
        assert sid.part == 1926
        assert sid.section == 500
        assert sid.levels == ("a", "2", "i")

    def test_zero_level_base(self):
        sid = parse_section_id("1926.451")
        assert (sid.part, sid.section, sid.levels) == (1926, 451, ())

    def test_missing_section_number(self):
        with pytest.raises(MalformedId):
            parse_section_id("1926.(a)")

    @pytest.mark.parametrize("raw", [
        "", "   ", "1926", "1926.", ".451", "1926.451(", "1926.451()",
        "1926.451( )", "1926.451(2)", "1926.451(b)(b)", "1926.451(b)(2)(2)",
        "1926.451(b)(0)", "1926.451(b)(2)(q)", "0926.451", "1926.0451",
        "1926.451(b) (2)", "xyz", "1926.451x", "1926.451(b)x",
    ])
    def test_malformed(self, raw):
        with pytest.raises(MalformedId):
            parse_section_id(raw)

    def test_normalization(self):
        assert parse_section_id(" §1926.502(K) ").canonical_text == "1926.502(k)"
        assert parse_section_id("1926.500(A)(2)(I)").canonical_text == "1926.500(a)(2)(i)"

    def test_canonical_has_no_whitespace_and_lowercase(self):
        sid = parse_section_id("§ 1926.451(B)(2)(IV)")
        assert " " not in sid.canonical_text
        assert sid.canonical_text == sid.canonical_text.lower()

    def test_depth_cap_default_three(self):
        with pytest.raises(MalformedId):
            parse_section_id("1926.451(b)(2)(i)(A)")

    def test_extended_depth_opt_in(self):
        sid = parse_section_id("1926.451(b)(2)(i)(A)(IV)", max_levels=5)
        assert sid.levels == ("b", "2", "i", "A", "IV")
        assert sid.canonical_text == "1926.451(b)(2)(i)(A)(IV)"
        with pytest.raises(MalformedId):
            parse_section_id("1926.451(b)(2)(i)(iv)(A)", max_levels=5)

    def test_position_decides_kind(self):
        # "(i)" is a letter at position 1, a roman at position 3
        assert parse_section_id("1926.500(i)").levels == ("i",)
        assert parse_section_id("1926.500(i)(2)(i)").levels == ("i", "2", "i")
        with pytest.raises(MalformedId):
            parse_section_id("1926.500(2)")


class TestParent:
    def test_chain(self):
        sid = parse_section_id("1926.500(a)(2)(i)")
        assert parent_of(sid).canonical_text == "1926.500(a)(2)"
        assert parent_of(parent_of(sid)).canonical_text == "1926.500(a)"

    def test_single_drop(self):
        assert parent_of(parse_section_id("1926.500(a)")).canonical_text == "1926.500"

    def test_base_has_no_parent(self):
        assert parent_of(parse_section_id("1926.651")) is None

    def test_ancestors_reach_base(self):
        sid = parse_section_id("1926.500(a)(2)(i)")
        chain = [a.canonical_text for a in ancestors(sid)]
        assert chain == ["1926.500(a)(2)", "1926.500(a)", "1926.500"]


letters = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=2)
numbers = st.integers(min_value=1, max_value=99).map(str)
romans = st.integers(min_value=1, max_value=30).map(to_roman)


@st.composite
def section_ids(draw):
    part = draw(st.integers(min_value=1, max_value=9999))
    section = draw(st.integers(min_value=1, max_value=9999))
    depth = draw(st.integers(min_value=0, max_value=3))
    pools = [letters, numbers, romans]
    levels = tuple(draw(pools[i]) for i in range(depth))
    return SectionId(part, section, levels)


class TestProperties:
    @given(section_ids())
    def test_round_trip_identity(self, sid):
        assert parse_section_id(sid.canonical_text) == sid
        # parse(canonical(parse(x))) == parse(x)
        reparsed = parse_section_id(sid.canonical_text)
        assert parse_section_id(reparsed.canonical_text) == reparsed

    @given(section_ids())
    def test_parent_applied_depth_times_reaches_base(self, sid):
        current = sid
        for _ in range(len(sid.levels)):
            current = parent_of(current)
        assert current == sid.base()
        assert parent_of(current) is None


class TestCrossReferences:
    def test_sibling_continuation(self):
        host = parse_section_id("1926.451(b)(2)")
        refs = detect_cross_references(
            "except as provided in 1926.451(b)(2)(i) and (ii)", host=host)
        assert [r.canonical_text for r in refs] == [
            "1926.451(b)(2)(i)", "1926.451(b)(2)(ii)"]

    def test_no_digits_no_refs(self):
        assert detect_cross_references("no references here at all") == []

    def test_section_sign_prefix(self):
        refs = detect_cross_references("directs to §1926.502(k)")
        assert [r.canonical_text for r in refs] == ["1926.502(k)"]

    def test_paragraph_of_this_section(self):
        host = parse_section_id("1926.651")
        refs = detect_cross_references(
            "as required by paragraph (b)(2)(i) of this section", host=host)
        assert [r.canonical_text for r in refs] == ["1926.651(b)(2)(i)"]

    def test_paragraph_list_of_this_section(self):
        host = parse_section_id("900.10")
        refs = detect_cross_references(
            "see paragraphs (b)(1) and (b)(2) of this section", host=host)
        assert [r.canonical_text for r in refs] == ["900.10(b)(1)", "900.10(b)(2)"]

    def test_relative_without_host_skipped(self):
        refs = detect_cross_references("see paragraph (b)(2) of this section")
        assert refs == []

    def test_chain_continuation_from_base(self):
        refs = detect_cross_references(
            "inspections under 1926.651(h)(1) and (h)(2) apply")
        assert [r.canonical_text for r in refs] == [
            "1926.651(h)(1)", "1926.651(h)(2)"]

    def test_deduplication(self):
        refs = detect_cross_references(
            "see 1926.502(k); also see 1926.502(k) again")
        assert [r.canonical_text for r in refs] == ["1926.502(k)"]

    def test_decimals_not_matched(self):
        assert detect_cross_references("a slope of 1.5 to 1 and 34.5 degrees") == []
        assert detect_cross_references("version 1926.451.2 is not an id") == []

    def test_sentence_period_after_id(self):
        refs = detect_cross_references("must comply with 1926.451.")
        assert [r.canonical_text for r in refs] == ["1926.451"]

    def test_through_range_endpoints(self):
        refs = detect_cross_references(
            "systems under 1926.451(g)(1)(i) through (vii)")
        texts = [r.canonical_text for r in refs]
        assert "1926.451(g)(1)(i)" in texts
        assert "1926.451(g)(1)(vii)" in texts

    def test_idempotent_on_own_output(self):
        body = "see 1926.502(b)(15) and 1926.502(b)(3) plus §1926.451(d)(10)"
        refs = detect_cross_references(body)
        rendered = " and ".join(r.canonical_text for r in refs)
        again = detect_cross_references(rendered)
        assert set(again) == set(refs)

    def test_all_outputs_parse(self):
        body = ("Scaffolds per 1926.451(b)(2)(i) and (ii); holes per "
                "§1926.501(b)(4)(ii) and covers per §1926.502(i).")
        for ref in detect_cross_references(body):
            assert parse_section_id(ref.canonical_text) == ref
