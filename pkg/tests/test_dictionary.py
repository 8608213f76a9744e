import json
import re

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ovdet.dictionary import (
    ConceptDictionary,
    ConceptEntry,
    HashingProvider,
    HttpProvider,
    TableProvider,
    build_dictionary,
    bundled_lexicon,
    enrich,
    extract_noun_phrases,
    iter_noun_phrases,
    load_dictionary,
    load_lexicon,
    lookup,
    retrieve_nearest,
    sample_negatives,
    save_dictionary,
)
from ovdet.errors import DictionaryError, InsufficientNegativesError, ProviderError


def make_dict(*names, definitions=None):
    definitions = definitions or {}
    return ConceptDictionary(ConceptEntry(n, definitions.get(n), "things", 1) for n in names)


def golden_sources(data_dir):
    captions = (data_dir / "captions.txt").read_text().splitlines()
    return [
        ("imagetext", (p for c in captions for p in iter_noun_phrases(c))),
        ("detection", (data_dir / "detection_names.txt").read_text().split("\n")),
        ("things", (data_dir / "things_names.txt").read_text().split("\n")),
    ]


class TestBuild:
    def test_golden_file(self, data_dir, tmp_path):
        d = build_dictionary(golden_sources(data_dir), 3, load_lexicon(data_dir / "lexicon.jsonl"))
        save_dictionary(d, tmp_path / "d.jsonl")
        assert (tmp_path / "d.jsonl").read_bytes() == (data_dir / "golden_dictionary.jsonl").read_bytes()

    def test_idempotent(self, data_dir):
        lex = load_lexicon(data_dir / "lexicon.jsonl")
        a = build_dictionary(golden_sources(data_dir), 3, lex)
        b = build_dictionary(golden_sources(data_dir), 3, lex)
        assert a.to_jsonl() == b.to_jsonl()

    def test_min_frequency_boundary(self):
        lex = {"dog": "a canine", "cat": "a feline"}
        d = build_dictionary([("imagetext", ["dog"] * 100 + ["cat"] * 99)], 100, lex)
        assert d.names == ("dog",)

    def test_imagetext_requires_definition(self):
        d = build_dictionary([("imagetext", ["lake"] * 5)], 1, {})
        assert len(d) == 0

    def test_source_priority_and_summed_frequency(self):
        d = build_dictionary([("things", ["cup"]), ("detection", ["Cup"]), ("imagetext", ["cup"] * 2)], 1,
                             {"cup": "a vessel"})
        entry = d.get("cup")
        assert (entry.source, entry.frequency) == ("detection", 4)

    def test_negative_min_frequency(self):
        with pytest.raises(DictionaryError):
            build_dictionary([], -1, {})

    @settings(max_examples=50)
    @given(st.lists(st.sampled_from(["dog", "cat", "boat", "lake", "tree"]), max_size=40), st.integers(0, 6))
    def test_imagetext_entries_respect_rules(self, words, min_freq):
        lex = {"dog": "d", "cat": "c", "boat": "b"}
        d = build_dictionary([("imagetext", words)], min_freq, lex)
        for e in d:
            assert e.frequency >= min_freq and e.definition


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        d = make_dict("b", "a", definitions={"a": "x"})
        save_dictionary(d, tmp_path / "d.jsonl")
        assert load_dictionary(tmp_path / "d.jsonl") == d

    def test_duplicate_named(self, tmp_path):
        row = json.dumps({"name": "cup", "definition": None, "source": "things", "frequency": 1})
        (tmp_path / "d.jsonl").write_text(row + "\n" + row + "\n")
        with pytest.raises(DictionaryError, match="cup"):
            load_dictionary(tmp_path / "d.jsonl")

    def test_malformed_line_number(self, tmp_path):
        (tmp_path / "d.jsonl").write_text('{"name": "a", "definition": null, "source": "things", "frequency": 1}\n{oops\n')
        with pytest.raises(DictionaryError, match="2"):
            load_dictionary(tmp_path / "d.jsonl")

    def test_empty_file(self, tmp_path):
        (tmp_path / "d.jsonl").write_text("")
        assert len(load_dictionary(tmp_path / "d.jsonl")) == 0


class TestPhrases:
    def test_chunker_example(self):
        assert extract_noun_phrases("a woman, a herding dog and three cattle") == ["woman", "herding dog", "cattle"]

    def test_plural_folding(self):
        assert list(iter_noun_phrases("two dogs and boxes")) == ["dog", "box"]

    def test_only_stopwords(self):
        assert extract_noun_phrases("the the the") == []


class TestLookupAndEnrich:
    def test_lookup_case(self):
        d = make_dict("cup")
        assert lookup(d, "Cup").name == "cup"
        assert lookup(d, "hoverboard") is None
        assert lookup(d, "") is None

    def test_reference_examples(self):
        lex = bundled_lexicon()
        d = make_dict("person", "toothbrush", definitions=lex)
        assert enrich(d, "person") == "person, a human being."
        assert enrich(d, "toothbrush") == "toothbrush, small brush has long handle used to clean teeth."

    def test_fallback_bare_name(self):
        assert enrich(ConceptDictionary(), "widgetx") == "widgetx."

    def test_definition_formatting(self):
        d = make_dict("chair", definitions={"chair": "A seat for one person, with a support for the back."})
        assert enrich(d, "chair") == "chair, a seat for one person, with a support for the back."

    def test_empty_name(self):
        with pytest.raises(ValueError):
            enrich(ConceptDictionary(), " ")

    @given(st.text(alphabet="abcdefgh xyz", min_size=1).filter(lambda s: s.strip() and "," not in s))
    def test_output_shape(self, name):
        d = make_dict("abc", "xyz", definitions={"abc": "first letters", "xyz": "last letters."})
        out = enrich(d, name, HashingProvider(16))
        assert re.match(r"^[^,]+(, .+)?\.$", out)
        assert out.startswith(name.strip())


class TestRetrieval:
    def _dict(self):
        lex = bundled_lexicon()
        return ConceptDictionary(ConceptEntry(n, lex[n], "things", 1)
                                 for n in ("stiletto", "boot", "cup", "mirror", "hotplate", "truck"))

    def test_high_heels_to_stiletto(self, data_dir):
        provider = TableProvider.from_file(data_dir / "retrieval_table.jsonl")
        hit = retrieve_nearest(self._dict(), "High Heels", provider)
        assert hit.matched_name.lower() == "stiletto"
        assert hit.definition == "A woman's shoe with a thin, high tapering heel."
        assert enrich(self._dict(), "High Heels", provider) == "High Heels, a woman's shoe with a thin, high tapering heel."

    def test_other_fixture_queries(self, data_dir):
        provider = TableProvider.from_file(data_dir / "retrieval_table.jsonl")
        assert retrieve_nearest(self._dict(), "makeup mirror", provider).matched_name == "mirror"
        assert retrieve_nearest(self._dict(), "electric stove", provider).matched_name == "hotplate"

    def test_exact(self):
        hit = retrieve_nearest(make_dict("cup"), "cup", HashingProvider())
        assert hit.exact and hit.similarity == 1.0

    def test_tie_break(self):
        provider = TableProvider({"apple": [1, 0], "pear": [1, 0], "fruit": [1, 0]})
        assert retrieve_nearest(make_dict("pear", "apple"), "fruit", provider).matched_name == "apple"

    def test_empty_dictionary(self):
        with pytest.raises(DictionaryError, match="empty dictionary"):
            retrieve_nearest(ConceptDictionary(), "x", HashingProvider())

    @settings(max_examples=40)
    @given(st.integers(1, 50), st.integers(0, 10_000))
    def test_true_argmax(self, n, seed):
        rng = np.random.default_rng(seed)
        names = [f"c{i:02d}" for i in range(n)]
        table = {k: rng.normal(size=4) for k in names + ["query"]}
        provider = TableProvider(table)
        q = table["query"] / np.linalg.norm(table["query"])
        scores = [(float(np.dot(table[k] / np.linalg.norm(table[k]), q)), k) for k in names]
        best = max(scores, key=lambda t: (t[0], [-ord(c) for c in t[1]]))[1]
        assert retrieve_nearest(make_dict(*names), "query", provider).matched_name == best


class TestNegatives:
    def test_forced_set(self):
        d = make_dict("a", "b", "c", "d", "e")
        assert sorted(sample_negatives(d, {"a", "b", "c"}, 2, seed=0)) == ["d", "e"]

    def test_zero(self):
        assert sample_negatives(make_dict("a"), set(), 0, 0) == []

    def test_insufficient(self):
        with pytest.raises(InsufficientNegativesError, match="insufficient negatives"):
            sample_negatives(make_dict("a", "b"), {"a"}, 2, 0)

    @given(st.integers(0, 20), st.integers(0, 100))
    def test_properties(self, k, seed):
        d = make_dict(*[f"n{i}" for i in range(25)])
        pos = {"n1", "n3", "n5"}
        out = sample_negatives(d, pos, k, seed)
        assert len(out) == k == len(set(out)) and not set(out) & pos
        assert out == sample_negatives(d, pos, k, seed)


class TestProviders:
    def test_hashing_unit_and_deterministic(self):
        p = HashingProvider(32)
        v = p.embed("red circle")
        assert v.shape == (32,) and np.linalg.norm(v) == pytest.approx(1.0)
        assert np.array_equal(v, HashingProvider(32).embed("red circle"))

    def test_table_missing_name(self):
        with pytest.raises(ProviderError):
            TableProvider({"a": [1, 0]}).embed("b")

    def _client(self, handler):
        return httpx.Client(transport=httpx.MockTransport(handler))

    def test_http_roundtrip(self):
        def handler(request):
            texts = json.loads(request.content)["texts"]
            return httpx.Response(200, json={"vectors": [[1.0, float(len(t))] for t in texts]})

        p = HttpProvider("http://svc/embed", client=self._client(handler))
        assert p.dim == 2
        assert p.embed("abc") == pytest.approx(np.array([1, 3]) / np.sqrt(10))

    def test_http_non_200(self):
        p_client = self._client(lambda r: httpx.Response(503))
        with pytest.raises(ProviderError, match="503"):
            HttpProvider("http://svc/embed", dim=2, client=p_client).embed("x")

    def test_http_timeout(self):
        def handler(request):
            raise httpx.ReadTimeout("slow", request=request)

        with pytest.raises(ProviderError):
            HttpProvider("http://svc/embed", dim=2, client=self._client(handler)).embed("x")
