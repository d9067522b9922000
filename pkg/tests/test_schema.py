"""Schema inference, merging, validation, and serialization."""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from hmil.generators import random_document, random_schema
from hmil.schema import (
    Bag,
    CategoricalLeaf,
    NumericLeaf,
    Product,
    SchemaConflict,
    SchemaError,
    StringLeaf,
    dumps_schema,
    infer_schema,
    loads_schema,
    merge_schemas,
    structurally_equal,
    validate,
)

DATA = Path(__file__).parent / "data"


@pytest.fixture()
def fitness_doc():
    return json.loads((DATA / "fitness_week.json").read_text())


def assert_schemas_close(a, b, rtol=1e-9):
    """Equal shape and counts, numeric statistics equal up to round-off."""
    assert a.kind == b.kind
    assert a.count == b.count
    if isinstance(a, NumericLeaf):
        np.testing.assert_allclose(a.mean, b.mean, rtol=rtol, atol=1e-12)
        np.testing.assert_allclose(a.std, b.std, rtol=rtol, atol=1e-12)
    elif isinstance(a, StringLeaf):
        assert (a.ngram_n, a.hash_dim) == (b.ngram_n, b.hash_dim)
    elif isinstance(a, CategoricalLeaf):
        assert a.values == b.values
    elif isinstance(a, Bag):
        assert_schemas_close(a.child, b.child, rtol)
    elif isinstance(a, Product):
        assert a.field_names == b.field_names
        for fa, fb in zip(a.fields, b.fields):
            assert fa.optional == fb.optional
            assert_schemas_close(fa.schema, fb.schema, rtol)


class TestLeafInference:
    def test_single_number(self):
        assert infer_schema([5]) == NumericLeaf(count=1, mean=5.0, std=0.0)

    def test_running_stats_over_three_docs(self):
        s = infer_schema([1, 2, 3])
        assert s.count == 3
        np.testing.assert_allclose(s.mean, 2.0, rtol=1e-12)
        # population std of {1, 2, 3}
        np.testing.assert_allclose(s.std, math.sqrt(2.0 / 3.0), rtol=1e-12)

    def test_bool_counts_as_numeric(self):
        s = infer_schema([True, False])
        assert isinstance(s, NumericLeaf)
        np.testing.assert_allclose(s.mean, 0.5, rtol=1e-12)
        np.testing.assert_allclose(s.std, 0.5, rtol=1e-12)

    def test_small_string_vocab_is_categorical(self):
        s = infer_schema(["red", "green", "red"])
        assert s == CategoricalLeaf(count=3, values=("green", "red"))
        assert s.index("red") == 1
        assert s.index("blue") is None

    def test_vocab_over_threshold_becomes_string_leaf(self):
        docs = [f"v{i:02d}" for i in range(40)]
        s = infer_schema(docs, categorical_threshold=32)
        assert s == StringLeaf(count=40, ngram_n=3, hash_dim=64)

    def test_vocab_at_threshold_stays_categorical(self):
        docs = [f"v{i:02d}" for i in range(32)]
        s = infer_schema(docs, categorical_threshold=32)
        assert isinstance(s, CategoricalLeaf)
        assert len(s.values) == 32

    def test_nonfinite_number_rejected(self):
        with pytest.raises(SchemaConflict):
            infer_schema([float("nan")])

    def test_null_scalar_rejected(self):
        with pytest.raises(SchemaConflict):
            infer_schema([None])


class TestObjectAndArrayInference:
    def test_disjoint_fields_come_out_optional(self):
        s = infer_schema([{"a": 1}, {"b": 2}])
        assert isinstance(s, Product)
        assert s.count == 2
        assert s.field_names == ("a", "b")
        assert all(f.optional for f in s.fields)

    def test_field_in_every_doc_is_required(self):
        s = infer_schema([{"a": 1}, {"a": 2}])
        assert s.field("a").optional is False

    def test_null_valued_field_counts_as_absent(self):
        s = infer_schema([{"a": 1, "b": None}, {"a": 2}])
        assert s.field_names == ("a",)

    def test_conflict_names_the_field_path(self):
        with pytest.raises(SchemaConflict) as exc:
            infer_schema([{"a": 1}, {"a": "x"}])
        assert exc.value.path == "$.a"

    def test_conflict_names_the_array_index(self):
        with pytest.raises(SchemaConflict) as exc:
            infer_schema([[1, "x"]])
        assert exc.value.path == "$[1]"

    def test_empty_corpus(self):
        with pytest.raises(SchemaError, match="empty corpus"):
            infer_schema([])

    def test_always_empty_array_is_diagnosed(self):
        with pytest.raises(SchemaError, match=r"\$\.xs"):
            infer_schema([{"xs": []}, {"xs": []}])

    def test_unknown_path_inside_nested_arrays(self):
        with pytest.raises(SchemaError, match=r"\$\.a\[\]\[\]"):
            infer_schema([{"a": [[]]}])

    def test_array_seen_empty_then_full(self):
        s = infer_schema([{"xs": []}, {"xs": [1.0, 2.0]}])
        child = s.field("xs").schema
        assert isinstance(child, Bag)
        assert isinstance(child.child, NumericLeaf)
        assert child.count == 2


class TestFitnessWeek:
    def test_structure_with_raw_string_leaves(self, fitness_doc):
        s = infer_schema([fitness_doc], categorical_threshold=0)
        assert isinstance(s, Product)
        assert s.field_names == ("weekNumber", "workouts")
        assert isinstance(s.field("weekNumber").schema, StringLeaf)

        workouts = s.field("workouts").schema
        assert isinstance(workouts, Bag)
        workout = workouts.child
        assert isinstance(workout, Product)
        assert workout.field_names == ("avgPace", "calories", "distance",
                                       "duration", "speedData", "sport")
        assert workout.count == 2
        assert isinstance(workout.field("sport").schema, StringLeaf)
        for name in ("avgPace", "calories", "distance", "duration"):
            assert isinstance(workout.field(name).schema, NumericLeaf)
            assert workout.field(name).optional is False

    def test_speed_data_optional_one_of_two(self, fitness_doc):
        s = infer_schema([fitness_doc], categorical_threshold=0)
        speed_field = s.field("workouts").schema.child.field("speedData")
        assert speed_field.optional is True
        speed = speed_field.schema
        assert isinstance(speed, Product)
        assert speed.field_names == ("altitude", "labels", "speed")
        assert speed.count == 1
        for name in ("altitude", "speed"):
            inner = speed.field(name).schema
            assert isinstance(inner, Bag)
            assert isinstance(inner.child, NumericLeaf)
        labels = speed.field("labels").schema
        assert isinstance(labels, Bag)
        assert isinstance(labels.child, StringLeaf)

    def test_default_threshold_keeps_small_vocabs_categorical(self, fitness_doc):
        s = infer_schema([fitness_doc])
        assert s.field("weekNumber").schema == CategoricalLeaf(
            count=1, values=("39",))
        sport = s.field("workouts").schema.child.field("sport").schema
        assert sport == CategoricalLeaf(count=2,
                                        values=("running", "swimming"))
        raw = infer_schema([fitness_doc], categorical_threshold=0)
        assert not structurally_equal(s, raw)  # leaf kinds differ
        assert s.field_names == raw.field_names


def _doc_schema(doc):
    try:
        return infer_schema([doc])
    except SchemaError:
        return None


class TestMerge:
    def test_merge_with_self_doubles_counts(self):
        s = infer_schema([1, 2, 3])
        m = merge_schemas(s, s)
        assert m.count == 6
        assert m.mean == 2.0
        np.testing.assert_allclose(m.std, s.std, rtol=1e-12)

    def test_merge_matches_single_pass_inference(self):
        d1, d2 = {"a": 1, "c": "x"}, {"a": 2, "b": [3.5]}
        assert merge_schemas(infer_schema([d1]), infer_schema([d2])) \
            == infer_schema([d1, d2])

    def test_vocabularies_union_sorted(self):
        m = merge_schemas(infer_schema(["b"]), infer_schema(["a", "c"]))
        assert m == CategoricalLeaf(count=3, values=("a", "b", "c"))

    def test_kind_conflict_raises(self):
        with pytest.raises(SchemaConflict):
            merge_schemas(infer_schema([1]), infer_schema([[1]]))

    @given(st.integers(0, 2**32 - 1))
    def test_commutes_exactly(self, seed):
        rng = np.random.default_rng(seed)
        base = random_schema(rng, max_depth=2)
        a = _doc_schema(random_document(rng, base))
        b = _doc_schema(random_document(rng, base))
        assume(a is not None and b is not None)
        assert merge_schemas(a, b) == merge_schemas(b, a)

    @given(st.integers(0, 2**32 - 1))
    def test_associates_up_to_round_off(self, seed):
        rng = np.random.default_rng(seed)
        base = random_schema(rng, max_depth=2)
        schemas = [_doc_schema(random_document(rng, base)) for _ in range(3)]
        assume(all(s is not None for s in schemas))
        a, b, c = schemas
        left = merge_schemas(merge_schemas(a, b), c)
        right = merge_schemas(a, merge_schemas(b, c))
        assert structurally_equal(left, right)
        assert_schemas_close(left, right)


class TestValidate:
    def test_clean_document_round_trip(self, fitness_doc):
        for threshold in (0, 32):
            s = infer_schema([fitness_doc], categorical_threshold=threshold)
            assert validate(fitness_doc, s) == []

    def test_wrong_kind_at_nested_path(self, fitness_doc):
        s = infer_schema([fitness_doc], categorical_threshold=0)
        bad = {"weekNumber": "39", "workouts": 3}
        violations = validate(bad, s)
        assert len(violations) == 1
        assert violations[0].path == "$.workouts"
        assert violations[0].expected == "array"

    def test_missing_required_field(self, fitness_doc):
        s = infer_schema([fitness_doc], categorical_threshold=0)
        bad = {"workouts": fitness_doc["workouts"]}
        assert [v.path for v in validate(bad, s)] == ["$.weekNumber"]

    def test_missing_optional_field_is_fine(self, fitness_doc):
        s = infer_schema([fitness_doc], categorical_threshold=0)
        doc = json.loads(json.dumps(fitness_doc))
        for workout in doc["workouts"]:
            workout.pop("speedData", None)
        assert validate(doc, s) == []

    def test_explicit_null_equals_missing(self, fitness_doc):
        s = infer_schema([fitness_doc], categorical_threshold=0)
        doc = json.loads(json.dumps(fitness_doc))
        doc["workouts"][0]["speedData"] = None   # optional: fine
        assert validate(doc, s) == []
        doc["weekNumber"] = None                 # required: violation
        assert [v.path for v in validate(doc, s)] == ["$.weekNumber"]

    def test_unexpected_field(self, fitness_doc):
        s = infer_schema([fitness_doc], categorical_threshold=0)
        doc = json.loads(json.dumps(fitness_doc))
        doc["extra"] = 1
        assert [v.path for v in validate(doc, s)] == ["$.extra"]

    def test_unseen_categorical_value_is_fine(self, fitness_doc):
        s = infer_schema([fitness_doc])  # sport is categorical here
        doc = json.loads(json.dumps(fitness_doc))
        doc["workouts"][0]["sport"] = "rowing"
        assert validate(doc, s) == []

    def test_nonfinite_number_is_a_violation(self):
        s = infer_schema([{"a": 1.0}])
        assert [v.path for v in validate({"a": float("inf")}, s)] == ["$.a"]

    @given(st.integers(0, 2**32 - 1))
    def test_generated_documents_validate_against_inferred_schema(self, seed):
        rng = np.random.default_rng(seed)
        base = random_schema(rng, max_depth=3)
        docs = [random_document(rng, base) for _ in range(30)]
        try:
            s = infer_schema(docs)
        except SchemaError:
            assume(False)  # some array stayed empty in all 30 draws
        for doc in docs:
            assert validate(doc, s) == []


class TestSerialization:
    def test_round_trip_identity(self, fitness_doc):
        for docs in ([fitness_doc], [1, 2, 3], [{"a": ["x", "y"]}]):
            s = infer_schema(docs, categorical_threshold=0)
            assert loads_schema(dumps_schema(s)) == s

    def test_canonical_form_is_sorted_and_versioned(self, fitness_doc):
        text = dumps_schema(infer_schema([fitness_doc]))
        assert '"schema_version":1' in text
        parsed = json.loads(text)
        assert text == json.dumps(parsed, sort_keys=True,
                                  separators=(",", ":"))
        assert dumps_schema(infer_schema([fitness_doc])) == text

    def test_version_mismatch_rejected(self):
        text = dumps_schema(infer_schema([1.5]))
        bad = text.replace('"schema_version":1', '"schema_version":99')
        with pytest.raises(SchemaError, match="schema_version"):
            loads_schema(bad)

    def test_garbage_rejected(self):
        with pytest.raises(SchemaError):
            loads_schema("not json at all")
        with pytest.raises(SchemaError):
            loads_schema("[1,2,3]")

    def test_structural_equality_ignores_statistics(self):
        a = infer_schema([1.0, 2.0])
        b = infer_schema([100.0])
        assert structurally_equal(a, b)
        assert not structurally_equal(infer_schema(["x"]),
                                      infer_schema(["y"]))
