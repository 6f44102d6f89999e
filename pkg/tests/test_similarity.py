import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from crowdsim.domain import DomainError, Task
from crowdsim.similarity import (
    Corpus,
    DistanceVector,
    Normalizer,
    SimilarityIndex,
    cosine,
    distance_vector,
    idf,
    pool_similarity,
    task_similarity,
    tech_match,
    tf,
    tfidf_from_parts,
    tfidf_weight,
    tokenize,
)


@pytest.mark.parametrize(
    "text, tokens",
    [("", []), ("Build THE API build", ["build", "api", "build"]), ("UI-prototype, UI!", ["ui", "prototype", "ui"])],
)
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def _corpus():
    return Corpus.from_tokens({"a": ["x", "y"], "b": ["y"], "c": ["y", "z"]})


def test_idf():
    c = _corpus()
    assert idf("x", c) == 3.0
    assert idf("y", c) == 1.0
    with pytest.raises(DomainError):
        idf("nope", c)


def test_tf():
    doc = ["a", "a", "b", "b", "b", "b"]
    assert tf("a", doc) == 0.5
    assert tf("b", doc) == 1.0
    assert tf("q", doc) == 0.0
    with pytest.raises(DomainError):
        tf("a", [])


def test_tfidf_hand_value():
    expected = math.log10(3) / (12 + math.log10(6))
    assert tfidf_from_parts(3.0, 0.5) == pytest.approx(expected, abs=1e-12)
    assert round(expected, 5) == 0.03734
    assert tfidf_from_parts(1.0, 0.7) == 0.0
    assert tfidf_from_parts(3.0, 0.0) == 0.0


def test_tfidf_weight_absent_term_is_zero():
    c = _corpus()
    assert tfidf_weight("z", ["x", "y"], c) == 0.0
    assert tfidf_weight("x", ["x", "y"], c) == pytest.approx(math.log10(3) / (12 + math.log10(12)))


def test_award_normalization_and_repost_max():
    norm = Normalizer({"award": 150.0, "reg_start": 0.0, "sub_deadline": 0.0, "requirement": 0.0},
                      {"award": 3000.0, "reg_start": 0.0, "sub_deadline": 0.0, "requirement": 0.0})
    t = Task("T", "P", 0.0, 5.0, award=500.0)
    r = Task("T-R1", "P", 5.0, 10.0, award=750.0, repost_of="T")
    v = distance_vector(t, [t, r], norm)
    assert v.raw["award"] == 750.0
    assert v.award == pytest.approx(600 / 2850, abs=1e-9)
    assert round(v.award, 4) == 0.2105
    # degenerate min == max gives 0
    assert v.reg_start == 0.0
    with pytest.raises(DomainError):
        distance_vector(t, [], norm)


@pytest.mark.parametrize(
    "u, v, expected",
    [((1, 0, 1), (1, 1, 0), 0.5), ((1, 0, 0), (0, 1, 0), 0.0), ((2, 3, 4), (2, 3, 4), 1.0), ((0, 0), (1, 1), 0.0)],
)
def test_cosine(u, v, expected):
    assert cosine(u, v) == pytest.approx(expected, abs=1e-12)


def _vec(tid, *nums, tt="Code", techs=("java",)):
    return DistanceVector(tid, *nums, task_type=tt, technologies=frozenset(techs))


def test_task_similarity_identity_and_symmetry():
    a = _vec("a", 0.2, 0.3, 0.4, 0.1)
    b = _vec("b", 0.9, 0.0, 0.7, 0.5, tt="Design", techs=("sql",))
    assert task_similarity(a, _vec("a2", 0.2, 0.3, 0.4, 0.1)) == pytest.approx(1.0)
    assert task_similarity(a, b) == pytest.approx(task_similarity(b, a))


def test_pool_similarity():
    a = _vec("a", 0.2, 0.3, 0.4, 0.1)
    assert pool_similarity([], a) == 0.0
    assert pool_similarity([_vec("copy", 0.2, 0.3, 0.4, 0.1)], a) == pytest.approx(1.0)


def test_pool_mean_of_pair_scores():
    a = _vec("a", 1.0, 0.0, 0.0, 0.0)
    b = _vec("b", 0.5, 0.2, 0.1, 0.9)
    c = _vec("c", 0.0, 1.0, 0.3, 0.2, techs=("sql",))
    expected = (task_similarity(a, b) + task_similarity(a, c)) / 2
    assert pool_similarity([b, c], a) == pytest.approx(expected, abs=1e-12)


def test_tech_match_modes():
    a, b = frozenset({"x", "y"}), frozenset({"y", "z"})
    assert tech_match(a, b) == pytest.approx(1 / 3)
    assert tech_match(a, b, "binary") == 0.0
    assert tech_match(frozenset(), frozenset()) == 1.0


vectors = st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=3, max_size=3)


@given(vectors, vectors)
def test_cosine_bounded_and_symmetric(u, v):
    s = cosine(u, v)
    assert -1.0 - 1e-12 <= s <= 1.0
    assert s == pytest.approx(cosine(v, u), abs=1e-12)


def test_index_over_history(history_dir):
    from crowdsim.history import load_history

    tables = load_history(history_dir)
    index = SimilarityIndex(tables.tasks.values())
    ids, rows = index.matrix()
    assert ids == ["T1", "T2", "T3"]
    for i in range(3):
        assert rows[i][i] == pytest.approx(1.0)
        for j in range(3):
            assert 0.0 <= rows[i][j] <= 1.0
            assert rows[i][j] == pytest.approx(rows[j][i])
    assert index.similarity("T1", "T2") > index.similarity("T1", "T3")
