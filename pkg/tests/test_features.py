import json
from pathlib import Path

import numpy as np
import pytest

from helpers import FIXTURES, doc_dict, synthetic_table
from salience_lab.corpus import assign_salience, ingest, parse_document
from salience_lab.features import (
    BOOLEAN,
    CATEGORICAL,
    ENTITY_COLUMNS,
    MENTION_COLUMNS,
    OTHER,
    FeatureError,
    Preprocessor,
    build_entity_table,
    build_mention_table,
    ordinal_encode,
    read_table,
    write_table,
)


@pytest.fixture(scope="module")
def corpus():
    docs, _ = ingest(Path(str(FIXTURES)))
    return docs


@pytest.fixture(scope="module")
def fiction(corpus):
    return next(d for d in corpus if d.doc_id == "fix_fiction")


def one_mention_doc():
    d = doc_dict([[("Kim", "PROPN", 2, "nsubj"), ("left", "VERB", 0, "root")]],
                 [{"entity": "kim", "sent": 0, "start": 1, "end": 1}])
    d["summaries"][0]["entities"] = ["kim"]
    return assign_salience(parse_document(json.dumps(d)))


def test_one_mention_one_row_twenty_features():
    t = build_mention_table([one_mention_doc()])
    assert len(t) == 1
    assert len(t.feature_names) == 20
    assert t.y.tolist() == [1]


def test_singleton_entity_matches_its_mention():
    doc = one_mention_doc()
    m = build_mention_table([doc]).data.iloc[0]
    e = build_entity_table([doc]).data.iloc[0]
    for name, _ in MENTION_COLUMNS:
        assert e[name] == m[name], name
    assert e["cluster_size"] == 1


def test_row_conservation(corpus):
    assert len(build_mention_table(corpus)) == sum(len(d.mentions) for d in corpus)
    assert len(build_entity_table(corpus)) == sum(len(d.clusters) for d in corpus)


def test_fiction_values_by_hand(fiction):
    # 39 tokens; cluster sizes susan 2, betsy 5, hamster 5, three singletons
    e = build_entity_table([fiction]).data.set_index("entity_id")
    assert e.loc["hamster", "position_in_doc"] == pytest.approx(3 / 39)
    assert e.loc["hamster", "cluster_size_percentile"] == pytest.approx(5.5 / 6)
    assert e.loc["susan", "cluster_size_percentile"] == pytest.approx(4 / 6)
    assert e.loc["box", "cluster_size_percentile"] == pytest.approx(2 / 6)
    assert e.loc["hamster", "salience"] == 5
    assert e.loc["susan", "salience"] == 3
    assert e.loc["box", "salience"] == 0
    # sentence 0 is Zero (rank 1/3), sentence 1 is Establishment with Susan as Cb (rank 1/3)
    assert e.loc["susan", "mean_cf"] == pytest.approx(1 / 3)
    assert e.loc["susan", "cb_proportion"] == 0.5
    assert e.loc["susan", "mean_transition"] == 6
    assert e.loc["susan", "min_transition"] == 5
    assert e.loc["susan", "edu_depth_percentile"] == 0.0
    assert e.loc["susan", "deprel"] == "nsubj"
    assert e.loc["hamster", "definite"] == 0


def test_two_edu_entity_depths():
    sents = [[("Kim", "PROPN", 2, "nsubj"), ("left", "VERB", 0, "root")],
             [("Kim", "PROPN", 2, "nsubj"), ("rested", "VERB", 0, "root")]]
    edus = [{"id": 1, "start": 1, "end": 2, "relation_coarse": "root", "relation_fine": "root", "parent": None,
             "explicit_dm": False},
            {"id": 2, "start": 3, "end": 4, "relation_coarse": "joint", "relation_fine": "joint", "parent": 1,
             "explicit_dm": True}]
    ms = [{"entity": "kim", "sent": 1, "start": 1, "end": 1, "id": "late"},
          {"entity": "kim", "sent": 0, "start": 1, "end": 1, "id": "early"}]
    d = doc_dict(sents, ms, edus=edus)
    d["entities"] = [{"entity_id": "kim", "mentions": ["early", "late"]}]
    doc = assign_salience(parse_document(json.dumps(d)))
    row = build_entity_table([doc]).data.iloc[0]
    assert row["min_depth_percentile"] == 0.0
    assert row["edu_depth_percentile"] == 0.0
    assert row["explicit_proportion"] == 0.5


def test_rare_levels_collapse(corpus):
    t = build_mention_table(corpus)
    counts = t.data["deprel"].value_counts()
    rare = counts[counts == 2].index[0]
    out = Preprocessor(threshold=300).fit_transform(t)
    assert set(out.data["deprel"]) == {OTHER}
    pre = Preprocessor(threshold=3).fit(t)
    assert pre._map_level("deprel", rare) == OTHER


def test_threshold_zero_keeps_inventory(corpus):
    t = build_mention_table(corpus)
    out = Preprocessor(threshold=0).fit_transform(t)
    for c in t.columns:
        if c.kind == CATEGORICAL:
            assert out.data[c.name].tolist() == t.data[c.name].tolist()
            assert sorted(out.spec(c.name).levels) == sorted(set(t.data[c.name]))


def test_z_scaling_and_inverse(corpus):
    t = build_mention_table(corpus)
    train = t.subset("train")
    pre = Preprocessor(threshold=0).fit(train)
    scaled = pre.transform(train)
    for name, (mean, sd) in pre.scaling.items():
        col = scaled.data[name].to_numpy()
        if train.data[name].std(ddof=1) > 0:
            assert col.mean() == pytest.approx(0, abs=1e-9)
            assert col.std(ddof=1) == pytest.approx(1, abs=1e-9)
        assert scaled.spec(name).mean == mean and scaled.spec(name).sd == sd
    back = pre.inverse_scale(scaled)
    for name in pre.scaling:
        assert np.allclose(back.data[name], train.data[name], atol=1e-9, rtol=0)


def test_scaling_is_frozen_for_other_partitions(corpus):
    t = build_mention_table(corpus)
    pre = Preprocessor(threshold=3).fit(t.subset("train"))
    test = pre.transform(t.subset("test"))
    mean, sd = pre.scaling["position_in_doc"]
    raw = t.subset("test").data["position_in_doc"].to_numpy()
    assert np.allclose(test.data["position_in_doc"], (raw - mean) / sd)


def test_unseen_level_is_kept_verbatim():
    t = synthetic_table({"c": ["a"] * 3 + ["b"]}, [0, 1, 2, 3])
    pre = Preprocessor(threshold=2).fit(t)
    other = synthetic_table({"c": ["a", "b", "zzz"]}, [0, 0, 0])
    assert pre.transform(other).data["c"].tolist() == ["a", OTHER, "zzz"]


def test_preprocessor_round_trip(corpus):
    pre = Preprocessor(threshold=3).fit(build_mention_table(corpus).subset("train"))
    again = Preprocessor.from_dict(json.loads(json.dumps(pre.to_dict())))
    assert again == pre


def test_ordinal_encoding(corpus):
    t = ordinal_encode(build_entity_table(corpus))
    v = t.data["min_transition"].to_numpy()
    for k in range(2, 8):
        assert (t.data[f"min_transition>={k}"].to_numpy() == (v >= k)).all()
        assert t.spec(f"min_transition>={k}").kind == BOOLEAN


def test_missing_salience_is_an_error():
    d = doc_dict([[("Kim", "PROPN", 0, "root")]], [{"entity": "kim", "sent": 0, "start": 1, "end": 1}])
    with pytest.raises(FeatureError, match="salience"):
        build_mention_table([parse_document(json.dumps(d))])


def test_mention_outside_edus_names_mention():
    d = doc_dict([[("Kim", "PROPN", 0, "root"), ("x", "X", 1, "dep")]],
                 [{"entity": "kim", "sent": 0, "start": 2, "end": 2, "id": "mk"}],
                 edus=[{"id": 1, "start": 1, "end": 1, "relation_coarse": "root", "relation_fine": "root",
                        "parent": None, "explicit_dm": False}])
    doc = assign_salience(parse_document(json.dumps(d)))
    with pytest.raises(FeatureError, match="mk"):
        build_mention_table([doc])


def test_csv_schema_round_trip(tmp_path, corpus):
    t = build_entity_table(corpus)
    path = tmp_path / "entity.csv"
    write_table(t, path, provenance={"seed": 1})
    assert path.read_text().startswith("# seed: 1\n")
    back = read_table(path)
    assert back.schema() == t.schema()
    assert back.feature_names == [n for n, _ in ENTITY_COLUMNS]
    for name in t.feature_names:
        if t.spec(name).kind == CATEGORICAL:
            assert back.data[name].tolist() == t.data[name].tolist()
        else:
            assert np.allclose(back.data[name].astype(float), t.data[name].astype(float), rtol=1e-9)
    assert back.schema_hash() == t.schema_hash()
