import time

import numpy as np
import pytest

from cefr_fcm import CefrLevel, TABLE2_CENTROIDS, level_profile, order_clusters, sj
from cefr_fcm.errors import NoCefrLabelsError, SchemaError
from cefr_fcm.ordering import OrderedFcmModel, load_model, save_model

from helpers import base_model, ordered_model

TABLE2_SJ = (2.70, 9.57, 15.45, 20.38, 24.47, 27.98)


def test_sj_table_rows():
    assert sj(TABLE2_CENTROIDS[0]) == pytest.approx(2.70, abs=0.005)
    assert sj(TABLE2_CENTROIDS[5]) == pytest.approx(27.98, abs=0.005)
    assert sj(np.zeros(9)) == 0.0


def test_shuffled_table_recovers_order():
    perm = np.random.default_rng(0).permutation(6)
    start = time.perf_counter()
    model = ordered_model(TABLE2_CENTROIDS[perm])
    assert time.perf_counter() - start < 1.0
    assert model.sj == pytest.approx(TABLE2_SJ, abs=0.005)
    assert np.array_equal(model.centroids, TABLE2_CENTROIDS)
    assert model.level_names == ("A1", "A2", "B1", "B2", "C1", "C2")
    assert not model.warnings


def test_two_clusters_zeros_first():
    model = ordered_model([[4] * 9, [0] * 9])
    assert model.order == (1, 0)
    assert model.level_names == ("L1", "L2")
    assert not model.has_cefr


def test_tie_is_deterministic_and_warned():
    a = ordered_model([[1, 0] + [0] * 7, [0, 1] + [0] * 7, [3] * 9])
    b = ordered_model([[0, 1] + [0] * 7, [1, 0] + [0] * 7, [3] * 9])
    assert np.array_equal(a.centroids, b.centroids)
    assert a.centroids[0].tolist()[:2] == [0, 1]
    assert any(w.startswith("sj_tie") for w in a.warnings)


def test_identical_centroids_warned():
    model = ordered_model([[2] * 9, [2] * 9])
    assert model.order == (0, 1)
    assert len(model.warnings) == 1


def test_order_invariant_under_common_shift():
    perm = np.random.default_rng(1).permutation(6)
    base = ordered_model(TABLE2_CENTROIDS[perm]).order
    shifted = ordered_model(TABLE2_CENTROIDS[perm] + 0.37).order
    assert base == shifted


def test_level_profile():
    model = ordered_model(TABLE2_CENTROIDS[::-1])
    assert np.array_equal(level_profile(model, "A1"), TABLE2_CENTROIDS[0])
    assert np.array_equal(level_profile(model, CefrLevel.C2), TABLE2_CENTROIDS[5])
    for lvl in CefrLevel:
        prof = level_profile(model, lvl)
        assert np.all((prof >= 0) & (prof <= 4))


def test_level_profile_needs_six_levels():
    with pytest.raises(NoCefrLabelsError):
        level_profile(ordered_model([[0] * 9, [4] * 9]), 1)


def test_memberships_in_level_order():
    perm = np.array([3, 0, 5, 1, 4, 2])
    model = ordered_model(TABLE2_CENTROIDS[perm])
    u = model.memberships(np.array([[0] * 9, [4] * 9]))
    assert np.argmax(u[0]) == 0 and np.argmax(u[1]) == 5


def test_cefr_level_parse():
    assert CefrLevel.parse("b2") is CefrLevel.B2
    assert CefrLevel.parse(3) is CefrLevel.B1
    assert CefrLevel.B1.code == "B1" and CefrLevel.B1.ordinal == 3
    with pytest.raises(ValueError):
        CefrLevel.parse("D1")


def test_persistence_round_trip(tmp_path):
    model = ordered_model(TABLE2_CENTROIDS[[2, 0, 1, 5, 4, 3]])
    path = tmp_path / "model.json"
    save_model(model, path)
    again = load_model(path)
    assert again.order == model.order and again.sj == model.sj
    assert np.array_equal(again.centroids, model.centroids)
    assert again.thresholds == model.thresholds
    save_model(again, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_bare_model_ordered_on_load(tmp_path):
    path = tmp_path / "bare.json"
    save_model(base_model(TABLE2_CENTROIDS[::-1]), path)
    assert np.array_equal(load_model(path).centroids, TABLE2_CENTROIDS)


def test_bad_documents(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[1, 2]")
    with pytest.raises(SchemaError):
        load_model(path)
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_model(path)
    with pytest.raises(SchemaError):
        OrderedFcmModel(base_model(TABLE2_CENTROIDS), (0.0,) * 6, (0, 0, 1, 2, 3, 4))
