import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cefr_fcm import FcmConfig, FcmModel, TABLE2_CENTROIDS, fit, grid_search, memberships, memberships_batch, synthesize
from cefr_fcm.errors import InfeasibleError, SchemaError
from cefr_fcm.fcm import membership_matrix

import oracles


def test_two_points_one_dimension():
    model = fit(np.array([[0.0], [4.0]]), FcmConfig(k=2, m=1.5))
    assert sorted(model.centroids.ravel()) == pytest.approx([0.0, 4.0], abs=1e-3)
    assert model.converged


def test_identical_rows_single_cluster():
    x = np.tile([1, 2, 3, 0, 4, 2, 1, 1, 0], (7, 1))
    model = fit(x, FcmConfig(k=1))
    assert np.array_equal(model.centroids[0], x[0])
    assert model.objective == 0.0


def test_identical_rows_flagged_degenerate():
    x = np.tile([2] * 9, (10, 1))
    model = fit(x, FcmConfig(k=3))
    assert model.degenerate
    assert np.allclose(model.centroids, 2.0)


def test_fewer_rows_than_clusters():
    with pytest.raises(InfeasibleError):
        fit(np.zeros((3, 9)), FcmConfig(k=6))


def test_membership_against_formula():
    centroids = np.array([[0.0], [4.0]])
    u = membership_matrix(np.array([[1.0]]), centroids, 2.0)[0]
    assert u == pytest.approx([0.9, 0.1], abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, (4, 3), elements=st.integers(0, 4000).map(lambda v: v / 1000)),
    arrays(np.float64, (3,), elements=st.integers(0, 4000).map(lambda v: v / 1000)),
    st.sampled_from([1.2, 1.5, 2.0, 2.5]),
)
def test_membership_matches_oracle(centroids, point, m):
    got = membership_matrix(point[None, :], centroids, m)[0]
    want = oracles.memberships(point.tolist(), centroids.tolist(), m)
    assert got.sum() == pytest.approx(1.0, abs=1e-9)
    assert got == pytest.approx(want, abs=1e-9)


def test_equidistant_point_gets_equal_memberships():
    centroids = np.array([[0.0, 0.0], [2.0, 0.0], [50.0, 50.0]])
    u = membership_matrix(np.array([[1.0, 0.0]]), centroids, 1.5)[0]
    assert u[0] == pytest.approx(u[1], abs=1e-15)


def test_point_on_centroid_is_one_hot():
    centroids = np.array([[0.0] * 9, [2.0] * 9, [4.0] * 9])
    u = membership_matrix(np.array([[2.0] * 9]), centroids, 1.5)[0]
    assert u.tolist() == [0.0, 1.0, 0.0]


def test_coincident_centroids_share_mass():
    centroids = np.array([[1.0], [1.0], [3.0]])
    u = membership_matrix(np.array([[1.0]]), centroids, 2.0)[0]
    assert u.tolist() == [0.5, 0.5, 0.0]


def test_far_point_stays_finite():
    u = membership_matrix(np.array([[1e6] * 9]), TABLE2_CENTROIDS, 1.1)[0]
    assert np.all(np.isfinite(u)) and u.sum() == pytest.approx(1.0)


@pytest.fixture(scope="module")
def small_fit(small_corpus):
    return fit(small_corpus.data, FcmConfig(seed=3))


def test_objective_non_increasing(small_fit):
    hist = np.array(small_fit.objective_history)
    assert np.all(np.diff(hist) <= 1e-9 * hist[0])


def test_rows_sum_to_one(small_fit):
    assert np.allclose(small_fit.memberships.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(small_fit.memberships >= 0)


def test_centroids_inside_hull(small_fit, small_corpus):
    x = small_corpus.data.as_float()
    assert np.all(small_fit.centroids >= x.min(axis=0) - 1e-9)
    assert np.all(small_fit.centroids <= x.max(axis=0) + 1e-9)


def test_batch_matches_training_memberships(small_fit, small_corpus):
    u = memberships_batch(small_fit, small_corpus.data)
    assert np.max(np.abs(u - small_fit.memberships)) < 1e-9


def test_single_and_batch_agree(small_fit):
    point = [1, 2, 2, 1, 3, 2, 2, 1, 2]
    assert np.array_equal(memberships(small_fit, point), memberships_batch(small_fit, np.array([point]))[0])


def test_empty_batch(small_fit):
    assert memberships_batch(small_fit, np.zeros((0, 9))).shape == (0, 6)


def test_fit_deterministic(small_corpus):
    a = fit(small_corpus.data, FcmConfig(seed=5))
    b = fit(small_corpus.data, FcmConfig(seed=5))
    assert np.array_equal(a.centroids, b.centroids)


def test_row_permutation_equivariance(small_corpus):
    """Same starting centroids on permuted rows reach the same centroids."""
    x = small_corpus.data.as_float()
    init = x[[0, 100, 200, 300, 400, 500]]
    a = fit(x, FcmConfig(seed=0), init_centroids=init)
    perm = np.random.default_rng(1).permutation(len(x))
    b = fit(x[perm], FcmConfig(seed=0), init_centroids=init)
    assert np.allclose(a.centroids, b.centroids, atol=1e-6)
    assert np.allclose(a.memberships[perm], b.memberships, atol=1e-6)


def test_random_membership_init(small_corpus):
    model = fit(small_corpus.data, FcmConfig(init="random_membership", seed=2))
    assert model.converged and model.k == 6


def test_max_iter_reports_not_converged(small_corpus):
    model = fit(small_corpus.data, FcmConfig(max_iter=2, epsilon=1e-12))
    assert not model.converged and model.iterations_used == 2


@pytest.mark.parametrize("kwargs", [{"k": 0}, {"m": 1.0}, {"epsilon": 0}, {"max_iter": 0}, {"init": "kmeans"}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        FcmConfig(**kwargs)


def test_model_dict_round_trip(small_fit):
    again = FcmModel.from_dict(small_fit.to_dict())
    assert np.array_equal(again.centroids, small_fit.centroids)
    assert again.config == small_fit.config
    with pytest.raises(SchemaError):
        FcmModel.from_dict({"format": "other"})


def test_grid_single_cell(small_corpus):
    res = grid_search(small_corpus.data, [2.0], [1e-4])
    assert len(res.cells) == 1 and res.selected is res.cells[0]
    assert res.selected_config(FcmConfig()).m == 2.0


def test_grid_default_shape(small_corpus):
    res = grid_search(small_corpus.data)
    assert len(res.cells) == 9
    assert sum(c.selected for c in res.cells) == 1


def test_smaller_m_is_crisper():
    rng = np.random.default_rng(0)
    blobs = np.vstack([rng.normal(c, 0.2, size=(60, 2)) for c in ([0, 0], [5, 0], [0, 5])])
    from cefr_fcm.metrics import fpc

    crisp = fpc(fit(blobs, FcmConfig(k=3, m=1.5, seed=0)).memberships)
    soft = fpc(fit(blobs, FcmConfig(k=3, m=2.5, seed=0)).memberships)
    assert crisp >= soft


def test_grid_smaller_m_has_higher_fpc():
    data = synthesize(TABLE2_CENTROIDS[[0, 5]], per_cluster_n=100, noise_sd=0.3, seed=1).data
    res = grid_search(data, [1.5, 2.5], [1e-4], k=2)
    assert res.cells[0].fpc >= res.cells[1].fpc
