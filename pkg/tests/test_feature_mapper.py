import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import pdist, squareform

from kitsune.feature_mapper import CorrSummary, FeatureMap, NotReadyError, build_dendrogram, cluster
from oracles import running_residuals, uncentered_corr_distance


def summarize(X):
    s = CorrSummary(X.shape[1])
    for x in X:
        s.update(x)
    return s


class TestCorrSummary:
    def test_first_update_has_zero_residuals(self):
        s = CorrSummary(3)
        s.update([1.0, -2.0, 7.5])
        assert s.n_t == 1
        assert np.all(s.C == 0) and np.all(s.c_rs == 0)
        assert np.array_equal(s.c, [1.0, -2.0, 7.5])

    def test_diagonal_equals_squared_residuals(self):
        s = summarize(np.random.default_rng(0).normal(size=(50, 4)))
        assert np.allclose(np.diag(s.C), s.c_rs, rtol=0, atol=1e-12)
        assert np.allclose(s.C, s.C.T)

    def test_rejects_bad_input(self):
        s = CorrSummary(2)
        with pytest.raises(ValueError):
            s.update([1.0])
        with pytest.raises(ValueError):
            s.update([1.0, np.nan])

    def test_not_ready(self):
        s = CorrSummary(2)
        s.update([1.0, 2.0])
        with pytest.raises(NotReadyError):
            s.distance_matrix()

    def test_identical_features_distance_zero(self):
        col = np.random.default_rng(1).normal(size=100)
        D = summarize(np.column_stack([col, col])).distance_matrix()
        assert D[0, 1] == pytest.approx(0.0, abs=1e-9)

    def test_opposite_features_distance_two(self):
        col = np.random.default_rng(2).normal(size=100)
        D = summarize(np.column_stack([col, -col])).distance_matrix()
        assert D[0, 1] == pytest.approx(2.0, abs=1e-9)

    def test_independent_features_near_one(self):
        X = np.random.default_rng(3).normal(size=(10_000, 5))
        D = summarize(X).distance_matrix()
        off = D[~np.eye(5, dtype=bool)]
        assert np.all(np.abs(off - 1.0) < 0.15)

    def test_constant_feature(self):
        rng = np.random.default_rng(4)
        X = np.column_stack([rng.normal(size=30), np.full(30, 3.0), rng.normal(size=30)])
        D = summarize(X).distance_matrix()
        assert D[1, 0] == D[1, 2] == D[0, 1] == 1.0
        assert np.all(np.diag(D) == 0)

    def test_close_to_batch_correlation(self):
        # running-mean residuals converge to the batch definition
        rng = np.random.default_rng(5)
        z = rng.normal(size=(5000, 2))
        X = np.column_stack([z[:, 0], z[:, 0] + 0.5 * z[:, 1], z[:, 1]])
        D = summarize(X).distance_matrix()
        batch = squareform(pdist(X.T, "correlation"))
        assert np.allclose(D, batch, atol=0.02)

    def test_memory_independent_of_stream_length(self):
        rng = np.random.default_rng(6)
        s = CorrSummary(8)
        sizes = []
        for rows in (10, 1000):
            for x in rng.normal(size=(rows, 8)):
                s.update(x)
            sizes.append(sum(a.nbytes for a in (s.c, s.c_r, s.c_rs, s.C)))
        assert sizes[0] == sizes[1]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rows=st.integers(3, 200), n=st.integers(2, 12))
def test_distance_matches_replay_oracle(seed, rows, n):
    rng = np.random.default_rng(seed)
    latent = rng.normal(size=(rows, 2))
    X = latent @ rng.normal(size=(2, n)) + 0.3 * rng.normal(size=(rows, n)) + rng.normal(0, 5, n)
    D = summarize(X).distance_matrix()
    ref = uncentered_corr_distance(running_residuals(X))
    assert np.allclose(D, ref, rtol=0, atol=1e-6)


def random_distance(rng, n):
    P = rng.normal(size=(n, 3))
    D = squareform(pdist(P))
    return D / D.max() * 2 if n > 1 else D


class TestCluster:
    def test_m_equals_n_gives_one_group(self):
        D = random_distance(np.random.default_rng(0), 9)
        fmap = cluster(D, 9)
        assert fmap.k == 1 and fmap.groups[0] == tuple(range(9))

    def test_m_one_gives_singletons(self):
        D = random_distance(np.random.default_rng(1), 7)
        assert cluster(D, 1).groups == tuple((i,) for i in range(7))

    def test_two_correlated_pairs(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=(2, 500))
        X = np.column_stack([a, b, a, b])
        D = summarize(X).distance_matrix()
        assert D[0, 2] < 1e-9 and D[1, 3] < 1e-9
        assert min(D[0, 1], D[0, 3], D[2, 1], D[2, 3]) > 0.5
        assert cluster(D, 2).groups == ((0, 2), (1, 3))

    def test_single_feature(self):
        assert cluster(np.zeros((1, 1)), 1).groups == ((0,),)

    def test_invalid_m(self):
        with pytest.raises(ValueError):
            cluster(np.zeros((3, 3)), 0)
        with pytest.raises(ValueError):
            cluster(np.zeros((3, 3)), 4)

    def test_ties_break_by_lowest_index(self):
        D = np.ones((4, 4)) - np.eye(4)
        nodes = build_dendrogram(D)
        assert nodes[4][3] == (0, 1)
        assert nodes[5][3] == (0, 1, 2)
        assert cluster(D, 3).groups == ((0, 1, 2), (3,))

    def test_deterministic(self):
        D = random_distance(np.random.default_rng(3), 30)
        assert cluster(D, 5) == cluster(D.copy(), 5)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40))
    def test_heights_match_scipy_single_linkage(self, seed, n):
        D = random_distance(np.random.default_rng(seed), n)
        ours = sorted(node[2] for node in build_dendrogram(D)[n:])
        ref = sorted(linkage(squareform(D, checks=False), "single")[:, 2])
        assert np.allclose(ours, ref, rtol=0, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 30), data=st.data())
    def test_partition_property(self, seed, n, data):
        rng = np.random.default_rng(seed)
        A = rng.uniform(0, 2, (n, n))
        D = (A + A.T) / 2
        np.fill_diagonal(D, 0)
        m = data.draw(st.integers(1, n))
        fmap = cluster(D, m)
        flat = sorted(i for g in fmap.groups for i in g)
        assert flat == list(range(n))
        assert all(1 <= len(g) <= m for g in fmap.groups)
        assert [g[0] for g in fmap.groups] == sorted(g[0] for g in fmap.groups)


class TestFeatureMap:
    def test_map_instance(self):
        fmap = FeatureMap(3, 2, ((0, 2), (1,)))
        v = fmap.map_instance(np.array([10.0, 20.0, 30.0]))
        assert len(v) == fmap.k == 2
        assert v[0].tolist() == [10.0, 30.0] and v[1].tolist() == [20.0]

    def test_inverse_permutation_recovers_x(self):
        rng = np.random.default_rng(0)
        fmap = cluster(random_distance(rng, 20), 4)
        x = rng.normal(size=20)
        flat = np.concatenate(fmap.map_instance(x))
        recovered = np.empty(20)
        recovered[fmap.index] = flat
        assert np.array_equal(recovered, x)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            FeatureMap(3, 2, ((0, 2), (1,))).map_instance(np.zeros(4))

    @pytest.mark.parametrize(
        "groups",
        [((0, 1), (1, 2)), ((0,), (2,)), ((0, 1, 2),), ()],
    )
    def test_invalid(self, groups):
        with pytest.raises(ValueError):
            FeatureMap(3, 2, groups)

    def test_json_round_trip(self, tmp_path):
        fmap = FeatureMap(5, 3, ((0, 3), (1, 2, 4)))
        fmap.save(tmp_path / "map.json")
        assert FeatureMap.load(tmp_path / "map.json") == fmap
        import json

        doc = json.loads((tmp_path / "map.json").read_text())
        assert doc == {"n": 5, "m": 3, "groups": [[0, 3], [1, 2, 4]]}

    def test_uniform(self):
        fmap = FeatureMap.uniform(115, 12)
        assert fmap.k == 12 and max(fmap.sizes) == 10
