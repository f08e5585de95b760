import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kitsune.feature_mapper import FeatureMap
from kitsune.kitnet import Autoencoder, KitNET, ModeError, rmse, sigmoid
from kitsune.synthetic import correlated_mixture
from oracles import numeric_gradient


def test_sigmoid():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(800.0) == 1.0
    assert sigmoid(-800.0) == 0.0
    x = np.linspace(-20, 20, 81)
    assert np.allclose(sigmoid(x) + sigmoid(-x), 1.0)
    assert np.all(np.diff(sigmoid(x)) > 0)


class TestRmse:
    def test_identity(self):
        assert rmse([1, 2, 3], [1, 2, 3]) == 0.0

    def test_value(self):
        assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5))

    @given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=20))
    def test_symmetric(self, pairs):
        x, y = zip(*pairs)
        assert rmse(x, y) == rmse(y, x)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            rmse([1, 2], [1])


def hand_ae():
    ae = Autoencoder(2, 1, lr=0.5)
    ae.W[:] = [[0.5, -1.0]]
    ae.b_enc[:] = [0.1]
    ae.b_dec[:] = [0.2, -0.3]
    return ae


class TestAutoencoder:
    def test_dimensions(self):
        with pytest.raises(ValueError):
            Autoencoder(3, 4)
        with pytest.raises(ValueError):
            Autoencoder(3, 0)
        ae = Autoencoder.create(7, rho=0.75, rng=0)
        assert (ae.d_in, ae.d_hidden) == (7, 6)

    def test_zero_weights_give_half(self):
        ae = Autoencoder(4, 3)
        _, y = ae.forward(np.array([0.3, 0.9, 0.0, 1.0]))
        assert np.all(y == 0.5)

    def test_hand_computed_forward(self):
        ae = hand_ae()
        v = np.array([0.4, 0.8])
        h = 1 / (1 + math.exp(-(0.5 * 0.4 - 1.0 * 0.8 + 0.1)))
        y0 = 1 / (1 + math.exp(-(0.5 * h + 0.2)))
        y1 = 1 / (1 + math.exp(-(-1.0 * h - 0.3)))
        H, Y = ae.forward(v)
        assert H[0] == pytest.approx(h, rel=1e-15)
        assert Y.tolist() == pytest.approx([y0, y1], rel=1e-15)

    @given(st.lists(st.floats(-50, 50), min_size=5, max_size=5))
    def test_output_in_unit_interval(self, v):
        ae = Autoencoder.create(5, rng=1)
        _, y = ae.forward(np.array(v))
        assert np.all((y >= 0) & (y <= 1))

    def test_tied_weights(self):
        ae = Autoencoder.create(6, rng=2)
        for _ in range(20):
            ae.sgd_step(np.random.default_rng(3).random(6))
        assert np.shares_memory(ae.decoder_weights, ae.W)
        assert np.array_equal(ae.decoder_weights, ae.W.T)


class TestNormalize:
    def test_first_input_is_zero(self):
        ae = Autoencoder(3, 2)
        out = ae.normalize(np.array([5.0, -1.0, 2.0]), learning=True)
        assert np.all(out == 0)
        assert np.array_equal(ae.norm_min, ae.norm_max)

    def test_linear_and_unclamped(self):
        ae = Autoencoder(1, 1)
        ae.normalize(np.array([0.0]), learning=True)
        ae.normalize(np.array([10.0]), learning=True)
        assert ae.normalize(np.array([5.0])) == 0.5
        assert ae.normalize(np.array([20.0])) == 2.0
        assert ae.normalize(np.array([-10.0])) == -1.0
        assert (ae.norm_min[0], ae.norm_max[0]) == (0.0, 10.0)

    def test_extrema_ordered(self):
        ae = Autoencoder(4, 3)
        for x in np.random.default_rng(0).normal(size=(30, 4)):
            ae.normalize(x, learning=True)
        assert np.all(ae.norm_min <= ae.norm_max)


class TestSgd:
    @pytest.mark.parametrize("shape", [(2, 1), (7, 6), (10, 8)])
    def test_gradient_matches_finite_differences(self, shape):
        d, h = shape
        rng = np.random.default_rng(d)
        for _ in range(5):
            ae = Autoencoder(d, h)
            ae.W[:] = rng.uniform(-1, 1, (h, d))
            ae.b_enc[:] = rng.uniform(-0.5, 0.5, h)
            ae.b_dec[:] = rng.uniform(-0.5, 0.5, d)
            v = rng.random(d)
            _, gW, gbe, gbd = ae.gradients(v)
            for analytic, params in ((gW, ae.W), (gbe, ae.b_enc), (gbd, ae.b_dec)):
                numeric = numeric_gradient(lambda: ae.loss(v), params, 1e-4)
                scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
                assert np.max(np.abs(analytic - numeric) / scale) < 1e-4

    def test_update_is_gradient_step(self):
        ae = hand_ae()
        v = np.array([0.4, 0.8])
        _, gW, gbe, gbd = ae.gradients(v)
        W0, be0, bd0 = ae.W.copy(), ae.b_enc.copy(), ae.b_dec.copy()
        ae.sgd_step(v)
        assert np.allclose(ae.W, W0 - 0.5 * gW, rtol=0, atol=1e-15)
        assert np.allclose(ae.b_enc, be0 - 0.5 * gbe, rtol=0, atol=1e-15)
        assert np.allclose(ae.b_dec, bd0 - 0.5 * gbd, rtol=0, atol=1e-15)

    def test_returns_pre_update_rmse(self):
        ae = hand_ae()
        v = np.array([0.4, 0.8])
        expected = ae.score(v)
        assert ae.sgd_step(v) == expected

    def test_zero_learning_rate(self):
        ae = Autoencoder.create(5, lr=0.0, rng=4)
        before = ae.buffer.copy()
        ae.sgd_step(np.random.default_rng(0).random(5))
        assert np.array_equal(ae.buffer, before)

    @pytest.mark.parametrize("seed", range(5))
    def test_converges_on_fixed_vector(self, seed):
        rng = np.random.default_rng(seed)
        ae = Autoencoder.create(6, rho=0.75, lr=0.1, rng=rng)
        v = rng.uniform(0.1, 0.9, 6)
        errors = np.array([ae.sgd_step(v) for _ in range(1000)])
        assert np.all(np.diff(errors[50:]) <= 0)
        assert errors[-1] < 0.05


def make_model(sizes=(3, 7, 5), seed=0, **kw):
    groups, start = [], 0
    for s in sizes:
        groups.append(tuple(range(start, start + s)))
        start += s
    return KitNET(FeatureMap(start, max(sizes), tuple(groups)), seed=seed, **kw)


class TestInit:
    def test_sizes(self):
        model = make_model(rho=0.75)
        assert [ae.d_hidden for ae in model.ensemble] == [3, 6, 4]
        assert (model.output_ae.d_in, model.output_ae.d_hidden) == (3, 3)
        assert model.phi == -1.0 and model.mode == "train"

    def test_seeded(self):
        assert np.array_equal(make_model(seed=5).params, make_model(seed=5).params)
        assert not np.array_equal(make_model(seed=5).params, make_model(seed=6).params)

    def test_uniform_support(self):
        model = make_model(sizes=(1, 2, 9, 10), seed=1)
        for ae in model.autoencoders:
            assert np.all(np.abs(ae.W) <= 1.0 / ae.d_in)
            assert np.all(ae.b_enc == 0) and np.all(ae.b_dec == 0)

    def test_requires_feature_map(self):
        with pytest.raises(TypeError):
            KitNET([[0, 1]])


class TestTrainExecute:
    def test_first_train_step(self):
        model = make_model()
        x = np.random.default_rng(0).normal(size=15)
        out = model.output_ae
        W, be, bd = out.W.copy(), out.b_enc.copy(), out.b_dec.copy()
        s = model.train_step(x)
        h = sigmoid(W @ np.zeros(3) + be)
        y = sigmoid(W.T @ h + bd)
        assert s == pytest.approx(rmse(np.zeros(3), y), rel=1e-14)
        assert model.phi == s

    def test_phi_is_running_max(self):
        model = make_model()
        X = np.random.default_rng(1).normal(size=(300, 15))
        scores = [model.train_step(x) for x in X]
        assert model.phi == max(scores)
        assert all(s >= 0 for s in scores)

    def test_learning_curve(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(6000, 15))
        model = make_model()
        s = model.train_many(X)
        assert s[-1000:].mean() < s[:1000].mean()

    def test_mode_guards(self):
        model = make_model()
        x = np.zeros(15)
        with pytest.raises(ModeError):
            model.freeze()
        with pytest.raises(ModeError):
            model.is_alert(0.0)
        model.train_step(x)
        with pytest.raises(ModeError):
            model.execute_step(x)
        model.freeze()
        with pytest.raises(ModeError):
            model.train_step(x)

    def test_execute_is_pure(self):
        model = make_model()
        X = np.random.default_rng(3).normal(size=(500, 15))
        model.train_many(X)
        model.freeze()
        before, phi = model.params.copy(), model.phi
        s1 = model.execute_step(X[0] * 3)
        s2 = model.execute_step(X[0] * 3)
        assert s1 == s2
        assert np.array_equal(model.params, before) and model.phi == phi

    def test_batch_and_step_paths_agree(self):
        X = np.random.default_rng(4).normal(size=(400, 15))
        a, b = make_model(seed=9), make_model(seed=9)
        sa = np.array([a.train_step(x) for x in X[:300]])
        sb = b.train_many(X[:300])
        assert np.array_equal(sa, sb) and np.array_equal(a.params, b.params)
        a.freeze(), b.freeze()
        assert np.array_equal([a.execute_step(x) for x in X[300:]], b.execute_many(X[300:]))

    def test_normal_data_below_threshold_and_anomaly_above_median(self):
        rng = np.random.default_rng(5)
        X, params = correlated_mixture(rng, 20_000, n_groups=3, group_size=5)
        held, _ = correlated_mixture(rng, 2000, n_groups=3, group_size=5, params=params)
        model = make_model(sizes=(5, 5, 5), beta_s=2.0)
        model.train_many(X)
        model.freeze()
        s = model.execute_many(held)
        assert np.mean(s < model.threshold) >= 0.99
        bad = held[:200].copy()
        span = X.max(axis=0) - X.min(axis=0)
        bad[:, 5:10] = X.max(axis=0)[5:10] + 3 * span[5:10]
        assert np.all(model.execute_many(bad) > np.median(s))

    def test_alert_boundary(self):
        model = make_model(beta_s=2.0)
        model.train_step(np.zeros(15))
        model.phi = 0.25
        assert not model.is_alert(0.0)
        assert model.is_alert(0.5)
        assert not model.is_alert(np.nextafter(0.5, 0))
        model.beta_s = 1.0
        assert model.is_alert(0.25)

    def test_ensemble_errors(self):
        model = make_model()
        X = np.random.default_rng(6).normal(size=(500, 15))
        model.train_many(X)
        model.freeze()
        x = X[0].copy()
        x[3:10] += 100
        assert np.argmax(model.ensemble_errors(x)) == 1


class TestComplexity:
    def test_measured_macs_match_closed_form(self):
        model = make_model(sizes=(3, 7, 5))
        model.train_many(np.random.default_rng(0).normal(size=(10, 15)))
        model.freeze()
        model.counters[0] = 0
        model.execute_step(np.zeros(15))
        expected = sum(2 * h * d for d, h in [(3, 3), (7, 6), (5, 4)]) + 2 * 3 * 3
        assert model.counters[0] == expected == model.execute_macs()

    def test_ensemble_cheaper_than_single(self):
        ensemble = KitNET(FeatureMap.uniform(115, 12))
        single = KitNET(FeatureMap.uniform(115, 1))
        assert single.ensemble[0].macs == 2 * math.ceil(0.75 * 115) * 115
        assert ensemble.execute_macs() < 0.25 * single.ensemble[0].macs


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(800, 15))
        model = make_model(seed=3, beta_s=1.5, lr=0.05)
        model.train_many(X[:600])
        model.freeze()
        model.save(tmp_path / "m.json")
        loaded = KitNET.load(tmp_path / "m.json")
        assert np.array_equal(loaded.params, model.params)
        assert (loaded.phi, loaded.beta_s, loaded.lr, loaded.mode) == (model.phi, 1.5, 0.05, "execute")
        assert np.array_equal(loaded.execute_many(X[600:]), model.execute_many(X[600:]))

    def test_rejects_foreign_document(self, tmp_path):
        with pytest.raises(ValueError):
            KitNET.from_dict({"format": "other"})

    def test_untrained_model_round_trips(self, tmp_path):
        model = make_model()
        model.save(tmp_path / "m.json")
        loaded = KitNET.load(tmp_path / "m.json")
        assert np.array_equal(loaded.params, model.params)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_deterministic_given_seed(seed):
    X = np.random.default_rng(seed).normal(size=(200, 15))
    a, b = make_model(seed=seed), make_model(seed=seed)
    assert np.array_equal(a.train_many(X), b.train_many(X))
    assert np.array_equal(a.params, b.params)
