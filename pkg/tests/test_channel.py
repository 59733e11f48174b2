import math

import numpy as np
import pytest

from simplicomm import channel as ch


@pytest.fixture
def embedding():
    rng = np.random.default_rng(0)
    return {0: rng.standard_normal((10, 4)), 1: rng.standard_normal((6, 4))}


class TestAwgn:
    def test_infinite_snr_is_identity(self, embedding):
        out = ch.awgn(embedding, math.inf, np.random.default_rng(1))
        for k in embedding:
            assert np.array_equal(out[k], embedding[k])

    def test_noise_variance_definition(self):
        # unit signal power at 20 dB gives sigma^2 = 0.01
        v = {0: np.ones((200, 50))}
        rng = np.random.default_rng(2)
        out = ch.awgn(v, 20.0, rng)
        noise = out[0] - v[0]
        assert noise.var() == pytest.approx(0.01, rel=0.05)

    def test_zero_signal_rejected(self):
        with pytest.raises(ch.ZeroSignalError):
            ch.awgn({0: np.zeros((3, 2))}, 10.0, np.random.default_rng(0))

    @pytest.mark.parametrize("target_db", [5.0, 10.0, 20.0])
    def test_empirical_snr_within_half_db(self, target_db):
        rng = np.random.default_rng(int(target_db))
        v = {0: rng.standard_normal((100_000, 1))}
        out = ch.awgn(v, target_db, np.random.default_rng(99))
        noise = out[0] - v[0]
        measured_db = 10 * math.log10(ch.signal_power(v) / noise.var())
        assert abs(measured_db - target_db) < 0.5

    def test_noise_power_estimator_converges(self):
        rng = np.random.default_rng(7)
        v = {0: rng.standard_normal((100_000, 1))}
        power = ch.signal_power(v)
        sigma2 = power / 10.0
        out = ch.awgn(v, 10.0, np.random.default_rng(42))
        sample_var = (out[0] - v[0]).var()
        assert abs(sample_var - sigma2) / sigma2 < 0.05


class TestDegrade:
    def test_p_zero_untouched(self, embedding):
        out = ch.degrade(embedding, 0.0, "missing", np.random.default_rng(0))
        for k in embedding:
            assert np.array_equal(out.embeddings[k], embedding[k])
            assert (out.masks[k] == ch.RECEIVED).all()

    def test_p_one_missing_all_zero(self, embedding):
        out = ch.degrade(embedding, 1.0, "missing", np.random.default_rng(0))
        for k in embedding:
            assert np.array_equal(out.embeddings[k], np.zeros_like(embedding[k]))
            assert (out.masks[k] == ch.MISSING).all()

    def test_mask_cardinality_exact(self, embedding):
        for p in (0.1, 0.3, 0.5, 0.7):
            out = ch.degrade(embedding, p, "distorted", np.random.default_rng(3))
            for k, v in embedding.items():
                expected = round(p * v.shape[0])
                assert int(out.eval_mask(k).sum()) == expected

    def test_half_of_ten_rows(self):
        v = {0: np.ones((10, 2))}
        out = ch.degrade(v, 0.5, "missing", np.random.default_rng(1))
        assert int(out.eval_mask(0).sum()) == 5

    def test_received_rows_bit_identical(self, embedding):
        out = ch.degrade(embedding, 0.4, "distorted", np.random.default_rng(5))
        for k, v in embedding.items():
            kept = out.received_mask(k)
            assert out.embeddings[k][kept].tobytes() == v[kept].tobytes()

    def test_distorted_rows_scaled_to_signal(self):
        rng = np.random.default_rng(11)
        v = {0: 100.0 * rng.standard_normal((2000, 3))}
        out = ch.degrade(v, 0.5, "distorted", np.random.default_rng(12))
        hit = out.embeddings[0][out.eval_mask(0)]
        assert 50.0 < hit.std() < 200.0

    def test_mode_none(self, embedding):
        out = ch.degrade(embedding, 0.9, "none", np.random.default_rng(0))
        for k in embedding:
            assert (out.masks[k] == ch.RECEIVED).all()


class TestDeterminism:
    def test_same_seed_identical(self, embedding):
        cfg = ch.ChannelConfig(snr_db=10.0, p=0.3, mode="distorted", seed=21)
        a = ch.transmit(embedding, cfg)
        b = ch.transmit(embedding, cfg)
        for k in embedding:
            assert a.embeddings[k].tobytes() == b.embeddings[k].tobytes()
            assert a.masks[k].tobytes() == b.masks[k].tobytes()


class TestConfig:
    def test_bad_fraction_rejected(self):
        with pytest.raises(ValueError):
            ch.ChannelConfig(p=1.5)

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            ch.ChannelConfig(mode="garbled")
