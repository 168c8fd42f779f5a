"""Tests for the reconstruction network: wiring, training, checkpoints."""
import math

import numpy as np
import pytest

from thzsense import crnet
from thzsense.autodiff import Adam, Tensor, grad_check, no_grad
from thzsense.channel import ChannelConfig
from thzsense.exceptions import ConfigurationError, TrainingDiverged
from thzsense.representation import to_channels
from thzsense.siggen import GenConfig, generate_sample

TINY = dict(residual_blocks=2, block_filters=(8, 4, 2))


def tiny_model(n_s=32, n_m=16, seed=0, **kwargs):
    params = dict(TINY)
    params.update(kwargs)
    cfg = crnet.CrnetConfig(n_s=n_s, n_m=n_m, seed=seed, **params)
    return crnet.build_model(cfg)


def synthetic_pairs(n, n_s, seed, snr_db=30.0):
    """Generated spectrum pairs, normalized to [0, 1] with their own extremes."""
    cfg = GenConfig(f_a_hz=0.1e12, f_b_hz=0.64e12, n_s=n_s, n_users=2,
                    block_size=3, guard=1, snr_db=snr_db,
                    channel=ChannelConfig(l1=1, l2=1))
    rng = np.random.default_rng(seed)
    noisy = np.empty((n, 2, n_s), dtype=np.float32)
    clean = np.empty((n, 2, n_s), dtype=np.float32)
    occupancy = np.empty((n, n_s), dtype=bool)
    for i in range(n):
        s = generate_sample(cfg, rng)
        noisy[i] = to_channels(s.noisy_spectrum)
        clean[i] = to_channels(s.clean_spectrum)
        occupancy[i] = s.occupancy.bits
    lo = float(min(noisy.min(), clean.min()))
    hi = float(max(noisy.max(), clean.max()))
    noisy = (noisy - lo) / (hi - lo)
    clean = (clean - lo) / (hi - lo)
    return noisy, clean, occupancy, (lo, hi)


class TestConfig:
    def test_rejects_nm_not_below_ns(self):
        with pytest.raises(ConfigurationError):
            crnet.CrnetConfig(n_s=32, n_m=32)

    def test_rejects_even_kernel(self):
        with pytest.raises(ConfigurationError, match="odd"):
            crnet.CrnetConfig(n_s=32, n_m=16, kernel_size=4)

    def test_rejects_wrong_last_filter(self):
        with pytest.raises(ConfigurationError, match="2"):
            crnet.CrnetConfig(n_s=32, n_m=16, block_filters=(8, 4))


class TestBuild:
    def test_default_forward_shape(self):
        model = crnet.build_model(crnet.CrnetConfig())
        x = np.random.default_rng(0).random((4, 2, 256), dtype=np.float32)
        assert model(x).shape == (4, 2, 256)

    def test_same_seed_identical_parameters(self):
        a = crnet.build_model(crnet.CrnetConfig(seed=5, **TINY, n_s=32, n_m=16))
        b = crnet.build_model(crnet.CrnetConfig(seed=5, **TINY, n_s=32, n_m=16))
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_param_count_matches_hand_formula(self):
        # frozen regression value computed from the layer shape arithmetic:
        # 128*256 + (256*128 + 256) + (4 + 2) + 6 * 7112
        model = crnet.build_model(crnet.CrnetConfig())
        assert crnet.count_params(model) == 108470
        assert crnet.count_params(model) < 559_587

    def test_removing_one_block_reduces_count_by_block_amount(self):
        full = crnet.build_model(crnet.CrnetConfig())
        fewer = crnet.build_model(crnet.CrnetConfig(residual_blocks=5))
        assert crnet.count_params(full) - crnet.count_params(fewer) == 7112

    def test_compression_layer_param_count(self):
        model = crnet.build_model(crnet.CrnetConfig())
        assert model.compression.weight.size == 128 * 256

    def test_wrong_input_shape_rejected(self):
        model = tiny_model()
        with pytest.raises(ConfigurationError):
            model(np.zeros((2, 2, 64), dtype=np.float32))


class TestForward:
    def test_untrained_output_finite(self):
        model = tiny_model()
        x = np.random.default_rng(1).random((4, 2, 32), dtype=np.float32)
        assert np.all(np.isfinite(model(x).data))

    def test_eval_forward_deterministic(self):
        model = tiny_model()
        x = np.random.default_rng(2).random((4, 2, 32), dtype=np.float32)
        model.train()
        model(x)  # initialize running stats
        model.eval()
        np.testing.assert_array_equal(model(x).data, model(x).data)

    def test_decomposes_into_compression_then_reconstruction(self):
        from thzsense.sensing import compress, export_learned_matrix

        model = tiny_model()
        rng = np.random.default_rng(3)
        x = rng.random((4, 2, 32), dtype=np.float32)
        full_out = model(x).data

        # stage manually: exported matrix on the complex view, then the
        # coarse/fine stages applied to the measurements
        exported = export_learned_matrix(model)
        spectra = x[:, 0, :] + 1j * x[:, 1, :]
        z = np.stack([compress(exported, s) for s in spectra])
        z_channels = np.stack([z.real, z.imag], axis=1).astype(np.float32)

        from thzsense.autodiff import reshape
        t = reshape(Tensor(z_channels), (8, 1, 16))
        y = model.coarse(t)
        y = reshape(y, (4, 2, 32))
        y = model.coarse_act(model.coarse_bn(y))
        for block in model.blocks:
            y = block(y)
        np.testing.assert_allclose(full_out, y.data, atol=1e-6)

    def test_skip_connection_identity_when_convs_zeroed(self):
        model = tiny_model()
        for block in model.blocks:
            for conv in block.convs:
                conv.weight.data[:] = 0.0
                conv.bias.data[:] = 0.0
        x = Tensor(np.random.default_rng(4).random((4, 2, 32), dtype=np.float32))
        y = x
        for block in model.blocks:
            y = block(y)
        np.testing.assert_allclose(y.data, x.data, atol=1e-7)


class TestGradients:
    def test_full_model_gradcheck_float64(self):
        model = tiny_model(n_s=16, n_m=8).astype(np.float64)
        x = np.random.default_rng(5).random((2, 2, 16))
        assert grad_check(model, x, eps=1e-5, rng=np.random.default_rng(6)) < 1e-6


class TestTraining:
    def test_overfits_small_set(self):
        noisy, clean, _, _ = synthetic_pairs(200, 64, seed=11, snr_db=30.0)
        cfg = crnet.CrnetConfig(n_s=64, n_m=32, residual_blocks=2,
                                block_filters=(16, 8, 2), lr=0.004,
                                epochs=50, batch_size=50, seed=3)
        model = crnet.build_model(cfg)
        history = crnet.train_model(model, (noisy, clean), (noisy, clean))
        assert len(history) == 50
        assert history[-1]["train_loss"] <= history[0]["train_loss"] / 10.0

    def test_history_shape_and_determinism(self):
        noisy, clean, _, _ = synthetic_pairs(64, 32, seed=12)
        cfg = dict(n_s=32, n_m=16, lr=0.002, epochs=3, batch_size=32, seed=9, **TINY)

        def run():
            model = crnet.build_model(crnet.CrnetConfig(**cfg))
            hist = crnet.train_model(model, (noisy, clean), (noisy[:16], clean[:16]))
            return model, hist

        model_a, hist_a = run()
        model_b, hist_b = run()
        assert [h["epoch"] for h in hist_a] == [1, 2, 3]
        for ha, hb in zip(hist_a, hist_b):
            assert abs(ha["train_loss"] - hb["train_loss"]) < 1e-7
            assert abs(ha["val_loss"] - hb["val_loss"]) < 1e-7
        for (_, pa), (_, pb) in zip(model_a.named_parameters(), model_b.named_parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_compression_weights_move_on_first_step(self):
        noisy, clean, _, _ = synthetic_pairs(32, 32, seed=13)
        cfg = crnet.CrnetConfig(n_s=32, n_m=16, epochs=1, batch_size=32, seed=1, **TINY)
        model = crnet.build_model(cfg)
        before = model.compression.weight.data.copy()
        crnet.train_model(model, (noisy, clean), (noisy, clean))
        delta = np.linalg.norm(model.compression.weight.data - before)
        assert delta > 0.0

    def test_batch_size_larger_than_dataset_rejected(self):
        noisy, clean, _, _ = synthetic_pairs(8, 32, seed=14)
        cfg = crnet.CrnetConfig(n_s=32, n_m=16, epochs=1, batch_size=32, **TINY)
        model = crnet.build_model(cfg)
        with pytest.raises(ConfigurationError, match="batch_size"):
            crnet.train_model(model, (noisy, clean), (noisy, clean))

    def test_non_finite_loss_aborts_with_diagnostics(self):
        noisy, clean, _, _ = synthetic_pairs(32, 32, seed=15)
        noisy[0, 0, 0] = np.nan
        cfg = crnet.CrnetConfig(n_s=32, n_m=16, epochs=1, batch_size=32, **TINY)
        model = crnet.build_model(cfg)
        with pytest.raises(TrainingDiverged) as err:
            crnet.train_model(model, (noisy, clean), (noisy, clean))
        assert err.value.epoch == 1 and err.value.batch == 0

    def test_final_loss_below_initial_loss(self):
        noisy, clean, _, _ = synthetic_pairs(128, 32, seed=16)
        cfg = crnet.CrnetConfig(n_s=32, n_m=16, lr=0.002, epochs=8,
                                batch_size=32, seed=2, **TINY)
        model = crnet.build_model(cfg)
        history = crnet.train_model(model, (noisy, clean), (noisy, clean))
        assert history[-1]["train_loss"] < history[0]["train_loss"]


class TestReconstruct:
    def test_output_length_and_batch_consistency(self):
        noisy, clean, _, norm = synthetic_pairs(32, 32, seed=17)
        cfg = crnet.CrnetConfig(n_s=32, n_m=16, epochs=1, batch_size=32, **TINY)
        model = crnet.build_model(cfg)
        crnet.train_model(model, (noisy, clean), (noisy, clean))
        model.normalization = norm
        spectra = np.random.default_rng(8).standard_normal((5, 32)) * 1e-4 \
            + 1j * np.random.default_rng(9).standard_normal((5, 32)) * 1e-4
        batch = crnet.reconstruct_batch(model, spectra)
        assert batch.shape == (5, 32)
        single = np.stack([crnet.reconstruct(model, s) for s in spectra])
        np.testing.assert_allclose(batch, single, atol=1e-6)

    def test_eval_before_training_surfaces_bn_error(self):
        model = tiny_model()
        with pytest.raises(ConfigurationError, match="uninitialized"):
            crnet.reconstruct(model, np.zeros(32, dtype=complex))


class TestCheckpoint:
    def test_round_trip_preserves_everything(self, tmp_path):
        noisy, clean, _, norm = synthetic_pairs(32, 32, seed=18)
        cfg = crnet.CrnetConfig(n_s=32, n_m=16, epochs=2, batch_size=16, seed=4, **TINY)
        model = crnet.build_model(cfg)
        opt = Adam(list(model.named_parameters()), lr=cfg.lr)
        crnet.train_model(model, (noisy, clean), (noisy, clean), optimizer=opt)
        model.normalization = norm
        path = tmp_path / "model.ckpt"
        crnet.save_checkpoint(model, path, optimizer=opt)

        loaded, opt2 = crnet.load_checkpoint(path)
        assert loaded.cfg == cfg
        assert loaded.trained_epochs == 2
        assert loaded.normalization == pytest.approx(norm, rel=1e-6)
        for (na, pa), (nb, pb) in zip(model.named_parameters(), loaded.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(pa.data, pb.data)
        assert opt2.step_count == opt.step_count
        for name in opt.m:
            np.testing.assert_array_equal(opt.m[name], opt2.m[name])

    def test_resume_matches_uninterrupted_run(self, tmp_path):
        noisy, clean, _, _ = synthetic_pairs(64, 32, seed=19)
        cfg = crnet.CrnetConfig(n_s=32, n_m=16, lr=0.002, epochs=2,
                                batch_size=32, seed=6, **TINY)

        straight = crnet.build_model(cfg)
        hist_straight = crnet.train_model(straight, (noisy, clean), (noisy, clean))

        part = crnet.build_model(cfg)
        opt = Adam(list(part.named_parameters()), lr=cfg.lr)
        hist_first = crnet.train_model(part, (noisy, clean), (noisy, clean),
                                       optimizer=opt, epochs=1)
        path = tmp_path / "part.ckpt"
        crnet.save_checkpoint(part, path, optimizer=opt)
        resumed, opt2 = crnet.load_checkpoint(path)
        hist_second = crnet.train_model(resumed, (noisy, clean), (noisy, clean),
                                        optimizer=opt2, epochs=1)

        assert opt2.step_count == opt.step_count + 2
        assert hist_second[0]["epoch"] == 2
        assert hist_first[0]["train_loss"] == hist_straight[0]["train_loss"]
        assert hist_second[0]["train_loss"] == hist_straight[1]["train_loss"]
        for (_, pa), (_, pb) in zip(straight.named_parameters(), resumed.named_parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)
