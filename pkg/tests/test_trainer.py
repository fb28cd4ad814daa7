"""Adam, clipping, patch sampling, checkpoints and the training loop."""

import logging
import math

import numpy as np
import pandas as pd
import pytest
from scipy.stats import chisquare

from src.codec import (
    ArchitectureConfig, CodecNetwork, ProgressiveCodec, create_desk_architecture, denormalize,
    normalize,
)
from src.demo_data import ToyCorpusGenerator
from src.errors import (
    CheckpointFormatError, ConfigError, EntryShapeError, MissingEntryError,
    TrainingDivergedError, UnknownEntryError,
)
from src.metrics import ms_ssim
from src.perceptual_loss import LossBaseline
from src.trainer import (
    AdamState, Checkpoint, TrainConfig, Trainer, adam_step, clip_global_norm, from_bytes,
    global_norm, load_checkpoint, load_dataset, sample_patches, save_checkpoint, to_bytes,
)
from tests.helpers import tiny_architecture

logger = logging.getLogger(__name__)


def _corpus(count=4, size=32):
    return [g.pixels for g in ToyCorpusGenerator(seed=0).generate_corpus(count, size)]


def _config(directory, **overrides):
    settings = dict(steps=3, batch_size=2, patch_size=16, iterations=2, seed=5,
                    checkpoint_dir=str(directory), checkpoint_interval=2, log_every=1)
    settings.update(overrides)
    return TrainConfig(**settings)


class TestAdam:

    def test_first_step_of_a_unit_gradient(self):
        params = {"w": np.array([1.0])}
        new, state = adam_step(params, {"w": np.array([1.0])}, AdamState(), lr=0.5)
        # m_hat = v_hat = 1, so the update is lr / (1 + epsilon)
        np.testing.assert_allclose(new["w"], [0.75])
        assert state.step == 1
        assert params["w"][0] == 1.0

    def test_zero_gradient_leaves_parameters(self):
        params = {"w": np.arange(6.0).reshape(2, 3)}
        new, _ = adam_step(params, {"w": np.zeros((2, 3))}, AdamState(), lr=0.5)
        np.testing.assert_array_equal(new["w"], params["w"])

    def test_matches_reference_over_many_steps(self):
        rng = np.random.default_rng(0)
        theta = rng.normal(size=(3, 4))
        params = {"w": theta.copy()}
        state = AdamState()
        m = np.zeros_like(theta)
        v = np.zeros_like(theta)
        for k in range(1, 101):
            g = rng.normal(size=theta.shape)
            params, state = adam_step(params, {"w": g}, state, lr=0.01)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            theta = theta - 0.01 * (m / (1 - 0.9 ** k)) / (np.sqrt(v / (1 - 0.999 ** k)) + 1.0)
        np.testing.assert_allclose(params["w"], theta, atol=1e-10, rtol=0)
        assert state.step == 100

    def test_non_finite_gradient(self):
        with pytest.raises(TrainingDivergedError):
            adam_step({"w": np.zeros(2)}, {"w": np.array([0.0, math.nan])}, AdamState(), 0.5)
        with pytest.raises(TrainingDivergedError):
            adam_step({"w": np.zeros(2)}, {"w": np.array([math.inf, 0.0])}, AdamState(), 0.5)


class TestClipping:

    def test_large_norm_is_scaled_down(self):
        grads = {"a": np.array([0.6]), "b": np.array([0.8])}
        clipped = clip_global_norm(grads, 0.5)
        assert global_norm(clipped) == pytest.approx(0.5)
        np.testing.assert_allclose(clipped["a"], [0.3])

    def test_small_norm_is_untouched(self):
        grads = {"a": np.array([0.3, 0.0])}
        np.testing.assert_array_equal(clip_global_norm(grads, 0.5)["a"], grads["a"])

    def test_random_gradients_respect_bound(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            grads = {f"g{i}": rng.normal(scale=rng.uniform(0.01, 10), size=(3, 5)) for i in range(4)}
            assert global_norm(clip_global_norm(grads)) <= 0.5 + 1e-12


class TestPatches:

    def test_deterministic_per_step(self):
        images = _corpus()
        a = sample_patches(images, 16, 4, seed=3, step=7)
        b = sample_patches(images, 16, 4, seed=3, step=7)
        c = sample_patches(images, 16, 4, seed=3, step=8)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        assert a.shape == (4, 16, 16, 3)
        assert a.min() >= -0.5 and a.max() <= 0.5

    def test_corners_are_uniform(self):
        rows, cols = np.mgrid[0:64, 0:64]
        image = np.stack([rows / 255, cols / 255, np.zeros((64, 64))], axis=-1)
        patches = sample_patches([image], 16, 10_000, seed=0)
        tops = np.rint((patches[:, 0, 0, 0] + 0.5) * 255).astype(int)
        lefts = np.rint((patches[:, 0, 0, 1] + 0.5) * 255).astype(int)
        for corner in (tops, lefts):
            counts = np.bincount(corner, minlength=49)
            assert counts.size == 49
            assert chisquare(counts).pvalue > 0.01

    def test_small_images_are_skipped(self):
        small = np.zeros((16, 16, 3))
        large = np.ones((32, 32, 3))
        patches = sample_patches([small, large], 32, 3, seed=0)
        assert (patches == 0.5).all()

    def test_invalid_requests(self):
        with pytest.raises(ConfigError):
            sample_patches(_corpus(), 33, 1, seed=0)
        with pytest.raises(ConfigError):
            sample_patches([np.zeros((16, 16, 3))], 32, 1, seed=0)
        with pytest.raises(ConfigError):
            sample_patches([], 16, 1, seed=0)

    def test_dataset_directory(self, tmp_path):
        ToyCorpusGenerator(seed=1).write_corpus(tmp_path, count=3, height=32)
        (tmp_path / "notes.txt").write_text("not an image")
        images = load_dataset(tmp_path)
        assert len(images) == 3
        with pytest.raises(ConfigError):
            load_dataset(tmp_path / "missing")


class TestCheckpoint:

    def _checkpoint(self, tiny_network):
        ckpt = Checkpoint.from_network(tiny_network, step=12,
                                       baseline=LossBaseline(value=0.125, updates=12))
        rng = np.random.default_rng(2)
        ckpt.adam.m = {n: rng.normal(size=a.shape).astype(np.float32) for n, a in ckpt.params.items()}
        ckpt.adam.step = 12
        return ckpt

    def test_round_trip_is_bit_identical(self, tiny_network, tmp_path):
        ckpt = self._checkpoint(tiny_network)
        path = save_checkpoint(tmp_path / "model.rpck", ckpt)
        loaded = load_checkpoint(path)
        assert to_bytes(loaded) == path.read_bytes()
        for name, value in ckpt.params.items():
            np.testing.assert_array_equal(loaded.params[name], value)
            np.testing.assert_array_equal(loaded.adam.m[name], ckpt.adam.m[name])
        assert loaded.step == 12 and loaded.adam.step == 12
        assert loaded.baseline.value == 0.125 and loaded.baseline.updates == 12
        assert loaded.arch.digest() == ckpt.arch.digest()
        assert loaded.trained

    def test_uninitialized_baseline_survives(self, tiny_network):
        loaded = from_bytes(to_bytes(Checkpoint.from_network(tiny_network)))
        assert loaded.baseline.value is None
        assert not loaded.trained

    def test_missing_entry(self, tiny_network):
        ckpt = self._checkpoint(tiny_network)
        del ckpt.params["dec2/u_z"]
        with pytest.raises(MissingEntryError) as info:
            from_bytes(to_bytes(ckpt))
        assert info.value.name == "param/dec2/u_z"

    def test_unknown_entry(self, tiny_network):
        ckpt = self._checkpoint(tiny_network)
        ckpt.params["extra/w"] = np.zeros(3, dtype=np.float32)
        with pytest.raises(UnknownEntryError):
            from_bytes(to_bytes(ckpt))

    def test_wrong_shape(self, tiny_network):
        ckpt = self._checkpoint(tiny_network)
        ckpt.params["out/b"] = np.zeros(4, dtype=np.float32)
        with pytest.raises(EntryShapeError) as info:
            from_bytes(to_bytes(ckpt))
        assert info.value.expected == (3,)

    def test_truncation_and_magic(self, tiny_network):
        data = to_bytes(self._checkpoint(tiny_network))
        for cut in (0, 5, len(data) // 2, len(data) - 1):
            with pytest.raises(CheckpointFormatError):
                from_bytes(data[:cut])
        with pytest.raises(CheckpointFormatError):
            from_bytes(b"XPCK" + data[4:])
        with pytest.raises(CheckpointFormatError):
            from_bytes(data + b"\x00")

    def test_malformed_architecture_entry(self, tiny_network):
        data = to_bytes(self._checkpoint(tiny_network))
        bad = data.replace(b"[4, 8, 8, 8]", b'["x", 8, 88]')
        assert len(bad) == len(data) and bad != data
        with pytest.raises(CheckpointFormatError) as info:
            from_bytes(bad)
        assert info.value.exit_code == 3

    def test_network_from_checkpoint(self, tiny_network):
        ckpt = self._checkpoint(tiny_network)
        network = ckpt.network()
        assert isinstance(network, CodecNetwork)
        assert set(network.arrays()) == set(ckpt.params)


class TestTrainConfig:

    def test_defaults(self):
        config = TrainConfig()
        assert (config.learning_rate, config.batch_size, config.steps) == (0.5, 4, 2000)
        assert (config.patch_size, config.iterations, config.loss) == (32, 4, "dssim")

    def test_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(patch_size=24)
        with pytest.raises(ConfigError):
            TrainConfig(iterations=17)
        with pytest.raises(ConfigError):
            TrainConfig(loss="l2")
        with pytest.raises(ConfigError):
            TrainConfig.from_dict({"momentum": 0.9})

    def test_dict_round_trip(self):
        config = TrainConfig(steps=7, k_prime=2)
        assert TrainConfig.from_dict(config.to_dict()) == config


class TestTrainingLoop:

    def test_same_seed_same_losses(self, tmp_path):
        images = _corpus()
        first = Trainer(_config(tmp_path / "a"), tiny_architecture(), images).run()
        second = Trainer(_config(tmp_path / "b"), tiny_architecture(), images).run()
        pd.testing.assert_frame_equal(first.log, second.log)
        assert list(first.log["step"]) == [1, 2, 3]
        assert np.isfinite(first.log["loss"]).all()

    def test_outputs(self, tmp_path):
        result = Trainer(_config(tmp_path), tiny_architecture(), _corpus()).run()
        names = sorted(p.name for p in result.checkpoints)
        assert names == ["step_0000002.rpck", "step_0000003.rpck"]
        log = pd.read_csv(tmp_path / "loss.csv")
        assert list(log.columns) == ["step", "loss", "baseline"]
        assert len(log) == 3
        assert result.final.step == 3
        assert result.final.baseline.initialized

    def test_resume_reproduces_later_steps(self, tmp_path):
        images = _corpus()
        full = Trainer(_config(tmp_path / "full", steps=4), tiny_architecture(), images).run()

        checkpoint = load_checkpoint(tmp_path / "full" / "step_0000002.rpck")
        resumed = Trainer(_config(tmp_path / "resumed", steps=4), tiny_architecture(), images,
                          resume=checkpoint).run()
        assert list(resumed.log["step"]) == [3, 4]
        np.testing.assert_array_equal(resumed.log["loss"].to_numpy(),
                                      full.log["loss"].to_numpy()[2:])
        for name, value in full.final.params.items():
            np.testing.assert_array_equal(resumed.final.params[name], value)

    def test_resume_needs_matching_architecture(self, tmp_path, tiny_network):
        other = Checkpoint.from_network(tiny_network)
        wider = ArchitectureConfig(encoder_depths=(4, 8, 8, 16), decoder_depths=(8, 8, 8, 8))
        with pytest.raises(ConfigError):
            Trainer(_config(tmp_path), wider, _corpus(), resume=other)

    def test_plain_l1_mode(self, tmp_path):
        result = Trainer(_config(tmp_path, loss="l1", steps=2), tiny_architecture(), _corpus()).run()
        assert len(result.log) == 2

    def test_priming_in_training(self, tmp_path):
        config = _config(tmp_path, steps=1, k_prime=1, k_diffuse=1)
        result = Trainer(config, tiny_architecture(), _corpus()).run()
        assert np.isfinite(result.log["loss"].iloc[0])

    def test_divergence_keeps_last_good_state(self, tmp_path):
        images = [np.full((32, 32, 3), math.nan)]
        trainer = Trainer(_config(tmp_path, loss="l1"), tiny_architecture(), images)
        with pytest.raises(TrainingDivergedError):
            trainer.run()
        assert load_checkpoint(tmp_path / "last_good.rpck").step == 0

    @pytest.mark.slow
    def test_loss_decreases(self, tmp_path):
        config = _config(tmp_path, steps=200, batch_size=4, patch_size=32, iterations=4,
                         checkpoint_interval=100, log_every=50)
        result = Trainer(config, tiny_architecture(), _corpus(count=16, size=64)).run()
        losses = result.log["loss"].to_numpy()
        assert losses[-50:].mean() < losses[:50].mean()


@pytest.mark.slow
class TestDeskRun:
    """Desk preset for 2000 steps on a 16-image toy corpus, checked on held-out images."""

    def _train(self, directory, k_prime):
        config = TrainConfig(steps=2000, batch_size=4, patch_size=32, iterations=4,
                             k_prime=k_prime, seed=0, checkpoint_dir=str(directory),
                             checkpoint_interval=1000, log_every=100)
        images = _corpus(count=16, size=64)
        return Trainer(config, create_desk_architecture(k_prime=k_prime), images).run()

    def _ms_ssim_by_iteration(self, network, image, k_prime):
        _, recons = ProgressiveCodec(network, k_prime, 0).encode(normalize(image), 4)
        return [ms_ssim(image, np.clip(denormalize(r), 0.0, 1.0)) for r in recons]

    def test_training_improves_and_quality_grows_with_t(self, tmp_path):
        unprimed = self._train(tmp_path / "unprimed", k_prime=0)
        losses = unprimed.log["loss"].to_numpy()
        assert len(losses) == 2000
        decile = len(losses) // 10
        first, last = losses[:decile].mean(), losses[-decile:].mean()
        logger.info(f"Desk run loss: first decile {first:.5g}, last decile {last:.5g}")
        assert last < 0.6 * first

        held_out = [g.pixels for g in ToyCorpusGenerator(seed=1).generate_corpus(10, 176)]
        network = unprimed.final.network()
        curves = [self._ms_ssim_by_iteration(network, image, 0) for image in held_out]
        growing = [all(b >= a - 1e-9 for a, b in zip(c, c[1:])) for c in curves]
        logger.info(f"MS-SSIM non-decreasing in t on {sum(growing)}/{len(held_out)} images")
        assert np.mean(growing) >= 0.9

        # same step budget; the comparison is reported, not asserted
        primed = self._train(tmp_path / "primed", k_prime=3)
        primed_network = primed.final.network()
        first_unprimed = float(np.mean([c[0] for c in curves]))
        first_primed = float(np.mean([self._ms_ssim_by_iteration(primed_network, image, 3)[0]
                                      for image in held_out]))
        logger.info(
            f"Iteration-1 MS-SSIM on {len(held_out)} held-out images: "
            f"unprimed {first_unprimed:.4f}, 3-primed {first_primed:.4f}"
        )
        assert 0.0 <= first_primed <= 1.0
