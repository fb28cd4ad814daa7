"""
Training Loop - Recurrent Priming Codec

Single-worker, seeded training: sample patches, unroll the closed
encoder/decoder loop for t iterations with priming and diffusion, sum the
per-iteration perceptual loss, back-propagate, clip, take an Adam step and
update the dissimilarity baseline.

Everything runs in float32; a run is bit-reproducible given the config,
the dataset and the seed.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional, Sequence
import logging

import numpy as np
import pandas as pd

from src.codec import ArchitectureConfig, CodecNetwork, MAX_ITERATIONS, run_iterations
from src.errors import ConfigError, TrainingDivergedError
from src.nn_core import Tape, Variable, add, reverse_pass, scale
from src.perceptual_loss import LossBaseline, block_dssim, plain_l1, update_baseline, weighted_l1
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataset import check_patch_size, load_dataset, sample_patches
from .optimizer import MAX_GRAD_NORM, AdamState, adam_step, clip_global_norm, global_norm

logger = logging.getLogger(__name__)

LOSS_MODES = ("dssim", "l1")
LOG_COLUMNS = ["step", "loss", "baseline"]
LOSS_LOG = "loss.csv"
LAST_GOOD = "last_good.rpck"

# Normalized pixels are shifted back to [0, 1] before measuring DSSIM
DSSIM_OFFSET = 0.5


@dataclass
class TrainConfig:
    """Hyperparameters and I/O locations of one training run."""
    learning_rate: float = 0.5
    batch_size: int = 4
    steps: int = 2000
    patch_size: int = 32
    iterations: int = 4
    k_prime: int = 0
    k_diffuse: int = 0
    seed: int = 0
    dataset: str = "data/toy"
    checkpoint_dir: str = "checkpoints"
    checkpoint_interval: int = 500
    loss: str = "dssim"
    max_grad_norm: float = MAX_GRAD_NORM
    log_every: int = 50

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        check_patch_size(self.patch_size)
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size <= 0 or self.steps < 0:
            raise ConfigError("batch_size must be positive and steps non-negative")
        if not 1 <= self.iterations <= MAX_ITERATIONS:
            raise ConfigError(f"iterations must be in [1, {MAX_ITERATIONS}], got {self.iterations}")
        if self.k_prime < 0 or self.k_diffuse < 0:
            raise ConfigError("k_prime and k_diffuse must be non-negative")
        if self.checkpoint_interval <= 0 or self.log_every <= 0:
            raise ConfigError("checkpoint_interval and log_every must be positive")
        if self.loss not in LOSS_MODES:
            raise ConfigError(f"loss must be one of {LOSS_MODES}, got '{self.loss}'")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown train keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class StepResult:
    """Outcome of one optimizer step."""
    step: int
    loss: float
    baseline: float
    grad_norm: float
    over_weighted: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TrainResult:
    """Loss log and checkpoints written by a run."""
    log: pd.DataFrame
    checkpoints: List[Path] = field(default_factory=list)
    final: Optional[Checkpoint] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "steps": int(len(self.log)),
            "final_loss": float(self.log["loss"].iloc[-1]) if len(self.log) else None,
            "checkpoints": [str(p) for p in self.checkpoints],
        }


class Trainer:
    """
    Desk-scale trainer for one codec network.

    Example:
    ```python
    trainer = Trainer(TrainConfig(steps=200), create_desk_architecture(), images)
    result = trainer.run()
    print(result.log.tail())
    ```
    """

    def __init__(self, config: TrainConfig, arch: ArchitectureConfig,
                 images: Sequence[np.ndarray], resume: Optional[Checkpoint] = None):
        self.config = config
        self.images = list(images)
        if resume is not None:
            if resume.arch.digest() != arch.digest():
                raise ConfigError(
                    f"resume checkpoint has architecture {resume.arch.digest()}, "
                    f"config asks for {arch.digest()}"
                )
            self.network = resume.network()
            self.adam = resume.adam
            self.baseline = resume.baseline
            self.step = resume.step
        else:
            rng = np.random.default_rng(config.seed)
            self.network = CodecNetwork.initialize(arch, rng, dtype=np.float32)
            self.adam = AdamState.zeros_like(self.network.arrays())
            self.baseline = LossBaseline()
            self.step = 0
        self.history: List[StepResult] = []
        self.checkpoint_dir = Path(config.checkpoint_dir)

    # -------------------------------------------------------------------------
    # One step
    # -------------------------------------------------------------------------

    def loss_and_grads(self, batch: np.ndarray):
        """Forward and reverse pass on one batch with the current baseline.

        Returns:
            (loss variable, gradients by name, batch mean dissimilarity, over-weighted fraction)
        """
        cfg = self.config
        tape = Tape()
        trace = run_iterations(self.network, batch, cfg.iterations, cfg.k_prime, cfg.k_diffuse,
                               tape=tape)
        dissimilarity = [block_dssim(batch + DSSIM_OFFSET, r.value + DSSIM_OFFSET)
                         for r in trace.reconstructions]
        batch_mean_d = float(np.mean(dissimilarity))

        baseline = self.baseline
        if not baseline.initialized:
            baseline = _round_baseline(update_baseline(baseline, batch_mean_d))
            self.baseline = baseline

        terms: List[Variable] = []
        over = []
        for recon, d in zip(trace.reconstructions, dissimilarity):
            if cfg.loss == "dssim":
                term, weights = weighted_l1(batch, recon, baseline, tape, DSSIM_OFFSET, d)
                over.append(weights.over_weighted_fraction())
            else:
                term = plain_l1(batch, recon, tape)
            terms.append(term)
        total = terms[0]
        for term in terms[1:]:
            total = add(total, term, tape)
        loss = scale(total, 1.0 / (cfg.iterations * batch.shape[0]), tape)

        if not np.isfinite(loss.value):
            return loss, None, batch_mean_d, 0.0
        grads = reverse_pass(tape, loss, wrt=self.network.variables())
        return loss, grads, batch_mean_d, float(np.mean(over)) if over else 0.0

    def train_step(self) -> StepResult:
        """Run one optimizer step; on divergence save the last good state and raise."""
        cfg = self.config
        batch = sample_patches(self.images, cfg.patch_size, cfg.batch_size, cfg.seed, self.step)
        good = self.checkpoint()
        baseline_before = self.baseline

        loss, grads, batch_mean_d, over = self.loss_and_grads(batch)
        loss_value = float(loss.value)
        if grads is None:
            self._diverged(good, f"non-finite loss {loss_value} at step {self.step}")
        clipped = clip_global_norm(grads, cfg.max_grad_norm)
        try:
            params, adam = adam_step(self.network.arrays(), clipped, self.adam, cfg.learning_rate)
        except TrainingDivergedError as e:
            self._diverged(good, f"{e} at step {self.step}")

        self.network.load_arrays(params)
        self.adam = adam
        if baseline_before.initialized:
            self.baseline = _round_baseline(update_baseline(self.baseline, batch_mean_d))
        self.step += 1

        result = StepResult(self.step, loss_value, float(self.baseline.value),
                            global_norm(grads), over)
        self.history.append(result)
        return result

    def _diverged(self, good: Checkpoint, message: str) -> NoReturn:
        path = save_checkpoint(self.checkpoint_dir / LAST_GOOD, good)
        self.write_log()
        logger.error(f"Training diverged: {message}; last good state kept in {path}")
        raise TrainingDivergedError(message, step=self.step)

    # -------------------------------------------------------------------------
    # Run
    # -------------------------------------------------------------------------

    def checkpoint(self) -> Checkpoint:
        return Checkpoint.from_network(self.network, self.adam, self.baseline, self.step)

    def log_frame(self) -> pd.DataFrame:
        rows = [{"step": r.step, "loss": r.loss, "baseline": r.baseline} for r in self.history]
        return pd.DataFrame(rows, columns=LOG_COLUMNS)

    def write_log(self) -> Path:
        """Write the loss log, keeping earlier rows of a resumed run."""
        path = self.checkpoint_dir / LOSS_LOG
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = self.log_frame()
        if path.exists() and self.history:
            previous = pd.read_csv(path)
            previous = previous[previous["step"] < self.history[0].step]
            frame = pd.concat([previous, frame], ignore_index=True)
        frame.to_csv(path, index=False, float_format="%.9g")
        return path

    def run(self, steps: Optional[int] = None) -> TrainResult:
        """Train until ``steps`` total steps (default: the config's) have been taken."""
        target = self.config.steps if steps is None else steps
        cfg = self.config
        logger.info(
            f"Training from step {self.step} to {target}: batch {cfg.batch_size}, "
            f"{cfg.patch_size}px patches, t={cfg.iterations}, k_prime={cfg.k_prime}, "
            f"k_diffuse={cfg.k_diffuse}, lr {cfg.learning_rate}, loss {cfg.loss}"
        )
        written: List[Path] = []
        while self.step < target:
            result = self.train_step()
            if result.step % cfg.log_every == 0:
                logger.info(
                    f"step {result.step}: loss {result.loss:.5g}, baseline {result.baseline:.5g}, "
                    f"grad norm {result.grad_norm:.4g}"
                )
            if result.step % cfg.checkpoint_interval == 0 or result.step == target:
                written.append(save_checkpoint(
                    self.checkpoint_dir / f"step_{result.step:07d}.rpck", self.checkpoint()
                ))
                self.write_log()
        if self.history:
            self.write_log()
        return TrainResult(self.log_frame(), written, self.checkpoint())


def _round_baseline(baseline: LossBaseline) -> LossBaseline:
    # stored as float32 in checkpoints; keep the in-memory value identical
    return LossBaseline(float(np.float32(baseline.value)), baseline.decay, baseline.updates)


def train(config: TrainConfig, arch: ArchitectureConfig,
          images: Optional[Sequence[np.ndarray]] = None,
          resume: Optional[str] = None) -> TrainResult:
    """Train from scratch (or from a checkpoint file) according to ``config``."""
    if images is None:
        images = load_dataset(config.dataset)
    checkpoint = load_checkpoint(resume, arch) if resume else None
    trainer = Trainer(config, arch, images, checkpoint)
    return trainer.run()
