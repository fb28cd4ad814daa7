"""
Trainer Module for the Recurrent Priming Codec

Patch sampling, Adam with gradient clipping, checkpoints and the training loop.
"""

from .optimizer import (
    AdamState,
    adam_step,
    clip_global_norm,
    global_norm,
    BETA1,
    BETA2,
    EPSILON,
    MAX_GRAD_NORM,
)

from .dataset import (
    load_dataset,
    sample_patches,
    check_patch_size,
)

from .checkpoint import (
    Checkpoint,
    to_bytes,
    from_bytes,
    save_checkpoint,
    load_checkpoint,
)

from .training_loop import (
    TrainConfig,
    StepResult,
    TrainResult,
    Trainer,
    train,
    LOSS_MODES,
)

__all__ = [
    # Optimizer
    'AdamState',
    'adam_step',
    'clip_global_norm',
    'global_norm',
    'BETA1',
    'BETA2',
    'EPSILON',
    'MAX_GRAD_NORM',
    # Data
    'load_dataset',
    'sample_patches',
    'check_patch_size',
    # Checkpoints
    'Checkpoint',
    'to_bytes',
    'from_bytes',
    'save_checkpoint',
    'load_checkpoint',
    # Training
    'TrainConfig',
    'StepResult',
    'TrainResult',
    'Trainer',
    'train',
    'LOSS_MODES',
]
