"""
Configuration settings for the Recurrent Priming Codec
"""

import os


class Config:
    """Base configuration"""
    # App
    APP_NAME = "Recurrent Priming Codec"

    # Runtime
    RPC_THREADS = int(os.environ.get('RPC_THREADS', '1'))
    LOG_LEVEL = os.environ.get('RPC_LOG_LEVEL', 'INFO')
    CHECKPOINT_DIR = os.environ.get('RPC_CHECKPOINT_DIR', 'checkpoints')

    # Evaluation defaults
    DEFAULT_VARIANTS = ['nominal', 'entropy', 'sabr']
    DEFAULT_METRICS = ['psnr', 'ssim', 'msssim']
    MS_SSIM_SCALES = 5

    TRAIN = {}
    ARCHITECTURE = {}


class DeskPreset(Config):
    """Laptop-scale training: small depths, 32x32 patches, 4 iterations"""
    TRAIN = {
        'learning_rate': 0.5,
        'batch_size': 4,
        'steps': 2000,
        'patch_size': 32,
        'iterations': 4,
        'k_prime': 0,
        'k_diffuse': 0,
        'checkpoint_interval': 500,
        'seed': 0,
    }
    ARCHITECTURE = {
        'encoder_depths': [32, 64, 64, 64],
        'decoder_depths': [64, 64, 32, 32],
    }


class PaperPrimePreset(Config):
    """Full-size 3-priming model"""
    TRAIN = {
        'learning_rate': 0.5,
        'batch_size': 8,
        'patch_size': 128,
        'iterations': 16,
        'k_prime': 3,
        'k_diffuse': 0,
    }
    ARCHITECTURE = {
        'encoder_depths': [64, 256, 256, 256],
        'decoder_depths': [256, 256, 128, 64],
        'k_prime': 3,
    }


class PaperDiffusionPreset(Config):
    """Full-size 3-diffusion model"""
    # Diffusion before the first iteration doubles as priming
    TRAIN = {
        'learning_rate': 0.2,
        'batch_size': 4,
        'patch_size': 128,
        'iterations': 16,
        'k_prime': 0,
        'k_diffuse': 3,
    }
    ARCHITECTURE = {
        'encoder_depths': [64, 256, 256, 256],
        'decoder_depths': [256, 256, 128, 64],
        'k_diffuse': 3,
    }


# Preset mapping
presets = {
    'desk': DeskPreset,
    'paper-prime': PaperPrimePreset,
    'paper-diffusion': PaperDiffusionPreset,
    'default': DeskPreset
}


def get_preset(name=None):
    """Get a training preset by name (RPC_PRESET or desk by default)"""
    name = name or os.environ.get('RPC_PRESET', 'desk')
    if name not in presets:
        raise KeyError(f"unknown preset '{name}' (choose from {', '.join(sorted(presets))})")
    return presets[name]


def get_config():
    """Get runtime config, re-reading the environment"""
    class RuntimeConfig(Config):
        RPC_THREADS = int(os.environ.get('RPC_THREADS', Config.RPC_THREADS))
        LOG_LEVEL = os.environ.get('RPC_LOG_LEVEL', Config.LOG_LEVEL)
        CHECKPOINT_DIR = os.environ.get('RPC_CHECKPOINT_DIR', Config.CHECKPOINT_DIR)
    return RuntimeConfig
