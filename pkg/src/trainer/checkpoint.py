"""
Checkpoints - Recurrent Priming Codec

Binary checkpoint format (little-endian, see FORMAT.md):

    magic "RPCK" | version u8 | entry count u32
    per entry: name_len u16 | name (UTF-8) | dtype u8 | ndim u8 | dims u32 * ndim | data

dtype 1 is float32 tensor data; dtype 2 is raw bytes (the architecture JSON).
The whole file is parsed and validated before anything is returned, so a
truncated or inconsistent file never leaves a model half loaded.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union
import json
import logging
import math
import os
import struct

import numpy as np

from src.codec import ArchitectureConfig, CodecNetwork
from src.errors import (
    CheckpointFormatError, EntryShapeError, MissingEntryError, UnknownEntryError,
)
from src.perceptual_loss import LossBaseline
from .optimizer import AdamState

logger = logging.getLogger(__name__)

MAGIC = b"RPCK"
VERSION = 1
DTYPE_FLOAT32 = 1
DTYPE_BYTES = 2

PREAMBLE = struct.Struct("<4sBI")
NAME_LEN = struct.Struct("<H")
TAG = struct.Struct("<BB")
DIM = struct.Struct("<I")

PARAM_PREFIX = "param/"
ADAM_M_PREFIX = "adam/m/"
ADAM_V_PREFIX = "adam/v/"
ADAM_STEP = "adam/step"
BASELINE_VALUE = "loss/baseline"
BASELINE_UPDATES = "loss/baseline_updates"
TRAIN_STEP = "train/step"
ARCHITECTURE = "meta/architecture"
SCALAR_ENTRIES = (ADAM_STEP, BASELINE_VALUE, BASELINE_UPDATES, TRAIN_STEP)


@dataclass
class Checkpoint:
    """Model parameters plus everything needed to resume training."""
    arch: ArchitectureConfig
    params: Dict[str, np.ndarray]
    adam: AdamState = field(default_factory=AdamState)
    baseline: LossBaseline = field(default_factory=LossBaseline)
    step: int = 0

    @classmethod
    def from_network(cls, network: CodecNetwork, adam: Optional[AdamState] = None,
                     baseline: Optional[LossBaseline] = None, step: int = 0) -> "Checkpoint":
        params = {n: np.asarray(a, dtype=np.float32) for n, a in network.arrays().items()}
        if adam is None:
            adam = AdamState.zeros_like(params)
        return cls(network.arch, params, adam, baseline or LossBaseline(), step)

    def network(self) -> CodecNetwork:
        return CodecNetwork(self.arch, {n: a.copy() for n, a in self.params.items()})

    @property
    def trained(self) -> bool:
        return self.step > 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "step": self.step,
            "digest": self.arch.digest(),
            "tensors": len(self.params),
            "adam": self.adam.to_dict(),
            "baseline": self.baseline.to_dict(),
        }


# =============================================================================
# Encoding
# =============================================================================

def _entry(name: str, tag: int, shape: Tuple[int, ...], data: bytes) -> bytes:
    encoded = name.encode("utf-8")
    out = NAME_LEN.pack(len(encoded)) + encoded + TAG.pack(tag, len(shape))
    out += b"".join(DIM.pack(d) for d in shape)
    return out + data


def _tensor_entry(name: str, value: np.ndarray) -> bytes:
    array = np.ascontiguousarray(value, dtype="<f4")
    return _entry(name, DTYPE_FLOAT32, array.shape, array.tobytes())


def _scalar(value: float) -> np.ndarray:
    return np.asarray(value, dtype=np.float32)


def to_bytes(checkpoint: Checkpoint) -> bytes:
    """Serialize a checkpoint; entries are written in sorted name order."""
    entries: Dict[str, bytes] = {}
    arch_json = json.dumps(checkpoint.arch.to_dict(), sort_keys=True).encode("utf-8")
    entries[ARCHITECTURE] = _entry(ARCHITECTURE, DTYPE_BYTES, (len(arch_json),), arch_json)
    for name, value in checkpoint.params.items():
        entries[PARAM_PREFIX + name] = _tensor_entry(PARAM_PREFIX + name, value)
        m = checkpoint.adam.m.get(name, np.zeros_like(value))
        v = checkpoint.adam.v.get(name, np.zeros_like(value))
        entries[ADAM_M_PREFIX + name] = _tensor_entry(ADAM_M_PREFIX + name, m)
        entries[ADAM_V_PREFIX + name] = _tensor_entry(ADAM_V_PREFIX + name, v)
    baseline = checkpoint.baseline.value
    scalars = {
        ADAM_STEP: checkpoint.adam.step,
        BASELINE_VALUE: math.nan if baseline is None else baseline,
        BASELINE_UPDATES: checkpoint.baseline.updates,
        TRAIN_STEP: checkpoint.step,
    }
    for name, value in scalars.items():
        entries[name] = _tensor_entry(name, _scalar(value))

    out = bytearray(PREAMBLE.pack(MAGIC, VERSION, len(entries)))
    for name in sorted(entries):
        out += entries[name]
    return bytes(out)


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> Path:
    """Write atomically (temporary file, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(to_bytes(checkpoint))
    os.replace(tmp, path)
    logger.info(f"Saved checkpoint {path} (step {checkpoint.step})")
    return path


# =============================================================================
# Decoding
# =============================================================================

class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError(
                f"truncated checkpoint: {what} needs {n} bytes at offset {self.pos}, "
                f"{len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def _parse_entries(data: bytes) -> Dict[str, Tuple[int, np.ndarray]]:
    cursor = _Cursor(data)
    magic, version, count = PREAMBLE.unpack(cursor.take(PREAMBLE.size, "preamble"))
    if magic != MAGIC:
        raise CheckpointFormatError(f"bad checkpoint magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointFormatError(f"checkpoint version {version}, this build reads {VERSION}")

    entries: Dict[str, Tuple[int, np.ndarray]] = {}
    for _ in range(count):
        (name_len,) = NAME_LEN.unpack(cursor.take(NAME_LEN.size, "name length"))
        try:
            name = cursor.take(name_len, "entry name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointFormatError(f"entry name is not UTF-8: {e}") from e
        tag, ndim = TAG.unpack(cursor.take(TAG.size, f"'{name}' header"))
        shape = tuple(DIM.unpack(cursor.take(DIM.size, f"'{name}' shape"))[0] for _ in range(ndim))
        size = int(np.prod(shape, dtype=np.int64))
        if tag == DTYPE_FLOAT32:
            raw = cursor.take(4 * size, f"'{name}' data")
            value = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
        elif tag == DTYPE_BYTES:
            value = np.frombuffer(cursor.take(size, f"'{name}' data"), dtype=np.uint8).copy()
        else:
            raise CheckpointFormatError(f"entry '{name}' has unknown dtype tag {tag}")
        if name in entries:
            raise CheckpointFormatError(f"duplicate entry '{name}'")
        entries[name] = (tag, value)
    if cursor.pos != len(data):
        raise CheckpointFormatError(f"{len(data) - cursor.pos} trailing bytes after the last entry")
    return entries


def _take(entries: Dict[str, Tuple[int, np.ndarray]], name: str,
          shape: Tuple[int, ...]) -> np.ndarray:
    if name not in entries:
        raise MissingEntryError(name)
    _, value = entries.pop(name)
    if value.shape != shape:
        raise EntryShapeError(name, shape, value.shape)
    return value


def from_bytes(data: bytes, arch: Optional[ArchitectureConfig] = None) -> Checkpoint:
    """Parse and validate checkpoint bytes.

    Args:
        data: File contents
        arch: Expected architecture; defaults to the one stored in the file

    Raises:
        CheckpointFormatError: bad magic, version, truncation or layout
        MissingEntryError: an expected entry is absent
        UnknownEntryError: an entry the architecture does not define is present
        EntryShapeError: an entry has the wrong shape
    """
    entries = _parse_entries(bytes(data))

    if ARCHITECTURE not in entries:
        raise MissingEntryError(ARCHITECTURE)
    tag, raw = entries.pop(ARCHITECTURE)
    if tag != DTYPE_BYTES:
        raise CheckpointFormatError(f"'{ARCHITECTURE}' must be a byte entry")
    if arch is None:
        try:
            arch = ArchitectureConfig.from_dict(json.loads(raw.tobytes().decode("utf-8")))
        except (ValueError, TypeError) as e:
            raise CheckpointFormatError(f"unreadable architecture entry: {e}") from e

    params, m, v = {}, {}, {}
    for name, shape in CodecNetwork.parameter_shapes(arch).items():
        params[name] = _take(entries, PARAM_PREFIX + name, shape)
        m[name] = _take(entries, ADAM_M_PREFIX + name, shape)
        v[name] = _take(entries, ADAM_V_PREFIX + name, shape)
    scalars = {name: float(_take(entries, name, ())) for name in SCALAR_ENTRIES}
    if entries:
        raise UnknownEntryError(sorted(entries)[0])

    baseline_value = scalars[BASELINE_VALUE]
    baseline = LossBaseline(
        value=None if math.isnan(baseline_value) else baseline_value,
        updates=int(scalars[BASELINE_UPDATES]),
    )
    adam = AdamState(m, v, int(scalars[ADAM_STEP]))
    return Checkpoint(arch, params, adam, baseline, int(scalars[TRAIN_STEP]))


def load_checkpoint(path: Union[str, Path],
                    arch: Optional[ArchitectureConfig] = None) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointFormatError(f"checkpoint not found: {path}")
    checkpoint = from_bytes(path.read_bytes(), arch)
    logger.info(
        f"Loaded checkpoint {path} (step {checkpoint.step}, digest {checkpoint.arch.digest()})"
    )
    return checkpoint
