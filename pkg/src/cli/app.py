"""
Recurrent Priming Codec - Command Line Application

Subcommands: train, compress, decompress, eval, bd, analyze, make-corpus.

Exit codes: 0 ok, 2 configuration/usage, 3 checkpoint, 4 corrupt stream,
5 evaluation domain. Analysis tables and RD curves are written as CSV.
"""

from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple
import argparse
import logging
import sys

import numpy as np
import pandas as pd

from config.settings import get_config
from src.bitstream import ContainerExtension, deserialize, measured_bpp, serialize
from src.codec import (
    CodeTensor, MAX_ITERATIONS, ProgressiveCodec, crop, denormalize, load_png, nominal_bpp,
    normalize, pad_to_tiles, save_png,
)
from src.demo_data import ToyCorpusGenerator
from src.errors import ArchitectureMismatchError, ConfigError, RpcError
from src.metrics import MetricKind
from src.rd_eval import (
    RdCurve, Variant, auc_table, bd_quality, bd_rate, curves_from_points, extend_curve, rd_points,
)
from src.sabr import allocate, apply_mask, mean_tile_error, sabr_bpp, tile_error_curves
from src.support_analysis import (
    empirical_receptive_field, iir_table, image_support, max_support_bits, min_priming_steps,
    support_table,
)
from src.trainer import Trainer, load_checkpoint, load_dataset
from .config_loader import CliConfig, load_cli_config, log_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2


# =============================================================================
# Helpers
# =============================================================================

def _parse_list(text: str, parse: Callable, what: str) -> list:
    try:
        return [parse(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(f"invalid {what} list '{text}': {e}") from e


def _parse_numbers(text: str, count: int, what: str) -> Tuple[str, ...]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise ConfigError(f"--{what} expects {count} comma-separated values, got '{text}'")
    return tuple(parts)


def _load_network(path: str):
    checkpoint = load_checkpoint(path)
    return checkpoint, checkpoint.network()


def _resolve(args: argparse.Namespace, preset: Optional[str] = None) -> CliConfig:
    return load_cli_config(getattr(args, "config", None), preset)


# =============================================================================
# train
# =============================================================================

def cmd_train(args: argparse.Namespace) -> int:
    config = _resolve(args, args.preset)
    config.train.setdefault("checkpoint_dir", get_config().CHECKPOINT_DIR)
    for key in ("seed", "steps", "dataset", "checkpoint_dir", "loss", "batch_size",
                "learning_rate", "iterations", "k_prime", "k_diffuse"):
        config.override("train", key, getattr(args, key))
    train_config = config.train_config()
    # the codec's default priming/diffusion follow the trained schedule
    config.architecture["k_prime"] = train_config.k_prime
    config.architecture["k_diffuse"] = train_config.k_diffuse
    arch = config.architecture_config()
    config.log_resolved()

    images = load_dataset(train_config.dataset)
    resume = load_checkpoint(args.resume, arch) if args.resume else None
    result = Trainer(train_config, arch, images, resume).run()

    summary = result.to_dict()
    print(f"Trained {summary['steps']} steps, final loss {summary['final_loss']}")
    for path in result.checkpoints:
        print(f"  checkpoint: {path}")
    return EXIT_OK


# =============================================================================
# compress / decompress
# =============================================================================

def cmd_compress(args: argparse.Namespace) -> int:
    config = _resolve(args)
    config.override("sabr", "target_quality", args.target_quality)
    config.override("sabr", "target_rate", args.target_rate)
    config.log_resolved()

    _, network = _load_network(args.checkpoint)
    arch = network.arch
    k_prime = arch.k_prime if args.prime is None else args.prime
    k_diffuse = arch.k_diffuse if args.diffuse is None else args.diffuse
    iterations = args.iterations
    if not 1 <= iterations <= MAX_ITERATIONS:
        raise ConfigError(f"--iterations must be in [1, {MAX_ITERATIONS}], got {iterations}")

    image = load_png(args.input)
    padded, (height, width) = pad_to_tiles(image)
    codec = ProgressiveCodec(network, k_prime, k_diffuse)
    extension = ContainerExtension(width, height, k_prime, k_diffuse, arch.digest())

    if args.sabr:
        target_rate = config.sabr["target_rate"] or iterations
        codes, recons = codec.encode(normalize(padded), MAX_ITERATIONS)
        curves = tile_error_curves(normalize(padded), recons)
        target_quality = config.sabr["target_quality"]
        if target_quality is None:
            target_quality = mean_tile_error(curves, target_rate)
        height_map = allocate(curves, target_quality, target_rate)
        masked = CodeTensor(apply_mask(codes, height_map).bits[:int(height_map.counts.max())])
        data = serialize(masked, height_map, args.entropy, extension)
        logger.info(
            f"SABR: target rate {target_rate}, target quality {target_quality:.5g}, "
            f"mean iterations {height_map.mean_iterations():.3f}"
        )
        nominal = sabr_bpp(height_map, 0, padded.shape[1], padded.shape[0])
    else:
        codes = codec.compress(normalize(padded), iterations)
        data = serialize(codes, entropy=args.entropy, extension=extension)
        nominal = nominal_bpp(iterations)

    Path(args.output).write_bytes(data)
    bpp = measured_bpp(data, width, height)
    logger.info(f"Wrote {args.output}: {len(data)} bytes")
    print(f"{args.output}: {len(data)} bytes, {bpp:.4f} bpp (nominal {nominal:.4f} bpp)")
    return EXIT_OK


def cmd_decompress(args: argparse.Namespace) -> int:
    stream = deserialize(Path(args.input).read_bytes())
    _, network = _load_network(args.checkpoint)
    arch = network.arch
    k_prime, k_diffuse = arch.k_prime, arch.k_diffuse
    size = (stream.height, stream.width)
    if stream.extension is not None:
        ext = stream.extension
        if ext.digest != arch.digest():
            raise ArchitectureMismatchError(ext.digest, arch.digest())
        k_prime, k_diffuse = ext.k_prime, ext.k_diffuse
        size = (ext.crop_height, ext.crop_width)
    log_settings({"decompress": {"input": args.input, "output": args.output,
                                 "checkpoint": args.checkpoint, "k_prime": k_prime,
                                 "k_diffuse": k_diffuse, "size": list(size)}})

    recon = ProgressiveCodec(network, k_prime, k_diffuse).decompress(stream.codes)
    save_png(args.output, np.clip(crop(denormalize(recon), size), 0.0, 1.0))
    print(f"{args.output}: {size[1]}x{size[0]}, {stream.codes.iterations} iterations")
    return EXIT_OK


# =============================================================================
# eval / bd
# =============================================================================

def cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve(args)
    config.override("eval", "variants", args.variants and _parse_list(args.variants, str, "variant"))
    config.override("eval", "metrics", args.metrics and _parse_list(args.metrics, str, "metric"))
    config.override("eval", "t_max", args.t_max)
    config.override("eval", "threads", args.threads)
    config.override("eval", "ms_ssim_scales", args.ms_ssim_scales)
    if args.allow_untrained:
        config.override("eval", "allow_untrained", True)
    settings = config.eval
    if settings["threads"] is None:
        settings["threads"] = get_config().RPC_THREADS
    config.log_resolved()

    try:
        variants = [Variant.parse(v) for v in settings["variants"]]
        metrics = [MetricKind.parse(m) for m in settings["metrics"]]
    except ValueError as e:
        raise ConfigError(str(e)) from e

    images = load_dataset(args.dataset)
    checkpoint, network = _load_network(args.checkpoint)
    points = rd_points(network, images, variants, metrics, t_max=settings["t_max"],
                       k_prime=args.prime, k_diffuse=args.diffuse, threads=settings["threads"],
                       trained_steps=checkpoint.step,
                       allow_untrained=settings["allow_untrained"],
                       ms_ssim_scales=settings["ms_ssim_scales"])
    curves = curves_from_points(points)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    stem = out.with_suffix("")
    points.to_csv(f"{stem}_points.csv", index=False, float_format="%.17g")
    by_variant: Dict[str, Dict[str, RdCurve]] = {}
    for (variant, metric), curve in curves.items():
        path = Path(f"{stem}_{variant.value}_{metric.value}.csv")
        curve.to_csv(path)
        by_variant.setdefault(variant.value, {})[metric.value] = curve
        print(f"  curve: {path}")
    table = auc_table(by_variant)
    table.to_csv(f"{stem}_auc.csv", index_label="variant", float_format="%.17g")
    print(table.to_string(float_format=lambda v: f"{v:.4f}"))
    return EXIT_OK


def cmd_bd(args: argparse.Namespace) -> int:
    log_settings({"bd": {"reference": args.reference, "test": args.test,
                         "mode": "quality" if args.quality else "rate",
                         "extend_reference": args.extend_reference}})
    reference = RdCurve.from_csv(args.reference)
    test = RdCurve.from_csv(args.test)
    if args.extend_reference is not None:
        reference = extend_curve(reference, args.extend_reference)
    if args.quality:
        print(f"BD-quality: {bd_quality(reference, test):.6f} dB")
    else:
        print(f"BD-rate: {bd_rate(reference, test):.6f} %")
    return EXIT_OK


# =============================================================================
# analyze
# =============================================================================

def cmd_analyze(args: argparse.Namespace) -> int:
    if not (args.support or args.iir or args.receptive_field is not None):
        raise ConfigError("analyze needs --support, --iir or --receptive-field")
    log_settings({"analyze": {"support": args.support, "iir": args.iir,
                              "receptive_field": args.receptive_field, "prime": args.prime,
                              "diffuse": args.diffuse, "seed": args.seed, "out": args.out}})
    tables = []

    if args.support:
        t, kp, kd = (int(v) for v in _parse_numbers(args.support, 3, "support"))
        bits = max_support_bits(t, kp, kd)
        pixels = image_support(t, kp, kd)
        print(f"support at t={t}, k_prime={kp}, k_diffuse={kd}: {bits} stacks / {pixels} pixels")
        tables.append(support_table(t, kp, kd))

    if args.iir:
        n_text, a_text, t_text = _parse_numbers(args.iir, 3, "iir")
        n, a, t_max = int(n_text), float(a_text), int(t_text)
        steps = min_priming_steps(n, a)
        print(f"{n} filter(s), a={a}: error <= a^2 after {steps} priming step(s)")
        tables.append(iir_table(n, a, t_max))

    if args.receptive_field is not None:
        rows = []
        for t in range(args.receptive_field + 1):
            rows.append(empirical_receptive_field(t, args.prime or 0, args.diffuse or 0,
                                                  seed=args.seed).to_dict())
        tables.append(pd.DataFrame(rows))

    for table in tables:
        if args.out:
            table.to_csv(args.out, index=False, mode="a" if table is not tables[0] else "w")
        print(table.to_csv(index=False), end="")
    return EXIT_OK


# =============================================================================
# make-corpus
# =============================================================================

def cmd_make_corpus(args: argparse.Namespace) -> int:
    paths = ToyCorpusGenerator(args.seed).write_corpus(args.directory, args.count, args.size)
    print(f"Wrote {len(paths)} images to {args.directory}")
    return EXIT_OK


# =============================================================================
# Parser / entry point
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rpc",
        description=f"{get_config().APP_NAME}: progressive recurrent image compression toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a codec on a PNG directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", choices=["desk", "paper-prime", "paper-diffusion"], default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--dataset")
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--prime", dest="k_prime", type=int)
    p.add_argument("--diffuse", dest="k_diffuse", type=int)
    p.add_argument("--loss", choices=["dssim", "l1"])
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("compress", help="compress a PNG into a container")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--iterations", type=int, default=MAX_ITERATIONS)
    p.add_argument("--prime", type=int)
    p.add_argument("--diffuse", type=int)
    p.add_argument("--entropy", action="store_true", help="range-code the payload")
    p.add_argument("--sabr", action="store_true", help="spatially adaptive bit rates")
    p.add_argument("--target-quality", dest="target_quality", type=float)
    p.add_argument("--target-rate", dest="target_rate", type=int)
    p.add_argument("--config", help="JSON config file (sabr section)")
    p.set_defaults(handler=cmd_compress)

    p = sub.add_parser("decompress", help="decode a container into a PNG")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(handler=cmd_decompress)

    p = sub.add_parser("eval", help="RD curves and AUC over a PNG directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--variants", help="comma list of nominal, entropy, sabr")
    p.add_argument("--metrics", help="comma list of psnr, ssim, msssim")
    p.add_argument("--out", required=True, help="CSV path; used as the prefix of every output")
    p.add_argument("--t-max", dest="t_max", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--prime", type=int)
    p.add_argument("--diffuse", type=int)
    p.add_argument("--allow-untrained", dest="allow_untrained", action="store_true")
    p.add_argument("--ms-ssim-scales", dest="ms_ssim_scales", type=int)
    p.add_argument("--config", help="JSON config file (eval section)")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("bd", help="Bjontegaard delta between two RD CSVs")
    p.add_argument("reference")
    p.add_argument("test")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--quality", action="store_true", help="BD-quality in dB")
    mode.add_argument("--rate", action="store_true", help="BD-rate in percent (default)")
    p.add_argument("--extend-reference", dest="extend_reference", type=float, metavar="BPP")
    p.set_defaults(handler=cmd_bd)

    p = sub.add_parser("analyze", help="spatial support, IIR and receptive-field tables")
    p.add_argument("--support", metavar="T,KP,KD")
    p.add_argument("--iir", metavar="N,A,TMAX")
    p.add_argument("--receptive-field", dest="receptive_field", type=int, nargs="?", const=2,
                   metavar="TMAX")
    p.add_argument("--prime", type=int)
    p.add_argument("--diffuse", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="also write the tables to this CSV")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("make-corpus", help="write a synthetic PNG corpus")
    p.add_argument("directory")
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_make_corpus)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    settings = get_config()
    logging.basicConfig(
        level=getattr(logging, str(settings.LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except RpcError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, FileNotFoundError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
