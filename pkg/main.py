# main.py
import os
import sys

# Single-threaded BLAS must be requested before numpy is first imported.
if "--deterministic" in sys.argv:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = "1"

import argparse  # noqa: E402
from typing import Any, Dict, List, Optional  # noqa: E402

import pandas as pd  # noqa: E402
from termcolor import colored  # noqa: E402

from config import RunConfig, resolve, write_resolved_config  # noqa: E402
from src import pipeline  # noqa: E402
from src.analysis import (decode_grid, embed, image_strip, read_latents_csv, tsne,  # noqa: E402
                          write_latents_csv, write_pgm, write_tsne_csv)
from src.training import load  # noqa: E402
from src.utils.data_loader import load_mnist, reference_targets  # noqa: E402
from src.utils.errors import (CheckpointError, ConfigError, DataError,  # noqa: E402
                              NonFiniteError, NumericalAbort, TargetedVAEError,
                              UnsupportedLatentDim)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

# Fields a checkpoint passes on to analysis commands unless overridden.
INHERITED_FIELDS = ("seed", "data_dir", "split", "subset_size")

# argparse dest -> RunConfig field
FLAG_FIELDS = {
    "mode": "mode", "latent_dim": "latent_dim", "beta": "beta", "epochs": "epochs",
    "batch_size": "batch_size", "learning_rate": "learning_rate", "rotate": "rotate",
    "resample_rotations": "resample_rotations", "seed": "seed", "subset": "subset_size",
    "data": "data_dir", "split": "split", "dtype": "dtype",
    "reparameterization": "reparameterization", "out_dir": "out_dir", "wandb": "use_wandb",
    "lo": "grid_lo", "hi": "grid_hi", "steps": "grid_steps", "perplexity": "perplexity",
    "iters": "tsne_iters", "tsne_points": "tsne_points", "digit": "census_digit",
    "side": "census_side", "samples": "census_samples", "neighbors": "knn_neighbors",
}


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {field: getattr(args, dest) for dest, field in FLAG_FIELDS.items()
            if getattr(args, dest, None) is not None}


def _config(args: argparse.Namespace, inherited: Optional[Dict[str, Any]] = None) -> RunConfig:
    return resolve(args.config, _overrides(args), inherited)


def _checkpoint_config(checkpoint) -> Dict[str, Any]:
    values = checkpoint.config.to_dict()
    return {key: values[key] for key in INHERITED_FIELDS}


def _sidecar(config: RunConfig, out_path: str, **extra: Any):
    write_resolved_config(config, out_path + ".config.txt", **extra)


def _ensure_parent(path: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _stem(path: str) -> str:
    return os.path.splitext(path)[0]


def cmd_train(args: argparse.Namespace):
    config = _config(args)
    logger = pipeline.open_logger(config, config.out_dir, verbose=not args.quiet)
    try:
        pipeline.run_training(config, config.out_dir, logger, progress=not args.quiet)
    finally:
        logger.close()
    _say(args, f"checkpoint written to {os.path.join(config.out_dir, pipeline.CHECKPOINT_NAME)}")


def cmd_embed(args: argparse.Namespace):
    checkpoint = load(args.ckpt)
    config = _config(args, _checkpoint_config(checkpoint))
    _ensure_parent(args.out)
    _sidecar(config, args.out, ckpt=args.ckpt)
    records, _ = pipeline.analysis_data(config)
    latents = embed(checkpoint.state, records)
    write_latents_csv(latents, args.out)
    if args.dump_samples:
        shown = records.subset(range(min(args.dump_samples, len(records))))
        write_pgm(image_strip(shown.images), _stem(args.out) + "_samples.pgm")
        pd.DataFrame({"position": range(len(shown)), "source_index": shown.source_index,
                      "label": shown.labels,
                      "angle": shown.angles if shown.angles is not None else float("nan")}
                     ).to_csv(_stem(args.out) + "_samples.csv", index=False)
    _say(args, f"{len(latents)} latent points written to {args.out}")


def cmd_grid(args: argparse.Namespace):
    checkpoint = load(args.ckpt)
    config = _config(args)
    _ensure_parent(args.out)
    _sidecar(config, args.out, ckpt=args.ckpt)
    mosaic = decode_grid(checkpoint.state, config.grid_lo, config.grid_hi, config.grid_steps)
    write_pgm(mosaic.image(), args.out)
    _say(args, f"{mosaic.steps}x{mosaic.steps} decode grid written to {args.out}")


def cmd_tsne(args: argparse.Namespace):
    config = _config(args)
    _ensure_parent(args.out)
    _sidecar(config, args.out, input=args.input, sample=args.sample)
    latents = pipeline.tsne_sample(read_latents_csv(args.input), args.sample, config.seed)
    result = tsne(latents.points, perplexity=config.perplexity, iters=config.tsne_iters,
                  seed=config.seed)
    write_tsne_csv(latents.labels, result.embedding, args.out)
    _say(args, f"t-SNE of {len(latents)} points written to {args.out} "
               f"(final KL {result.kl_history[-1]:.4f})")


def cmd_census(args: argparse.Namespace):
    checkpoint = load(args.ckpt)
    config = _config(args, _checkpoint_config(checkpoint))
    _ensure_parent(args.out)
    _sidecar(config, args.out, ckpt=args.ckpt)
    result = pipeline.run_census(config, checkpoint, args.out,
                                 sample_path=_stem(args.out) + "_sample.pgm",
                                 members_path=_stem(args.out) + "_members.csv")
    _say(args, pipeline.render_census(result).get_string())
    _say(args, f"{result.total} records inside the cube, majority digit {result.majority}")


def cmd_targets(args: argparse.Namespace):
    config = _config(args)
    _ensure_parent(args.out)
    _sidecar(config, args.out)
    table = reference_targets(load_mnist(config.data_dir, config.split))
    write_pgm(image_strip(table.targets, columns=len(table.targets)), args.out)
    pd.DataFrame({"digit": range(len(table.targets)), "source_index": table.source_indices}
                 ).to_csv(_stem(args.out) + ".csv", index=False)
    _say(args, f"reference targets written to {args.out}")


def cmd_sweep(args: argparse.Namespace):
    config = _config(args)
    results = pipeline.sweep(config, args.betas, verbose=not args.quiet,
                             progress=not args.quiet)
    _say(args, f"sweep over {len(results)} beta values written to "
               f"{os.path.join(config.out_dir, 'sweep')}")


def cmd_repro(args: argparse.Namespace):
    config = _config(args)
    pipeline.reproduce(args.figure, config, desk=args.desk, verbose=not args.quiet,
                       progress=not args.quiet)
    _say(args, f"figure {args.figure} artifacts written to "
               f"{os.path.join(config.out_dir, f'fig{args.figure}')}")


def _say(args: argparse.Namespace, message: str):
    if not args.quiet:
        print(colored(message, "green"))


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (flags override it)")
    common.add_argument("--seed", type=int)
    common.add_argument("--deterministic", action="store_true",
                        help="single-threaded numerics for byte-identical reruns")
    common.add_argument("--quiet", action="store_true")
    return common


def _data_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--data", help="MNIST directory (env TARGETED_VAE_DATA_DIR)")
    parser.add_argument("--split", choices=("combined", "train"))
    parser.add_argument("--subset", type=int, help="seeded subset size")
    parser.add_argument("--rotate", action="store_true", default=None)


def _train_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--mode", choices=("standard", "targeted"))
    parser.add_argument("--latent-dim", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--resample-rotations", action="store_true", default=None)
    parser.add_argument("--dtype", choices=("float32", "float64"))
    parser.add_argument("--reparameterization", choices=("sigma", "sqrt_sigma"))
    parser.add_argument("--wandb", action="store_true", default=None)
    parser.add_argument("--out", dest="out_dir", help="output directory")
    _data_flags(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="targeted-vae",
        description="Targeted-output VAE on rotated MNIST: training and latent-space analysis")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("train", parents=[common], help="train one model")
    _train_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("embed", parents=[common], help="encoder means as CSV")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True, help="latent CSV path")
    p.add_argument("--dump-samples", type=int, default=0, metavar="N",
                   help="also write the first N inputs as a PGM sheet")
    _data_flags(p)
    p.set_defaults(handler=cmd_embed)

    p = sub.add_parser("grid", parents=[common], help="decoder outputs on a latent lattice")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", required=True, help="PGM path")
    p.set_defaults(handler=cmd_grid)

    p = sub.add_parser("tsne", parents=[common], help="exact t-SNE of a latent CSV")
    p.add_argument("--in", dest="input", required=True, help="latent CSV from `embed`")
    p.add_argument("--perplexity", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--sample", type=int, help="seeded subsample size")
    p.add_argument("--out", required=True, help="t-SNE CSV path")
    p.set_defaults(handler=cmd_tsne)

    p = sub.add_parser("census", parents=[common], help="cube census around a reference digit")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--digit", type=int)
    p.add_argument("--side", type=float)
    p.add_argument("--samples", type=int, help="size of the member sample sheet")
    p.add_argument("--out", required=True, help="census CSV path")
    _data_flags(p)
    p.set_defaults(handler=cmd_census)

    p = sub.add_parser("targets", parents=[common], help="reference digits as a PGM sheet")
    p.add_argument("--data")
    p.add_argument("--split", choices=("combined", "train"))
    p.add_argument("--out", required=True, help="PGM path")
    p.set_defaults(handler=cmd_targets)

    p = sub.add_parser("sweep", parents=[common], help="train and analyse one model per beta")
    p.add_argument("--betas", type=float, nargs="+", required=True)
    p.add_argument("--perplexity", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--tsne-points", type=int)
    p.add_argument("--neighbors", type=int)
    _train_flags(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("repro", parents=[common], help="all artifacts of one figure")
    p.add_argument("figure", type=int)
    p.add_argument("--desk", action="store_true", help="subset 10000, 10 epochs")
    p.add_argument("--data")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--tsne-points", type=int)
    p.add_argument("--wandb", action="store_true", default=None)
    p.set_defaults(handler=cmd_repro)
    return parser


def _fail(exc: BaseException, code: int) -> int:
    print(colored(f"error: {exc}", "red"), file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.handler(args)
    except (ConfigError, UnsupportedLatentDim) as exc:
        return _fail(exc, EXIT_CONFIG)
    except (NumericalAbort, NonFiniteError) as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except (DataError, CheckpointError, TargetedVAEError, OSError) as exc:
        return _fail(exc, EXIT_DATA)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
