# src/pipeline.py
"""Train-then-analyse recipes shared by the CLI subcommands and `repro`.

Every trained variant lives in its own directory under the output root
(`<out>/<variant>/model.ckpt`, `losses.csv`, `resolved_config.txt`, logs); a variant whose
checkpoint already exists with an identical training config is reused instead of retrained.
"""
import os
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from prettytable import PrettyTable

from config import DESK_EPOCHS, DESK_SUBSET, RESOLVED_CONFIG_NAME, RunConfig, write_resolved_config
from .analysis import (census_sample, decode_grid, embed, image_strip, knn_purity,
                       neighborhood_census, tsne, write_census_csv, write_latents_csv,
                       write_pgm, write_tsne_csv)
from .analysis.latent import CensusResult, LatentPointSet
from .training import Checkpoint, load, prepare_data, save, train
from .utils.data_loader import ImageSet, TargetTable
from .utils.errors import ConfigError
from .utils.logger import RunLogger
from .utils.loss_tracker import render_history, write_loss_csv
from .utils.random_streams import stream
from .utils.rotation import build_rotated

CHECKPOINT_NAME = "model.ckpt"
LOSS_CSV_NAME = "losses.csv"
# Draw index for the census: the records are rotated afresh, not with the training angles.
CENSUS_DRAW = 0


@dataclass(frozen=True)
class Variant:
    name: str
    mode: str
    latent_dim: int
    rotate: bool
    beta: float = 1.0

    def apply(self, config: RunConfig) -> RunConfig:
        return replace(config, mode=self.mode, latent_dim=self.latent_dim, rotate=self.rotate,
                       beta=self.beta)


@dataclass(frozen=True)
class Figure:
    title: str
    variants: Tuple[Variant, ...]
    products: Tuple[str, ...]


def _variant(mode: str, k: int, rotate: bool, beta: float = 1.0) -> Variant:
    name = f"{mode}_k{k}_{'rotated' if rotate else 'plain'}"
    if beta != 1.0:
        name += f"_beta{beta:g}"
    return Variant(name=name, mode=mode, latent_dim=k, rotate=rotate, beta=beta)


FIGURES: Dict[int, Figure] = {
    1: Figure("2-d latent scatter, unrotated digits",
              (_variant("standard", 2, False), _variant("targeted", 2, False)),
              ("scatter", "purity")),
    2: Figure("decoder output grid, unrotated digits",
              (_variant("standard", 2, False), _variant("targeted", 2, False)),
              ("grid",)),
    4: Figure("2-d latent scatter, rotated digits",
              (_variant("standard", 2, True), _variant("targeted", 2, True)),
              ("scatter", "purity")),
    5: Figure("decoder output grid, rotated digits",
              (_variant("standard", 2, True), _variant("targeted", 2, True)),
              ("grid",)),
    6: Figure("t-SNE of the 2-d latent space, rotated digits",
              (_variant("standard", 2, True), _variant("targeted", 2, True)),
              ("tsne",)),
    7: Figure("3-d latent scatter, rotated digits",
              (_variant("standard", 3, True), _variant("targeted", 3, True)),
              ("scatter", "purity")),
    8: Figure("t-SNE of the 3-d latent space, rotated digits",
              (_variant("standard", 3, True), _variant("targeted", 3, True)),
              ("tsne",)),
    9: Figure("t-SNE of the 10-d latent space",
              (_variant("standard", 10, True), _variant("targeted", 10, True),
               _variant("standard", 10, False)),
              ("tsne", "purity")),
    10: Figure("beta sweep, standard procedure, rotated digits",
               tuple(_variant("standard", 2, True, beta) for beta in (0.0, 0.1, 10.0)),
               ("scatter", "tsne", "purity")),
    11: Figure("census around the reference 8, 3-d targeted latent space",
               (_variant("targeted", 3, True),),
               ("census",)),
}

INPUT_SAMPLE_FIGURE = 3


def desk_preset(config: RunConfig) -> RunConfig:
    return replace(config, subset_size=DESK_SUBSET, epochs=DESK_EPOCHS)


def open_logger(config: RunConfig, log_dir: str, verbose: bool = True) -> RunLogger:
    return RunLogger(log_dir, use_wandb=config.use_wandb, run_config=config.to_dict(),
                     verbose=verbose)


def analysis_data(config: RunConfig, rotate: Optional[bool] = None,
                  draw: Optional[int] = None) -> Tuple[ImageSet, TargetTable]:
    """The configured (subset of the) dataset, rotated when asked, plus the reference table"""
    base, targets = prepare_data(config.train_config())
    rotate = config.rotate if rotate is None else rotate
    return (build_rotated(base, config.seed, draw) if rotate else base), targets


def run_training(config: RunConfig, run_dir: str, logger: Optional[RunLogger] = None,
                 progress: bool = True) -> Checkpoint:
    """Train per `config`, leaving checkpoint, loss CSV and resolved config in `run_dir`"""
    train_config = config.train_config()
    os.makedirs(run_dir, exist_ok=True)
    write_resolved_config(config, os.path.join(run_dir, RESOLVED_CONFIG_NAME))
    result = train(train_config, logger=logger, progress=progress)
    save(result, os.path.join(run_dir, CHECKPOINT_NAME))
    write_loss_csv(result.history, os.path.join(run_dir, LOSS_CSV_NAME))
    if logger:
        logger.info("\n" + render_history(result.history).get_string())
        logger.log_summary({"mode": config.mode, "latent_dim": config.latent_dim,
                            "beta": config.beta, "rotate": config.rotate,
                            "epochs": len(result.history),
                            "final_loss": result.history[-1]["total"]})
    return result


def trained_variant(config: RunConfig, variant: Variant, verbose: bool = True,
                    progress: bool = True) -> Tuple[Checkpoint, RunConfig, str]:
    """Checkpoint for `variant`, reusing a matching one from an earlier run"""
    variant_config = variant.apply(config)
    run_dir = os.path.join(config.out_dir, variant.name)
    path = os.path.join(run_dir, CHECKPOINT_NAME)
    stale = False
    if os.path.exists(path):
        existing = load(path)
        if existing.config == variant_config.train_config():
            return existing, variant_config, run_dir
        stale = True
    logger = open_logger(variant_config, run_dir, verbose=verbose)
    try:
        if stale:
            logger.warn(f"{path} was trained with another config; retraining {variant.name}")
        return run_training(variant_config, run_dir, logger, progress), variant_config, run_dir
    finally:
        logger.close()


def tsne_sample(latents: LatentPointSet, count: Optional[int], seed: int) -> LatentPointSet:
    """Seeded subsample (kept in record order) so exact t-SNE stays tractable"""
    if count is None or count >= len(latents):
        return latents
    chosen = np.sort(stream(seed, "tsne", 1).choice(len(latents), size=count, replace=False))
    angles = None if latents.angles is None else latents.angles[chosen]
    return LatentPointSet(points=latents.points[chosen], labels=latents.labels[chosen],
                          angles=angles)


def run_tsne(config: RunConfig, latents: LatentPointSet, path: str) -> float:
    """t-SNE of (a sample of) `latents` to CSV; returns the final KL objective"""
    picked = tsne_sample(latents, config.tsne_points, config.seed)
    result = tsne(picked.points, perplexity=config.perplexity, iters=config.tsne_iters,
                  seed=config.seed)
    write_tsne_csv(picked.labels, result.embedding, path)
    return float(result.kl_history[-1])


def run_census(config: RunConfig, checkpoint: Checkpoint, out_path: str,
               sample_path: Optional[str] = None, members_path: Optional[str] = None,
               logger: Optional[RunLogger] = None) -> CensusResult:
    """Cube census around the reference digit over a freshly rotated draw of the records"""
    records, targets = analysis_data(config, rotate=True, draw=CENSUS_DRAW)
    result = neighborhood_census(checkpoint.state, records, targets, digit=config.census_digit,
                                 side=config.census_side)
    if logger and not result.total:
        logger.warn(f"no records inside the side-{config.census_side} cube around digit "
                    f"{config.census_digit}")
    write_census_csv(result, out_path)
    if members_path:
        pd.DataFrame({"position": result.indices,
                      "source_index": records.source_index[result.indices],
                      "label": records.labels[result.indices],
                      "angle": records.angles[result.indices]}).to_csv(members_path, index=False)
    if sample_path and result.total:
        images = census_sample(records, result, config.census_samples, config.seed)
        write_pgm(image_strip(images), sample_path)
    return result


def render_census(result: CensusResult) -> PrettyTable:
    table = PrettyTable(["digit", "count"])
    for digit, count in enumerate(result.counts):
        table.add_row([digit, int(count)])
    return table


def render_purity(rows: Sequence[Dict[str, object]]) -> PrettyTable:
    table = PrettyTable(["variant", "knn purity"])
    for row in rows:
        table.add_row([row["variant"], f"{row['purity']:.4f}"])
    return table


def _run_products(config: RunConfig, variants: Sequence[Variant], products: Sequence[str],
                  figure_dir: str, logger: RunLogger, verbose: bool,
                  progress: bool) -> Dict[str, Dict[str, object]]:
    results: Dict[str, Dict[str, object]] = {}
    for variant in variants:
        checkpoint, variant_config, run_dir = trained_variant(config, variant, verbose, progress)
        out = {"run_dir": run_dir}
        prefix = os.path.join(figure_dir, variant.name)
        latents = None
        if {"scatter", "tsne", "purity"} & set(products):
            records, _ = analysis_data(variant_config)
            latents = embed(checkpoint.state, records)
        if "scatter" in products:
            out["latents"] = prefix + "_latents.csv"
            write_latents_csv(latents, out["latents"])
        if "purity" in products:
            out["purity"] = knn_purity(latents, k_neighbors=config.knn_neighbors,
                                       holdout_fraction=config.holdout_fraction, seed=config.seed)
        if "grid" in products:
            mosaic = decode_grid(checkpoint.state, config.grid_lo, config.grid_hi,
                                 config.grid_steps)
            out["grid"] = prefix + "_grid.pgm"
            write_pgm(mosaic.image(), out["grid"])
        if "tsne" in products:
            out["tsne"] = prefix + "_tsne.csv"
            out["tsne_kl"] = run_tsne(config, latents, out["tsne"])
        if "census" in products:
            out["census"] = prefix + "_census.csv"
            result = run_census(variant_config, checkpoint, out["census"],
                                sample_path=prefix + "_census_sample.pgm",
                                members_path=prefix + "_census_members.csv", logger=logger)
            out["census_counts"] = [int(c) for c in result.counts]
            out["census_majority"] = result.majority
        results[variant.name] = out
    return results


def reproduce(figure_id: int, config: RunConfig, desk: bool = False, verbose: bool = True,
              progress: bool = True) -> Dict[str, Dict[str, object]]:
    """Every artifact of one figure, under `<out>/fig<id>/`"""
    if figure_id == INPUT_SAMPLE_FIGURE:
        raise ConfigError("figure 3 is a sample of rotated inputs; "
                          "produce it with `embed --rotate --dump-samples N`")
    if figure_id not in FIGURES:
        raise ConfigError(f"unknown figure {figure_id}; choose from {sorted(FIGURES)}")
    figure = FIGURES[figure_id]
    if desk:
        config = desk_preset(config)
    figure_dir = os.path.join(config.out_dir, f"fig{figure_id}")
    os.makedirs(figure_dir, exist_ok=True)
    write_resolved_config(config, os.path.join(figure_dir, RESOLVED_CONFIG_NAME),
                          figure=figure_id, desk=desk)

    logger = open_logger(config, figure_dir, verbose=verbose)
    try:
        logger.info(f"figure {figure_id}: {figure.title}")
        results = _run_products(config, figure.variants, figure.products, figure_dir,
                                logger, verbose, progress)
        _report(logger, results)
        logger.log_summary({"figure": figure_id, "desk": desk, "variants": results})
    finally:
        logger.close()
    return results


def sweep(config: RunConfig, betas: Sequence[float], verbose: bool = True,
          progress: bool = True) -> Dict[str, Dict[str, object]]:
    """Latent scatter, t-SNE and purity for the configured model at each beta"""
    if not betas:
        raise ConfigError("sweep needs at least one beta")
    variants = [_variant(config.mode, config.latent_dim, config.rotate, float(b)) for b in betas]
    sweep_dir = os.path.join(config.out_dir, "sweep")
    os.makedirs(sweep_dir, exist_ok=True)
    write_resolved_config(config, os.path.join(sweep_dir, RESOLVED_CONFIG_NAME),
                          betas=" ".join(f"{b:g}" for b in betas))
    logger = open_logger(config, sweep_dir, verbose=verbose)
    try:
        results = _run_products(config, variants, ("scatter", "tsne", "purity"), sweep_dir,
                                logger, verbose, progress)
        _report(logger, results)
        logger.log_summary({"betas": list(betas), "variants": results})
    finally:
        logger.close()
    return results


def _report(logger: RunLogger, results: Dict[str, Dict[str, object]]):
    rows = [{"variant": name, "purity": out["purity"]} for name, out in results.items()
            if "purity" in out]
    if rows:
        logger.info("\n" + render_purity(rows).get_string())
    for name, out in results.items():
        if "census_counts" in out:
            logger.info(f"{name}: census counts {out['census_counts']}, "
                        f"majority {out['census_majority']}")
        logger.log_event("variant_done", variant=name,
                         **{k: v for k, v in out.items() if isinstance(v, (int, float, str))})
