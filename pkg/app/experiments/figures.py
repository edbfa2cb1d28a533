"""Extrapolation of a polynomial fit against trained networks on a 2-D target"""
import math
from typing import Callable, Dict, List

import numpy as np
import structlog

from app.core.errors import TrainingDivergedError
from app.core.rng import child_seed, generator
from app.experiments.base import ExperimentParams, ExperimentRouter, RunContext
from app.external.csv_io import write_csv
from app.external.formats import dump_polynomial, save_checkpoint
from app.external.svg_heatmap import emit_svg_heatmap
from app.models.estimates import Estimate
from app.models.experiment import Heatmap
from app.services.nets import net_service
from app.services.poly import poly_service

logger = structlog.get_logger(__name__)

router = ExperimentRouter()

Predictor = Callable[[np.ndarray], np.ndarray]

MSE_COLUMNS = ["model", "repeat", "region", "mse", "mse_se", "flags"]
HEATMAP_BOX = ([-5.0, -5.0], [5.0, 5.0])


def checkerboard(x: np.ndarray) -> np.ndarray:
    return np.sin(2 * np.pi * x[:, 0]) * np.sin(2 * np.pi * x[:, 1])


def checkerboard_plus_xy(x: np.ndarray) -> np.ndarray:
    return checkerboard(x) + x[:, 0] * x[:, 1]


class FigureParams(ExperimentParams):
    n_samples: int = 10_000
    degree: int = 20
    epochs: int = 100
    rate: float = 0.02
    repeats: int = 3
    eval_samples: int = 20_000
    near_margin: float = 0.25
    wide_margin: float = 1.0
    resolution: int = 200
    value_range: float = 1.5
    checkpoints: bool = False


def sample_band(
    inner_lo, inner_hi, margin: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform points in the box grown by ``margin`` minus the box itself (``margin = 0``: the box)"""
    inner_lo, inner_hi = np.asarray(inner_lo, dtype=float), np.asarray(inner_hi, dtype=float)
    if margin <= 0:
        return rng.uniform(inner_lo, inner_hi, size=(n, inner_lo.size))
    outer_lo, outer_hi = inner_lo - margin, inner_hi + margin
    kept: List[np.ndarray] = []
    total = 0
    while total < n:
        x = rng.uniform(outer_lo, outer_hi, size=(2 * n, inner_lo.size))
        outside = np.any((x < inner_lo) | (x > inner_hi), axis=1)
        kept.append(x[outside])
        total += int(outside.sum())
    return np.concatenate(kept)[:n]


def region_mse(predict: Predictor, target: Predictor, points: np.ndarray) -> Estimate:
    err = (np.asarray(predict(points), dtype=float).ravel() - target(points)) ** 2
    return Estimate(
        value=float(err.mean()), stderr=float(err.std(ddof=1) / math.sqrt(err.size)), n_samples=err.size
    )


def _run_figure(
    ctx: RunContext, target: Predictor, box_lo: List[float], box_hi: List[float], activations: List[str]
) -> None:
    p: FigureParams = ctx.params
    rng = generator(ctx.seed)
    x = rng.uniform(box_lo, box_hi, size=(p.n_samples, 2))
    y = target(x)

    regions = {
        "seen": sample_band(box_lo, box_hi, 0.0, p.eval_samples, generator(ctx.seed, 1)),
        "near": sample_band(box_lo, box_hi, p.near_margin, p.eval_samples, generator(ctx.seed, 2)),
        "wide": sample_band(box_lo, box_hi, p.wide_margin, p.eval_samples, generator(ctx.seed, 3)),
    }

    fit = poly_service.fit_regression(x, y, p.degree, "legendre", box_lo=box_lo, box_hi=box_hi)
    ctx.add(ctx.path("polynomial.txt")).write_text(dump_polynomial(fit))
    predictors: Dict[str, Predictor] = {"polynomial": poly_service.as_function(fit)}

    rows = []
    for region, points in regions.items():
        est = region_mse(predictors["polynomial"], target, points)
        rows.append({"model": "polynomial", "repeat": 0, "region": region, "mse": est.value, "mse_se": est.stderr})

    medians: Dict[str, Dict[str, List[float]]] = {}
    for activation in activations:
        model_name = f"{activation}_net"
        per_region = medians.setdefault(model_name, {r: [] for r in regions})
        for repeat in range(p.repeats):
            net = net_service.init_mlp(activation=activation, seed=child_seed(ctx.seed, repeat))
            try:
                net, trace = net_service.train_adagrad(
                    net, x, y, epochs=p.epochs, rate=p.rate, seed=child_seed(ctx.seed, 100 + repeat)
                )
            except TrainingDivergedError as exc:
                logger.warning("network_diverged", activation=activation, repeat=repeat, error=str(exc))
                for region in regions:
                    rows.append({"model": model_name, "repeat": repeat, "region": region, "flags": "diverged"})
                    per_region[region].append(math.nan)
                continue
            if p.checkpoints:
                ctx.add(save_checkpoint(net, ctx.path(f"{model_name}_{repeat}.ckpt")))
            ctx.add(write_csv(ctx.path(f"{model_name}_{repeat}_trace.csv"), ["epoch", "mse"], trace.rows()))
            predict = lambda pts, net=net: net_service.forward(net, pts)  # noqa: E731
            if repeat == 0:
                predictors[model_name] = predict
            for region, points in regions.items():
                est = region_mse(predict, target, points)
                per_region[region].append(est.value)
                rows.append(
                    {"model": model_name, "repeat": repeat, "region": region, "mse": est.value, "mse_se": est.stderr}
                )

    for model_name, per_region in medians.items():
        for region, values in per_region.items():
            median = float(np.nanmedian(values)) if not all(math.isnan(v) for v in values) else math.nan
            rows.append({"model": model_name, "repeat": "median", "region": region, "mse": median})
            ctx.summary[f"{model_name}_{region}_median_mse"] = median
    for row in rows:
        if row["model"] == "polynomial":
            ctx.summary[f"polynomial_{row['region']}_mse"] = row["mse"]
    ctx.add(write_csv(ctx.path("region_mse.csv"), MSE_COLUMNS, rows))

    lo, hi = HEATMAP_BOX
    panels = {"target": target, **predictors}
    for name, fn in panels.items():
        heatmap = Heatmap.from_function(
            lambda pts, fn=fn: np.clip(fn(pts), -1e6, 1e6), lo, hi, p.resolution, p.value_range, title=name
        )
        ctx.add(emit_svg_heatmap(heatmap, ctx.path(f"heatmap_{name}.svg")))


@router.experiment("fig1", FigureParams, "degree-20 polynomial vs ReLU network, P = U([0,1] x [-1,1])")
def run_fig1(ctx: RunContext) -> None:
    _run_figure(ctx, checkerboard, [0.0, -1.0], [1.0, 1.0], ["relu"])


@router.experiment("fig2", FigureParams, "adds the 3x^2 - 2x^3 network, target sin sin + xy on U([-1/2,1/2]^2)")
def run_fig2(ctx: RunContext) -> None:
    _run_figure(ctx, checkerboard_plus_xy, [-0.5, -0.5], [0.5, 0.5], ["relu", "poly"])
