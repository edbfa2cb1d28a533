from typing import List

import numpy as np
import structlog
from scipy import stats

from app.core.rng import child_seed
from app.experiments.base import ExperimentParams, ExperimentRouter, RunContext
from app.external.csv_io import write_csv
from app.models.distributions import IntervalUnion
from app.models.reports import TRANSFER_CSV_COLUMNS
from app.models.truncation import TruncatedRegressionInstance
from app.services.trunc import trunc_service

logger = structlog.get_logger(__name__)

router = ExperimentRouter()

SWEEP_COLUMNS = [
    "alpha",
    "threshold",
    "model",
    "full_mse",
    "truncated_mse",
    "forward_ratio",
    "forward_coefficient",
    "forward_satisfied",
    "reverse_satisfied",
]


class TruncatedParams(ExperimentParams):
    alphas: List[float] = [0.5, 0.25, 0.1, 0.05, 0.01]
    n_covariates: int = 21
    slope: float = 0.5
    constant: float = 1.25
    estimates: List[float] = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]
    naive_samples: int = 2000


@router.experiment("truncated", TruncatedParams, "truncated vs non-truncated MSE over the truncation mass")
def run_truncated(ctx: RunContext) -> None:
    p: TruncatedParams = ctx.params
    covariates = np.linspace(-1.0, 1.0, p.n_covariates)
    linear = lambda x, s=p.slope: s * np.asarray(x, dtype=float)[:, 0]  # noqa: E731
    quintic = lambda x, s=p.slope: s * np.asarray(x, dtype=float)[:, 0] ** 5  # noqa: E731

    rows, reports = [], []
    for i, alpha in enumerate(p.alphas):
        for target_name, f_star in (("linear", linear), ("quintic", quintic)):
            lowest = float(np.min(f_star(covariates.reshape(-1, 1))))
            threshold = lowest + float(stats.norm.isf(alpha))
            inst = TruncatedRegressionInstance(
                covariates=covariates, f_star=f_star, truncation=IntervalUnion.half_line(threshold)
            )
            models = {"f_star": f_star}
            for c in p.estimates:
                models[f"constant({c:g})"] = lambda x, c=c: np.full(np.asarray(x).shape[0], c)
            for model_name, model in models.items():
                report = trunc_service.truncated_transfer_check(model, inst, p.constant)
                ratio = report.full_mse / report.truncated_mse if report.truncated_mse > 0 else float("inf")
                rows.append(
                    {
                        "alpha": report.alpha,
                        "threshold": threshold,
                        "model": f"{target_name}:{model_name}",
                        "full_mse": report.full_mse,
                        "truncated_mse": report.truncated_mse,
                        "forward_ratio": ratio,
                        "forward_coefficient": report.forward.coefficient,
                        "forward_satisfied": report.forward.satisfied,
                        "reverse_satisfied": report.reverse.satisfied,
                    }
                )
                reports += [report.forward, report.reverse]

        samples = trunc_service.sample_truncated_normal(
            0.0, 1.0, IntervalUnion.half_line(float(stats.norm.isf(alpha))), p.naive_samples, child_seed(ctx.seed, i)
        )
        reports.append(trunc_service.naive_mean_bound(samples, alpha, [0.0], [[1.0]], p.constant))

    ctx.add(write_csv(ctx.path("truncated_sweep.csv"), SWEEP_COLUMNS, rows))
    ctx.add(write_csv(ctx.path("truncated_reports.csv"), TRANSFER_CSV_COLUMNS, [r.csv_row() for r in reports]))
    ctx.summary["max_forward_ratio"] = max(r["forward_ratio"] for r in rows)
    ctx.summary["reverse_all_hold"] = all(r["reverse_satisfied"] for r in rows)
    ctx.summary["forward_all_hold"] = all(r["forward_satisfied"] for r in rows)
