import math
from typing import List, Literal

import numpy as np
from scipy import stats

from app.core.rng import child_seed
from app.experiments.base import ExperimentParams, ExperimentRouter, RunContext
from app.external.csv_io import write_csv
from app.models.distributions import Gaussian
from app.models.icl import PromptDistribution
from app.models.polynomial import McSpec
from app.models.reports import TRANSFER_CSV_COLUMNS
from app.services.icl import icl_service

router = ExperimentRouter()

# joint moves the task and the in-context covariates together
SHIFT_FIELDS = {
    "task": ("P_H",),
    "query": ("P_X_query",),
    "covariate": ("P_X",),
    "joint": ("P_H", "P_X"),
}
ShiftKind = Literal["task", "query", "covariate", "joint"]


class ICLParams(ExperimentParams):
    n: int = 1
    N: int = 20
    steps: int = 20_000
    learning_rate: float = 1e-2
    batch_size: int = 256
    eval_samples: int = 20_000
    shift_kinds: List[ShiftKind] = ["task", "query", "covariate", "joint"]
    shift_mus: List[float] = [1.0, 2.0, 4.0, 8.0]


def gaussian_prompts(n: int, N: int) -> PromptDistribution:
    standard = Gaussian.standard(n)
    return PromptDistribution(P_X=standard, P_X_query=standard, P_H=standard, N=N)


@router.experiment("icl-shift", ICLParams, "trained linear self-attention under task, query, covariate and joint shift")
def run_icl_shift(ctx: RunContext) -> None:
    p: ICLParams = ctx.params
    source = gaussian_prompts(p.n, p.N)
    params, trace = icl_service.train_lsa(
        source, steps=p.steps, learning_rate=p.learning_rate, batch_size=p.batch_size, seed=ctx.seed
    )
    ctx.add(write_csv(ctx.path("icl_training.csv"), ["step", "loss", "grad_norm"], trace.rows()))

    mc = McSpec(n_samples=p.eval_samples, seed=child_seed(ctx.seed, 1))
    trained = icl_service.population_loss(source, params, mc)
    band, _ = icl_service.loss_bands(p.n, p.N, p.N, np.eye(p.n))
    ctx.summary.update({"trained_loss": trained.value, "trained_loss_se": trained.stderr, "loss_band": band})

    rows = []
    for kind in p.shift_kinds:
        ratios = []
        for mu in p.shift_mus:
            shifted = Gaussian.standard(p.n, [mu] + [0.0] * (p.n - 1))
            target = source.model_copy(update={field: shifted for field in SHIFT_FIELDS[kind]})
            report = icl_service.shift_report(params, source, target, kind, mc)
            rows.append({"mu": mu, **report.csv_row()})
            if report.lhs > 0 and report.rhs > 0 and math.isfinite(report.coefficient):
                ratios.append((math.log(mu), math.log(report.lhs * report.coefficient / report.rhs)))
        if len(ratios) >= 2:
            fit = stats.linregress(*zip(*ratios))
            ctx.summary[f"{kind}_log_ratio_slope"] = float(fit.slope)
    ctx.add(write_csv(ctx.path("icl_shift.csv"), ["mu"] + TRANSFER_CSV_COLUMNS, rows))
