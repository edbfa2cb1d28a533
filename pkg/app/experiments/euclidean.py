import math
from typing import List

import structlog

from app.core.rng import child_seed
from app.experiments.base import ExperimentParams, ExperimentRouter, RunContext
from app.external.csv_io import write_csv
from app.models.distributions import Bridge1D, Gaussian, UniformBox
from app.models.polynomial import McSpec
from app.models.reports import TRANSFER_CSV_COLUMNS
from app.services.dist import dist_service
from app.services.poly import poly_service
from app.services.transfer import transfer_service

logger = structlog.get_logger(__name__)

router = ExperimentRouter()

COEFFICIENT_COLUMNS = ["mu", "direct_ratio_lowerbound", "bridge_coefficient", "bridge_ratio_sup", "bridge_normalizer"]
ENSEMBLE_COLUMNS = ["degree", "count", "seed", "max_value", "worst_index", "bound", "within_bound"]


class GaussianCoefficientParams(ExperimentParams):
    mus: List[float] = [0.0, 1.0, 2.0, 4.0]
    degree: int = 1


@router.experiment(
    "gaussian1d-coeffs", GaussianCoefficientParams, "direct density ratio vs bridge coefficient for N(0,1) -> N(mu,1)"
)
def run_gaussian_coefficients(ctx: RunContext) -> None:
    p: GaussianCoefficientParams = ctx.params
    rows = []
    for mu in p.mus:
        entry = transfer_service.catalog_coefficient("gaussian_1d", p.degree, mu=mu)
        if mu == 0.0:
            ratio_sup = 1.0
        else:
            ratio_sup = dist_service.density_ratio_sup(Gaussian.standard(1), Bridge1D(mu=mu)).value
        rows.append(
            {
                "mu": mu,
                "direct_ratio_lowerbound": math.exp(mu * mu / 2.0),
                "bridge_coefficient": entry.coefficient,
                "bridge_ratio_sup": ratio_sup,
                "bridge_normalizer": entry.bridge.normalizer,
            }
        )
    ctx.add(write_csv(ctx.path("gaussian1d_coefficients.csv"), COEFFICIENT_COLUMNS, rows))
    ctx.summary["rows"] = len(rows)


class EnsembleParams(ExperimentParams):
    degrees: List[int] = [1, 2, 3]
    count: int = 1000
    source_lo: float = 0.0
    source_hi: float = 1.0
    target_lo: float = 0.0
    target_hi: float = 3.0
    # Frozen envelope constant: max ratio stays below K * (target width / source width).
    envelope: float = 7.0
    bridge_mus: List[float] = [1.0, 2.0]
    mc_samples: int = 100_000


@router.experiment(
    "transfer-ensemble", EnsembleParams, "random-polynomial ensemble on nested intervals and Gaussian bridge checks"
)
def run_transfer_ensemble(ctx: RunContext) -> None:
    p: EnsembleParams = ctx.params
    bound = p.envelope * (p.target_hi - p.target_lo) / (p.source_hi - p.source_lo)
    rows = []
    for d in p.degrees:
        result = transfer_service.transfer_ensemble(
            (p.source_lo, p.source_hi), (p.target_lo, p.target_hi), d, p.count, child_seed(ctx.seed, d)
        )
        rows.append(
            {
                "degree": d,
                "count": result.count,
                "seed": result.seed,
                "max_value": result.max_value,
                "worst_index": result.worst_index,
                "bound": bound,
                "within_bound": result.max_value <= bound,
            }
        )
        ctx.summary[f"ensemble_max_d{d}"] = result.max_value
    ctx.add(write_csv(ctx.path("ensemble.csv"), ENSEMBLE_COLUMNS, rows))

    reports = []
    P_uniform = UniformBox(lo=[p.source_lo], hi=[p.source_hi])
    Q_uniform = UniformBox(lo=[p.target_lo], hi=[p.target_hi])
    for d in p.degrees:
        f = poly_service.random_polynomial(1, d, child_seed(ctx.seed, 1000 + d))
        mc = McSpec(n_samples=p.mc_samples, seed=child_seed(ctx.seed, 2000 + d))
        reports.append(transfer_service.verify_transfer(f, P_uniform, Q_uniform, None, d, mc=mc, kind="uniform-nested"))
        for mu in p.bridge_mus:
            bridge = dist_service.bridge_construct("gaussian1d", mu=mu).density
            reports.append(
                transfer_service.verify_transfer(
                    f, Gaussian.standard(1), Gaussian.standard(1, [mu]), bridge, d, mc=mc, kind=f"gaussian-shift-{mu:g}"
                )
            )
    ctx.add(write_csv(ctx.path("transfer_reports.csv"), TRANSFER_CSV_COLUMNS, [r.csv_row() for r in reports]))
    ctx.summary["reports_satisfied"] = sum(r.satisfied for r in reports)
    ctx.summary["reports"] = len(reports)
