from typing import List

import numpy as np

from app.core.rng import child_seed, generator
from app.experiments.base import ExperimentParams, ExperimentRouter, RunContext
from app.external.csv_io import write_csv
from app.external.formats import dump_fourier_sparse
from app.models.boolean import BooleanFn, popcounts
from app.models.distributions import FrozenCoordinate
from app.services.boolean import boolean_service

router = ExperimentRouter()

REPORT_COLUMNS = [
    "family",
    "n",
    "d",
    "seen_mass",
    "tau",
    "gap",
    "gap_constant",
    "k_d",
    "condition_holds",
    "seen_mean",
    "seen_second_moment",
    "full_mean",
    "full_second_moment",
    "coefficient",
    "refined_coefficient",
    "bound_holds",
    "observed_holds",
    "status",
]


class BooleanParams(ExperimentParams):
    n: int = 12
    degrees: List[int] = [1, 2, 3]
    random_functions: int = 5


def random_low_degree(n: int, d: int, seed: int) -> BooleanFn:
    rng = generator(seed)
    sizes = popcounts(n)
    support = np.flatnonzero((sizes >= 1) & (sizes <= d))
    spectrum = np.zeros(1 << n)
    spectrum[support] = rng.standard_normal(support.size)
    f, _ = boolean_service.normalize_variance(BooleanFn(n=n, spectrum=spectrum))
    return f


@router.experiment("boolean-transfer", BooleanParams, "seen-to-unseen second moments on the hypercube, incl. dictator")
def run_boolean_transfer(ctx: RunContext) -> None:
    p: BooleanParams = ctx.params
    families = [
        ("dictator", BooleanFn.from_fourier(p.n, {1: 1.0}), FrozenCoordinate(index=0, value=-1)),
        ("linear", BooleanFn.from_fourier(p.n, {1 << i: 1.0 / np.sqrt(p.n) for i in range(p.n)}), FrozenCoordinate(index=0, value=1)),
    ]
    for d in p.degrees:
        for r in range(p.random_functions):
            f = random_low_degree(p.n, d, child_seed(ctx.seed, 100 * d + r))
            families.append((f"random-d{d}-{r}", f, FrozenCoordinate(index=0, value=1)))

    rows = []
    for name, f, seen in families:
        report = boolean_service.boolean_transfer_report(f, seen)
        row = report.model_dump()
        row.update({"family": name, "d": report.degree, "status": report.status})
        rows.append(row)
    ctx.add(write_csv(ctx.path("boolean_transfer.csv"), REPORT_COLUMNS, rows))
    ctx.add(ctx.path("dictator.fourier.txt")).write_text(dump_fourier_sparse(families[0][1]))
    ctx.summary["condition_holds"] = sum(bool(r["condition_holds"]) for r in rows)
    ctx.summary["observed_holds"] = sum(bool(r["observed_holds"]) for r in rows)
