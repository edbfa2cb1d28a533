from typing import List

from app.experiments.base import ExperimentParams, ExperimentRouter, RunContext
from app.external.csv_io import write_csv
from app.models.gotu import LinearTarget
from app.services.gotu import gotu_service

router = ExperimentRouter()


class GOTUParams(ExperimentParams):
    n: int = 50
    L: int = 2
    alpha: float = 0.1
    k: int = 0
    eps: float = 0.1
    step: float = 1e-3
    T: float = 20.0
    record_every: int = 50
    scaling_ns: List[int] = [25, 50, 100, 200]
    scaling_seeds: int = 10


@router.experiment("gotu", GOTUParams, "diagonal linear network on the holdout {x_k = 1}: trace and t*(n) scaling")
def run_gotu(ctx: RunContext) -> None:
    p: GOTUParams = ctx.params
    f_star = LinearTarget.dictator(p.n, p.k)
    net = gotu_service.init_weights(p.n, p.L, p.alpha, ctx.seed)
    trace = gotu_service.gradient_flow(net, f_star, p.k, p.step, p.T, p.record_every)
    ctx.add(write_csv(ctx.path("gotu_trace.csv"), ["t", "L_S", "L", "tau", "fhat_k"], trace.rows()))

    scaling = gotu_service.run_ensemble(
        p.scaling_ns, list(range(ctx.seed, ctx.seed + p.scaling_seeds)), p.L, p.alpha, p.step, p.T, p.record_every
    )
    rows = [run.model_dump() for run in scaling.runs]
    rows += [
        {"n": n, "L": p.L, "alpha": p.alpha, "seed": "median", "t_star": m}
        for n, m in zip(scaling.ns, scaling.median_t_star)
    ]
    ctx.add(write_csv(ctx.path("gotu_scaling.csv"), ["n", "L", "alpha", "seed", "t_star"], rows))

    ctx.summary.update(
        {
            "t_star": trace.t_star,
            "threshold": trace.threshold,
            "transfer_constant": trace.transfer_constant,
            "transfer_coupling_holds": gotu_service.transfer_coupling(trace),
            "final_seen_loss": trace.seen_loss[-1],
            "max_fhat_k": max(abs(v) for v in trace.fhat_k),
            "alpha_max": gotu_service.alpha_max(p.L, p.eps, f_star, p.k).value,
            "scaling_slope": scaling.slope_vs_log_n,
        }
    )
