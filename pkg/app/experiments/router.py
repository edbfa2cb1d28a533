from app.experiments import boolean, euclidean, figures, gotu, icl, truncated
from app.experiments.base import ExperimentRouter

# Create main experiment router
experiment_router = ExperimentRouter()

# Include routers
experiment_router.include_router(figures.router)
experiment_router.include_router(euclidean.router)
experiment_router.include_router(truncated.router)
experiment_router.include_router(boolean.router)
experiment_router.include_router(gotu.router)
experiment_router.include_router(icl.router)
