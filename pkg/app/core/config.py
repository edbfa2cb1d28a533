from pydantic_settings import BaseSettings, SettingsConfigDict
from pathlib import Path


class Settings(BaseSettings):
    """Library and experiment settings loaded from environment variables"""

    model_config = SettingsConfigDict(
        env_prefix="POLYTRANSFER_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",  # Ignore unrelated environment variables
    )

    # Application
    OUTPUT_ROOT: Path = Path("./results")
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = False

    # Universal constants left abstract by the theory; every report prints the value used
    CW_CONSTANT: float = 1.0
    TRUNCATION_CONSTANT: float = 1.0
    BOOLEAN_GAP_CONSTANT: float = 1.0
    ICL_CONSTANT: float = 1.0
    ICL_EXPONENT: int = 10
    GOTU_THRESHOLD: float = 0.25
    GOTU_TIME_CONSTANT: float = 1.0

    # Density-ratio search
    RATIO_BOX_SIGMAS: float = 8.0
    RATIO_GRID_POINTS: int = 2001
    RATIO_GRID_BUDGET: int = 250_000

    # Sampling
    REJECTION_FALLBACK_RATE: float = 1e-3
    REJECTION_FLOOR_RATE: float = 1e-6
    MASS_FLOOR_MC: float = 1e-3
    MASS_FLOOR_QUADRATURE: float = 1e-6
    MC_CHUNK_SIZE: int = 65_536

    # Polynomials
    RESTRICTED_DEGREE_TOL: float = 1e-8
    DEFAULT_RIDGE: float = 1e-10


# Create global settings instance
settings = Settings()
