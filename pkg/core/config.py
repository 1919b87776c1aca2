"""
Crossed Bootstrap Configuration
Manages environment variables and toolkit defaults
"""
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Toolkit settings and configuration"""

    # Application
    APP_NAME: str = "Crossed Bootstrap Toolkit"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Logging
    LOG_LEVEL: str = "WARNING"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Ingest
    DUPLICATE_POLICY: str = "error"  # error, first or mean

    # Resampling
    DEFAULT_SEED: int = 20070101
    DEFAULT_REPLICATES: int = 200
    BOOTSTRAP_WORKERS: int = 1  # 1 runs replicates serially
    ENUMERATION_CAP: int = 10**6  # max R^R * C^C for exhaustive enumeration

    # Monte Carlo
    MC_BLOCK_SIZE: int = 1000  # response draws generated per block
    MC_MAX_BLOCK_ELEMENTS: int = 4_000_000  # bound on draws * N held in memory

    # Variance diagnostics
    APPROX_VALID_EPSILON: float = 0.1  # approx modes are flagged above this epsilon_N

    # Verification
    VERIFY_SE_MULTIPLIER: float = 4.0
    VERIFY_REL_TOL: float = 1e-10
    VERIFY_INCONCLUSIVE_REL_SE: float = 0.25

    # Zipf pattern generation
    ZIPF_MAX_RETRIES: int = 5
    ZIPF_MAX_PROPOSAL_ROUNDS: int = 200
    ZIPF_MAX_EPSILON: float = 0.1

    # Plot data
    PLOT_FLOAT_FORMAT: str = "%.17g"

    class Config:
        env_file = ".env"
        case_sensitive = True


# Global settings instance
settings = Settings()
