import os
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Lab settings loaded from LCSLAB_* environment variables or .env."""

    # Execution
    threads: int = os.cpu_count() or 1
    seed: int = 20240601
    log_level: str = "INFO"

    # Output storage
    output_dir: str = "./runs"

    # Oracle bookkeeping
    transcript_cap: int = 1_000_000

    # Approximation certificates
    cert_grid_points: int = 10_001
    c_delta: float = 4.0

    # Low-dimensional sampler
    lowdim_max_dim: int = 6
    proposal_budget: int = 100_000_000
    rounding_iteration_constant: float = 80.0

    # Kakeya construction
    p3_margin: int = 100
    leak_margin: int = 200
    mollifier_normalized: bool = True

    # Random-matrix instances
    c0: float = 0.05
    c_prime: float = 10.0

    # Two-sample testing
    permutations: int = 1000

    model_config = SettingsConfigDict(
        env_prefix="LCSLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )

    @property
    def output_path(self) -> Path:
        """Get absolute path for the run output directory."""
        path = Path(self.output_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path.resolve()

    @property
    def config_dir(self) -> Path:
        """Directory holding the checked-in suite configs."""
        return Path(__file__).parent / "configs"


settings = Settings()
