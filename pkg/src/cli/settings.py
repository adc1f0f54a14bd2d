from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class LabSettings(BaseSettings):
    """Process-level defaults, overridable through MUDP_* variables or a .env file."""

    model_config = SettingsConfigDict(
        env_prefix="MUDP_", env_file=".env", extra="ignore"
    )

    out_dir: str = "results"
    log_level: str = "INFO"
    n_jobs: int = Field(1, ge=-1)
    n: int = 256
    dt: float = 1e-3
