# Configuration Module
"""
Configuration settings for the ruletree learner
"""
import os
from dotenv import load_dotenv
# Load environment variables
load_dotenv()
from typing import Optional
try:
    from pydantic_settings import BaseSettings, SettingsConfigDict
except ImportError:
    from pydantic import BaseSettings
    SettingsConfigDict = dict


class Settings(BaseSettings):
    """Application settings with environment variable support (prefix RULETREE_)"""

    # Search Configuration
    workers: int = 1
    bruteforce_limit: int = 10_000_000
    progress_every: int = 2048
    trace_path: Optional[str] = None

    # Time budgets per dataset size tier (seconds)
    budget_small_s: float = 300.0
    budget_medium_s: float = 900.0
    budget_large_s: float = 1800.0
    small_rows: int = 1000
    large_rows: int = 5000

    # Experiment Configuration
    default_seed: int = 0
    results_dir: str = "./results"

    # Application Configuration
    app_name: str = "ruletree"
    log_level: str = "INFO"
    log_file: Optional[str] = None

    model_config = SettingsConfigDict(
        env_prefix="RULETREE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    def budget_for_rows(self, n_rows: int) -> float:
        """
        Default wall-clock budget for a dataset of the given size

        Args:
            n_rows: Number of rows in the full dataset

        Returns:
            Budget in seconds
        """
        if n_rows < self.small_rows:
            return self.budget_small_s
        if n_rows <= self.large_rows:
            return self.budget_medium_s
        return self.budget_large_s


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get application settings"""
    return settings


def load_env_file():
    """Load environment variables from .env file if it exists"""
    env_path = os.path.join(os.path.dirname(__file__), '..', '.env')
    if os.path.exists(env_path):
        load_dotenv(env_path, override=True)
        # Reload settings to pick up new env vars
        global settings
        settings = Settings()
    return settings
