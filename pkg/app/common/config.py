"""Application configuration settings."""

from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Process-level settings loaded from environment variables.

    Experiment parameters do not live here; they come from the scenario
    JSON document (see ``app.features.simharness.schemas.ScenarioConfig``).
    The environment is only consulted for log verbosity.
    """

    # Application
    APP_NAME: str = Field(default="OWC NOMA Simulator")
    APP_VERSION: str = Field(default="1.0.0")

    # Logging
    LOG_LEVEL: str = Field(default="WARNING")

    model_config = {
        "case_sensitive": True,
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore",  # Ignore extra fields from .env file
    }


settings = Settings()
