from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    scorer_url: str = ""
    scorer_token: str = ""
    scorer_timeout: float = Field(default=30.0, gt=0)
    scorer_max_in_flight: int = Field(default=4, ge=1)
    eps_base: float = Field(default=5.0, gt=0)
    jobs: int = Field(default=1, ge=1)
    log_level: str = "INFO"

    model_config = {
        "env_prefix": "TRACEKIT_",
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore",
    }


settings = Settings()
