from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Randomness
    DEFAULT_SEED: int = 20240101
    LAZY_BLOCK_SIZE: int = 1024

    # Replica execution
    DEFAULT_REPLICAS: int = 100_000
    DEFAULT_THREADS: int = 1
    CHUNK_SIZE: int = 2_000

    # Models
    REFERENCE_WINDOW_FACTOR: int = 8
    JUMP_CAP: int = 8
    ASEP_CHECKPOINTS: int = 10

    # Acceptance tolerances
    KS_TOLERANCE: float = 0.05
    CURRENT_TOLERANCE: float = 0.02
    ORACLE_KS_TOLERANCE: float = 0.01
    EXACT_TOLERANCE: float = 1e-12
    KS_ALPHA: float = 0.01

    # Output
    OUTPUT_DIR: str = "results"
    LOG_LEVEL: str = "INFO"

    # Application
    APP_NAME: str = "Six-Vertex ASEP Lab"
    DEBUG: bool = False

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
