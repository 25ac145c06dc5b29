"""Server settings, normally populated from command-line flags."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

DEFAULT_MAX_BATCH = 4


@dataclass(frozen=True)
class ServerConfig:
    model_id: str
    device: str = "cpu"
    max_batch: int = DEFAULT_MAX_BATCH
    host: str = "127.0.0.1"
    port: int = 8080
    auth_token: Optional[str] = None

    def __post_init__(self):
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if not 0 < self.port < 65536:
            raise ValueError(f"port out of range: {self.port}")
