"""Service configuration: JSON file base, environment overrides on top."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..gateway import DEFAULT_API_KEY_ENV

ENV_PREFIX = "QAEXPLAIN_"


@dataclass(frozen=True)
class ServiceConfig:
    store_dir: Path = field(default_factory=lambda: Path("qaexplain-data"))
    cors_origins: tuple[str, ...] = ("*",)
    llm_endpoint: str | None = None
    llm_model: str = "gpt-3.5-turbo"
    api_key_env: str = DEFAULT_API_KEY_ENV
    audit_log: Path | None = None
    # directory of built UI assets; mounted at /ui when it exists
    static_dir: Path | None = None

    @classmethod
    def from_sources(
        cls,
        config_file: str | Path | None = None,
        env: dict[str, str] | None = None,
    ) -> "ServiceConfig":
        """File values first, then QAEXPLAIN_* environment variables win."""
        env = os.environ if env is None else env
        values: dict = {}
        if config_file is not None:
            payload = json.loads(Path(config_file).read_text(encoding="utf-8"))
            for key in (
                "storeDir",
                "corsOrigins",
                "llmEndpoint",
                "llmModel",
                "apiKeyEnv",
                "auditLog",
                "staticDir",
            ):
                if key in payload:
                    values[key] = payload[key]

        def pick(env_key: str, file_key: str, default):
            raw = env.get(ENV_PREFIX + env_key)
            if raw is not None:
                return raw
            return values.get(file_key, default)

        origins = pick("CORS_ORIGINS", "corsOrigins", ("*",))
        if isinstance(origins, str):
            origins = tuple(part.strip() for part in origins.split(",") if part.strip())
        audit = pick("AUDIT_LOG", "auditLog", None)
        static = pick("STATIC_DIR", "staticDir", None)
        return cls(
            store_dir=Path(pick("STORE_DIR", "storeDir", "qaexplain-data")),
            cors_origins=tuple(origins),
            llm_endpoint=pick("LLM_ENDPOINT", "llmEndpoint", None),
            llm_model=pick("LLM_MODEL", "llmModel", "gpt-3.5-turbo"),
            api_key_env=pick("API_KEY_ENV", "apiKeyEnv", DEFAULT_API_KEY_ENV),
            audit_log=Path(audit) if audit else None,
            static_dir=Path(static) if static else None,
        )
