from sctkg.integrations.snowstorm.client import (
    FetchReport,
    PayloadError,
    ServerConfig,
    SnowstormClient,
    SnowstormError,
    fetch_all,
    fetch_concept_bundle,
    write_fixture,
)

__all__ = [
    "fetch_all",
    "fetch_concept_bundle",
    "FetchReport",
    "PayloadError",
    "ServerConfig",
    "SnowstormClient",
    "SnowstormError",
    "write_fixture",
]
