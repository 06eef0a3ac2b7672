"""Depth-guided masking agent lab: Python surface over the C++ core."""

from ._core import (
    ORACLE_BAND,
    Agent,
    Config,
    ConfigError,
    DataError,
    Env,
    IoError,
    ProtocolError,
    __version__,
    augment,
    evaluate_oracle,
    infonce,
    train,
)

__all__ = [
    "ORACLE_BAND",
    "Agent",
    "Config",
    "ConfigError",
    "DataError",
    "Env",
    "IoError",
    "ProtocolError",
    "__version__",
    "augment",
    "evaluate_oracle",
    "infonce",
    "train",
]
