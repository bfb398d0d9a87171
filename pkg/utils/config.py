"""
Run configuration loading, strict validation and content hashing.
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import ValidationError

from model import RunConfig, RunStamp


class ConfigError(Exception):
    """Raised for unknown keys, invalid values or contradictory flags."""
    pass


def _merge(base: dict, updates: dict) -> dict:
    merged = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[dict[str, Any]] = None) -> RunConfig:
    """
    Resolve defaults <- JSON config file <- overrides.

    Overrides use dotted keys ("attack.sigma") and None values are ignored,
    so argparse namespaces can be passed through unchanged.

    Raises:
        ConfigError: If the document has unknown keys or invalid values
    """
    document: dict[str, Any] = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}")
        if not isinstance(document, dict):
            raise ConfigError("Config file must contain a JSON object")

    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        nested: Any = value
        for part in reversed(dotted.split(".")):
            nested = {part: nested}
        document = _merge(document, nested)

    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(str(e))


def canonical_json(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def run_stamp(config: RunConfig) -> RunStamp:
    return RunStamp(config_hash=config_hash(config), seed=config.seed)
