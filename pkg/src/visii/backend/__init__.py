"""Editor backends: the frozen models the rest of the package drives."""

from __future__ import annotations

from ..errors import BackendUnavailableError
from .base import EditorBackend
from .config import ENV_CONFIG, BackendConfig, resolve_config
from .scheduler import NoiseSchedule


def load_backend(config: BackendConfig | None = None, config_path: str | None = None) -> EditorBackend:
    """Instantiate the backend named by the resolved config's model_id."""
    if config is None:
        config = resolve_config(config_path)
    family = config.model_id.split("/")[0]
    if family == "tiny-editor":
        from .tiny import TinyEditorBackend

        return TinyEditorBackend(config)
    if family == "synthetic-linear":
        from .synthetic import LinearSyntheticBackend

        return LinearSyntheticBackend(config)
    raise BackendUnavailableError(f"no backend registered for model_id {config.model_id!r}")


__all__ = [
    "BackendConfig",
    "EditorBackend",
    "ENV_CONFIG",
    "NoiseSchedule",
    "load_backend",
    "resolve_config",
]
