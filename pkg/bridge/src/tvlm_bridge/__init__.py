"""Embedding bridge: a thin HTTP wrapper around a frozen vision-language
backbone, plus a deterministic echo mode for conformance testing without
model weights."""

from .app import BridgeConfig, create_app

__all__ = ["BridgeConfig", "create_app"]

__version__ = "0.1.0"
