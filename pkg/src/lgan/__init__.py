"""Localized generative adversarial nets at desk scale."""

__version__ = "0.1.0"
