"""Concurrent evaluation harness for audio-capable chat-completions endpoints."""

__version__ = "0.1.0"
