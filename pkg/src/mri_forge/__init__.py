"""Perceptual image diffing and DeepFake forensics toolkit."""

__version__ = "0.1.0"
