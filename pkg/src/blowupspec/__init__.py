"""Spectral verification toolkit for slightly supercritical NLS self-similar profiles."""
