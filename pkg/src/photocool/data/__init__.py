"""Bundled device configurations and reference datasets."""
