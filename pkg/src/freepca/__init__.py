"""PCA-based temporal feature decoupling for long-video generation."""

__version__ = "0.1.0"
