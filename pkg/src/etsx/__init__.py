"""Exception summaries for framework code, crash localization and explanation."""

__version__ = "0.1.0"
