"""stanalyzer: local-first analysis toolkit for stuttering-therapy sessions."""

__version__ = "0.1.0"

PIPELINE_VERSION = "1.0.0"
