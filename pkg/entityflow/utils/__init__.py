"""Utility functions for entityflow."""

from entityflow.utils.file_validator import FileValidator, validate_file
from entityflow.utils.logger import get_logger, setup_logger

__all__ = ["FileValidator", "validate_file", "get_logger", "setup_logger"]
