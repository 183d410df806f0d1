"""Tests for entityflow."""
