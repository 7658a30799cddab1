"""Tests for tko-noise."""
