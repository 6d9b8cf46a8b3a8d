"""
Unit tests for TOFFE
"""

__version__ = "0.1.0"
