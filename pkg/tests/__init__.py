"""Unit test package for tsqc."""
