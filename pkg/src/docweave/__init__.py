"""Dependency-ordered repository documentation with persistent memory."""

__version__ = "0.1.0"
