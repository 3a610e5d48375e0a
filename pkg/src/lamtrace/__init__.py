"""Explicit-formula checks for elliptic curves over finite fields, with p-adic and Tate-module models."""

__version__ = "0.1.0"
