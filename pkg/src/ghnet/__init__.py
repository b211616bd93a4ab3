"""Gamma/hadron separation with a multilayer perceptron and self-organizing maps."""

__version__ = "0.1.0"
