"""Analytic and Monte-Carlo bias-variance decomposition for ridge regression
on linear and random nonlinear features."""

__version__ = "0.1.0"
