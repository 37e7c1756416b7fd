"""Excess-mortality estimation from monthly death counts with Bayesian counterfactuals."""

__version__ = "0.1.0"
