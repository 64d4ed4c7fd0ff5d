"""Discrete Bayesian-network belief propagation toolkit."""
