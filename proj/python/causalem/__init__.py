"""Causal bayesian networks with latent-variable learning."""

from ._core import generate_model, identify, learn, mad, query, sample_csv

__all__ = ["generate_model", "identify", "learn", "mad", "query", "sample_csv"]
