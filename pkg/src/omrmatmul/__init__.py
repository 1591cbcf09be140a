"""Homomorphic baby-step giant-step MatMul over RNS-BFV, with accelerator cost models."""

__version__ = "0.1.0"
