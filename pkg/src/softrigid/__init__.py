"""Differentiable soft-rigid co-design simulator (MLS-MPM + XPBD)."""
__version__ = "0.1.0"
