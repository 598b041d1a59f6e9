"""Weil-Petersson geometry of hyperbolic surfaces: geodesic-length gradients,
their pairings, the operator Delta and the curvature tensor."""

__version__ = "0.1.0"
