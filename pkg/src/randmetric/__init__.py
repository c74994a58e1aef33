"""Random Riemannian metrics on the flat torus and their distances to the flat metric."""

__version__ = "0.1.0"
