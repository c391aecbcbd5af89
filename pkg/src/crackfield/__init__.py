"""crackfield: desk-scale verification toolkit for planar displacement fields
with cracks — jump-aware FE repair on dyadic disk meshes, density ball
coverings, piecewise rigidity (Korn) estimates, reflection competitors, and
cell-formula energy densities."""

__version__ = "0.1.0"
