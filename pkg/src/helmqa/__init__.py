"""Annealing-based eigensolvers for 1D Helmholtz finite element problems."""
