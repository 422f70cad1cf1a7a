"""Coupled-cluster doubles (CCD) truncation variety toolkit for four electrons.

The package builds the defining equations of the CCD truncation variety in
lexicographic determinant-basis coordinates, exposes a small numerical
algebraic geometry engine (predictor-corrector path tracking, monodromy,
witness sets), and solves / classifies the truncated coupled-cluster
equations for ingested Hamiltonians.
"""

__version__ = "0.1.0"
