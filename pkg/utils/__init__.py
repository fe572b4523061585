"""Numerical core of forenlab: tensors, spectra, grids, models, training and metrics."""
