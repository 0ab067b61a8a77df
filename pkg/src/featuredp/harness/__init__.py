"""Datasets, synthetic benchmarks, sweeps and reports."""
