"""Shared constants for the test suite."""

SEED = 20240917

# fast suite
N_REPS_SIZE = 2_000
N_REPS_QUANTILE = 10_000
N_REPS_SIZE_QUANTILE = 40_000
N_REPS_ORDERING = 400

# table reproductions (--runslow)
N_REPS_TABLE = 10_000
