"""Numerical modules: array model, spectrum search, Newton systems, estimators, bench harness."""
