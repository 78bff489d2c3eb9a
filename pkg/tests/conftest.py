"""
Shared fixtures. The repository root goes on sys.path the same way the
pipeline scripts do it.
"""
import os
import sys

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

import numpy as np
import pytest

from src.modules.array_model import SteeringModel


@pytest.fixture
def model15() -> SteeringModel:
    return SteeringModel(15)


@pytest.fixture
def model8() -> SteeringModel:
    return SteeringModel(8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260118)


def complex_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)
