import math

import pytest

from src.modules import solver_rules as R


def test_rules_validate():
    R.validate_all_rules()


def test_default_guard():
    assert R.default_guard(15) == pytest.approx(0.05 * 2 * math.pi / 15)


@pytest.mark.parametrize("raw, expected", [("4", 4), ("0", 1), ("-3", 1), ("many", 1)])
def test_threads_from_env(monkeypatch, raw, expected):
    monkeypatch.setenv("DOA_THREADS", raw)
    assert R.threads_from_env() == expected


def test_threads_default(monkeypatch):
    monkeypatch.delenv("DOA_THREADS", raising=False)
    assert R.threads_from_env() == 1


def test_log_level_from_env(monkeypatch):
    monkeypatch.setenv("DOA_LOG_LEVEL", "debug")
    assert R.log_level_from_env() == "DEBUG"
    monkeypatch.delenv("DOA_LOG_LEVEL")
    assert R.log_level_from_env() == "WARNING"
