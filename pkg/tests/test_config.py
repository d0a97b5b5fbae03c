"""Tests for config module."""

import pytest

from cfma.config import DEFAULT_TOLERANCES, Tolerances
from cfma.errors import ConfigValidationError


class TestTolerances:
    """Tests for Tolerances.from_env."""

    def test_defaults(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that an empty environment gives the defaults."""
        for suffix in ("MATRIX", "RANK", "ACHIEVABILITY", "WF", "STRUCTURE"):
            monkeypatch.delenv(f"CFMA_{suffix}_TOL", raising=False)
        monkeypatch.delenv("CFMA_WF_MAX_ITER", raising=False)
        assert Tolerances.from_env() == DEFAULT_TOLERANCES

    def test_overrides(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test float and integer overrides."""
        monkeypatch.setenv("CFMA_STRUCTURE_TOL", "0.05")
        monkeypatch.setenv("CFMA_WF_MAX_ITER", "50")
        tol = Tolerances.from_env()
        assert tol.structure == 0.05
        assert tol.wf_max_iter == 50
        assert tol.rank == DEFAULT_TOLERANCES.rank

    def test_not_a_number(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test error on a non-numeric value."""
        monkeypatch.setenv("CFMA_RANK_TOL", "tiny")
        with pytest.raises(ConfigValidationError, match="must be a number"):
            Tolerances.from_env()

    def test_non_positive(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test error on a non-positive tolerance."""
        monkeypatch.setenv("CFMA_MATRIX_TOL", "0")
        with pytest.raises(ConfigValidationError, match="must be positive"):
            Tolerances.from_env()

    def test_bad_iteration_cap(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test error on a zero iteration cap."""
        monkeypatch.setenv("CFMA_WF_MAX_ITER", "0")
        with pytest.raises(ConfigValidationError, match="at least 1"):
            Tolerances.from_env()

    def test_to_dict(self) -> None:
        """Test that every field is serialized."""
        data = DEFAULT_TOLERANCES.to_dict()
        assert data["achievability"] == 1e-7
        assert data["wf_max_iter"] == 10_000
