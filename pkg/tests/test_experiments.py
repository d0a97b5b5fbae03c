"""Tests for experiments module."""

import json
from dataclasses import replace
from typing import NoReturn

import numpy as np
import pytest

from cfma import experiments, pcs, scs
from cfma.errors import NoConvergenceError
from cfma.experiments import (
    TABLE1_POWER_GRID_DB,
    channel_for,
    evaluate_realization,
    merge_tallies,
    run_check,
    run_permutation_compare,
    run_ra_sweep,
    run_shard,
    run_table1,
)
from cfma.models import CapacityResult, ChannelPair, PcsSearch, SweepConfig, Uniform


@pytest.fixture
def generic_sweep() -> SweepConfig:
    """Small generic 2×2 sweep."""
    return SweepConfig(
        scenario="generic-mimo",
        r=2,
        t=2,
        dist=Uniform(0.0, 1.0),
        power_grid_db=(0.0, 10.0),
        realizations=4,
        seed=5,
    )


class TestChannelFor:
    """Tests for channel_for function."""

    def test_deterministic(self, generic_sweep: SweepConfig) -> None:
        """Test that a realization index always gives the same channel."""
        a = channel_for(generic_sweep, 2)
        b = channel_for(generic_sweep, 2)
        assert np.array_equal(a.h1, b.h1)

    def test_simo_shape(self, sample_sweep: SweepConfig) -> None:
        """Test single-antenna draws."""
        assert channel_for(sample_sweep, 0).h1.shape == (2, 1)

    def test_diagonal(self, generic_sweep: SweepConfig) -> None:
        """Test diagonal draws."""
        ch = channel_for(replace(generic_sweep, scenario="diagonal-mimo"), 0)
        assert ch.h1[0, 1] == 0.0 and ch.h2[1, 0] == 0.0


class TestRaSweep:
    """Tests for run_ra_sweep and its shards."""

    def test_shards_add_up(self, generic_sweep: SweepConfig) -> None:
        """Test that merged shard tallies equal a single pass."""
        whole = run_shard(generic_sweep, 0, 4)
        parts = merge_tallies([run_shard(generic_sweep, 0, 1), run_shard(generic_sweep, 1, 4)])
        assert parts == whole

    def test_reproducible(self, generic_sweep: SweepConfig) -> None:
        """Test that two runs with the same seed agree."""
        assert run_ra_sweep(generic_sweep) == run_ra_sweep(generic_sweep)

    def test_workers_agree(self, generic_sweep: SweepConfig) -> None:
        """Test that a multi-process run matches the in-process one."""
        assert run_ra_sweep(generic_sweep, workers=2) == run_ra_sweep(generic_sweep)

    def test_point_layout(self, generic_sweep: SweepConfig) -> None:
        """Test one point per (power, scheme) in grid order."""
        cfg = replace(generic_sweep, schemes=("scs", "scs-perm"))
        curve = run_ra_sweep(cfg)
        assert [(p.p_db, p.scheme) for p in curve.points] == [
            (0.0, "scs"),
            (0.0, "scs-perm"),
            (10.0, "scs"),
            (10.0, "scs-perm"),
        ]
        assert all(p.realizations == 4 and 0.0 <= p.r_a <= 1.0 for p in curve.points)

    def test_simo_high_power(self, sample_sweep: SweepConfig) -> None:
        """Test that entries drawn from [1, 2] always reach the sum capacity above 0 dB."""
        cfg = replace(sample_sweep, power_grid_db=(4.0, 8.0))
        curve = run_ra_sweep(cfg)
        assert curve.r_a("scs") == {4.0: 1.0, 8.0: 1.0}

    def test_errors_counted(
        self, generic_sweep: SweepConfig, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test that checker failures are tallied as errors and not as achievable."""

        def failing(*args: object, **kwargs: object) -> NoReturn:
            raise NoConvergenceError("forced")

        monkeypatch.setattr(experiments, "scs_check", failing)
        curve = run_ra_sweep(generic_sweep)
        assert all(p.errors == 4 and p.achievable == 0 for p in curve.points)

    def test_bad_workers(self, generic_sweep: SweepConfig) -> None:
        """Test that zero workers is rejected."""
        with pytest.raises(ValueError, match="workers"):
            run_ra_sweep(generic_sweep, workers=0)


class TestPermutationCompare:
    """Tests for run_permutation_compare function."""

    def test_never_worse(self, generic_sweep: SweepConfig) -> None:
        """Test that permuted precoders never lower R_A on the same realizations."""
        points = run_permutation_compare(generic_sweep)
        assert [p.p_db for p in points] == [0.0, 10.0]
        assert all(p.delta >= 0 for p in points)


class TestTable1:
    """Tests for run_table1 function."""

    def test_scs_pattern(self) -> None:
        """Test the serial-scheme column of the comparison table."""
        rows = run_table1(schemes=("scs",))
        assert [r.p_db for r in rows] == list(TABLE1_POWER_GRID_DB)
        assert [r.achievable for r in rows] == [p <= 4.0 for p in TABLE1_POWER_GRID_DB]
        assert rows[0].witness is not None and "gamma" in rows[0].witness

    @pytest.mark.slow
    def test_pcs_row(self) -> None:
        """Test the parallel-scheme row of the comparison table at every power point."""
        rows = run_table1(schemes=("pcs",))
        assert [r.p_db for r in rows] == list(TABLE1_POWER_GRID_DB)
        assert all(r.error is None for r in rows)
        # Every point where the parallel scheme is known to reach the sum capacity.
        expected = {0.0, 2.0, 4.0, 6.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0}
        assert {r.p_db for r in rows if r.achievable} >= expected
        assert all(r.witness and r.witness["a_matrix"] for r in rows if r.achievable)

    def test_capacity_failure_recorded(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that a sum-capacity failure marks every scheme at that power."""

        def failing(*args: object, **kwargs: object) -> NoReturn:
            raise NoConvergenceError("forced")

        monkeypatch.setattr(experiments, "sum_capacity", failing)
        rows = run_table1(power_grid_db=(0.0, 2.0))
        assert len(rows) == 4
        assert all(not r.achievable and r.error == "forced" for r in rows)

    def test_identity_channels(self) -> None:
        """Test a smoke run on another fixed channel."""
        ch = ChannelPair(h1=np.eye(2), h2=np.eye(2))
        rows = run_table1(ch, (0.0, 6.0), PcsSearch(entry_bound=1))
        assert len(rows) == 4
        assert all(r.error is None for r in rows)


class TestRunCheck:
    """Tests for run_check function."""

    def test_simo_sections(self, simo_channel: ChannelPair) -> None:
        """Test that single-antenna channels get the closed-form sections."""
        report = run_check(simo_channel, 10.0, PcsSearch(entry_bound=1))
        assert {"capacity", "scs", "scs-perm", "pcs", "simo", "simo_threshold"} <= set(report)
        assert "shared_svd" not in report
        json.dumps(report)

    def test_diagonal_sections(self) -> None:
        """Test that diagonal channels get the diagonal and SVD sections."""
        ch = ChannelPair(h1=np.diag([1.0, 0.8]), h2=np.diag([0.9, 1.1]))
        report = run_check(ch, 10.0, PcsSearch(entry_bound=1))
        assert "diagonal" in report
        assert "shared_svd" in report
        json.dumps(report)

    def test_generic_sections(self, table1_channel: ChannelPair) -> None:
        """Test the report for a generic square channel."""
        report = run_check(table1_channel, 1.0, PcsSearch(entry_bound=1))
        assert report["scs"]["achievable"] is True
        assert report["shared_svd"] is False
        assert "diagonal" not in report
        assert "simo" not in report

    def test_pcs_numeric_failure(
        self, table1_channel: ChannelPair, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test that a LinAlgError in the parallel check lands under its error key."""

        def failing(*args: object, **kwargs: object) -> NoReturn:
            raise np.linalg.LinAlgError("singular")

        monkeypatch.setattr(experiments, "pcs_check", failing)
        report = run_check(table1_channel, 1.0)
        assert report["pcs"] == {"error": "singular"}
        assert report["scs"]["achievable"] is True

    def test_structure_failure(
        self, table1_channel: ChannelPair, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test that a failing structure test is reported, not raised."""

        def failing(*args: object, **kwargs: object) -> NoReturn:
            raise NoConvergenceError("svd")

        monkeypatch.setattr(experiments, "structure_detect", failing)
        report = run_check(table1_channel, 1.0, PcsSearch(entry_bound=1))
        assert report["shared_svd"] == {"error": "svd"}
        assert "svd" not in report
        json.dumps(report)

    def test_capacity_failure_raises(
        self, table1_channel: ChannelPair, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test that no report is built without the sum capacity."""

        def failing(*args: object, **kwargs: object) -> NoReturn:
            raise NoConvergenceError("forced")

        monkeypatch.setattr(experiments, "sum_capacity", failing)
        with pytest.raises(NoConvergenceError, match="forced"):
            run_check(table1_channel, 1.0)


class TestEvaluateRealization:
    """Tests for evaluate_realization function."""

    def test_capacity_computed_once(
        self, table1_channel: ChannelPair, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test that every scheme shares one sum-capacity computation."""
        calls: list[float] = []
        original = experiments.sum_capacity

        def counting(ch: ChannelPair, power: float, *args: object) -> CapacityResult:
            calls.append(power)
            return original(ch, power, *args)

        def forbidden(*args: object, **kwargs: object) -> NoReturn:
            raise AssertionError("sum capacity recomputed")

        monkeypatch.setattr(experiments, "sum_capacity", counting)
        monkeypatch.setattr(scs, "sum_capacity", forbidden)
        monkeypatch.setattr(pcs, "sum_capacity", forbidden)
        verdicts = evaluate_realization(
            table1_channel, 1.0, ("scs", "scs-perm", "pcs"), PcsSearch(entry_bound=1)
        )
        assert calls == [1.0]
        assert verdicts["scs"] is True
        assert verdicts["scs-perm"] is True
        assert isinstance(verdicts["pcs"], bool)

    def test_capacity_failure_shared(
        self, table1_channel: ChannelPair, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Test that a sum-capacity failure is returned for every scheme."""

        def failing(*args: object, **kwargs: object) -> NoReturn:
            raise NoConvergenceError("forced")

        monkeypatch.setattr(experiments, "sum_capacity", failing)
        verdicts = evaluate_realization(table1_channel, 1.0, ("scs", "pcs"), PcsSearch())
        assert set(verdicts) == {"scs", "pcs"}
        assert all(isinstance(v, NoConvergenceError) for v in verdicts.values())


@pytest.mark.slow
class TestMonteCarloAnchors:
    """Tests of R_A over 10^3 seeded realizations against known curve shapes."""

    def test_simo_always_achievable(self) -> None:
        """Test R_A = 1 for two single-antenna users with entries in [1, 2] from 1 dB up."""
        cfg = SweepConfig(
            scenario="simo",
            r=2,
            t=1,
            dist=Uniform(1.0, 2.0),
            power_grid_db=(1.0, 4.0, 12.0, 24.0),
            realizations=1000,
            seed=101,
        )
        curve = run_ra_sweep(cfg, workers=4)
        assert curve.r_a("scs") == {1.0: 1.0, 4.0: 1.0, 12.0: 1.0, 24.0: 1.0}
        assert all(p.errors == 0 for p in curve.points)

    @pytest.mark.parametrize("dist", [Uniform(0.0, 1.0), Uniform(1.0, 2.0)])
    def test_diagonal_rarely_achievable(self, dist: Uniform) -> None:
        """Test that diagonal pairs almost never reach the sum capacity."""
        cfg = SweepConfig(
            scenario="diagonal-mimo",
            r=2,
            t=2,
            dist=dist,
            power_grid_db=(0.0, 12.0, 24.0),
            realizations=1000,
            seed=102,
        )
        curve = run_ra_sweep(cfg, workers=4)
        assert max(curve.r_a("scs").values()) <= 0.06

    def test_generic_unit_interval(self) -> None:
        """Test R_A < 0.2 for generic 2×2 pairs with entries in [0, 1]."""
        cfg = SweepConfig(
            scenario="generic-mimo",
            r=2,
            t=2,
            dist=Uniform(0.0, 1.0),
            power_grid_db=(4.0, 12.0, 24.0),
            realizations=1000,
            seed=103,
        )
        curve = run_ra_sweep(cfg, workers=4)
        assert max(curve.r_a("scs").values()) < 0.2

    def test_generic_shifted_interval(self) -> None:
        """Test the peak near 2-4 dB and the plateau at high power for entries in [1, 2]."""
        cfg = SweepConfig(
            scenario="generic-mimo",
            r=2,
            t=2,
            dist=Uniform(1.0, 2.0),
            power_grid_db=(2.0, 3.0, 4.0, 24.0),
            realizations=1000,
            seed=104,
        )
        r_a = run_ra_sweep(cfg, workers=4).r_a("scs")
        assert max(r_a[2.0], r_a[3.0], r_a[4.0]) > 0.85
        assert 0.65 < r_a[24.0] < 0.8

    def test_permutations_never_lose(self) -> None:
        """Test the paired comparison at high power for entries in [0, 1]."""
        cfg = SweepConfig(
            scenario="generic-mimo",
            r=2,
            t=2,
            dist=Uniform(0.0, 1.0),
            power_grid_db=(20.0, 24.0),
            realizations=1000,
            seed=105,
        )
        points = run_permutation_compare(cfg, workers=4)
        assert all(p.delta >= 0 for p in points)
        assert np.mean([p.delta for p in points]) <= 0.05
