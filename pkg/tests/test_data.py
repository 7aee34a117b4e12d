"""Tests for count records, outcome enumeration, sampling and the noise model."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blochtomo.core import DomainError
from blochtomo.data import (CountRecord, NoiseModel, StateKind, enumerate_outcomes, outcome_array,
                            sample_error, sample_mean, sample_outcome, to_positivist)

counts6 = st.lists(st.integers(0, 50), min_size=6, max_size=6)


class TestCountRecord:
    def test_accessors(self):
        c = CountRecord(29, 1, 25, 5, 15, 15)
        assert c.ups == (29, 25, 15)
        assert c.downs == (1, 5, 15)
        assert c.totals == (30, 30, 30)

    @pytest.mark.parametrize("bad", [(-1, 0, 1, 1, 1, 1), (1.5, 0, 1, 1, 1, 1), (True, 0, 1, 1, 1, 1)])
    def test_rejects_invalid(self, bad):
        with pytest.raises(DomainError):
            CountRecord(*bad)

    def test_zero_axis_detected(self):
        with pytest.raises(DomainError, match="y axis"):
            CountRecord(1, 1, 0, 0, 1, 1).require_totals()

    def test_wrong_length(self):
        with pytest.raises(DomainError, match="6 entries"):
            CountRecord.from_csv("1,2,3")

    def test_malformed_csv(self):
        with pytest.raises(DomainError):
            CountRecord.from_csv("1,2,x,4,5,6")

    def test_malformed_json(self):
        with pytest.raises(DomainError):
            CountRecord.from_json('{"nx": [1, 2]}')

    @given(counts6)
    def test_json_round_trip(self, vals):
        c = CountRecord(*vals)
        assert CountRecord.from_json(c.to_json()) == c

    @given(counts6)
    def test_csv_round_trip(self, vals):
        c = CountRecord(*vals)
        assert CountRecord.from_csv(c.to_csv()) == c


class TestSampleStatistics:
    def test_mean_and_error(self):
        assert sample_mean(29, 1) == pytest.approx(14 / 15)
        assert sample_error(15, 15) == pytest.approx(2 * 15 / 30 ** 1.5)

    def test_zero_total(self):
        with pytest.raises(DomainError):
            sample_mean(0, 0)


class TestEnumeration:
    def test_size_and_order(self):
        arr = outcome_array(2, 3, 4)
        assert arr.shape == (3 * 4 * 5, 6)
        i, j, k = 1, 2, 3
        assert tuple(arr[(i * 4 + j) * 5 + k]) == (1, 1, 2, 1, 3, 1)

    def test_totals_fixed(self):
        arr = outcome_array(5, 5, 5)
        assert np.all(arr[:, 0::2] + arr[:, 1::2] == 5)

    def test_records_match_array(self):
        recs = enumerate_outcomes(1, 1, 1)
        assert [r.as_tuple() for r in recs] == [tuple(row) for row in outcome_array(1, 1, 1).tolist()]


class TestSampling:
    def test_deterministic(self):
        a = sample_outcome((0.3, 0.1, -0.2), 0.9, 30, 30, 30, seed=7, index=3)
        b = sample_outcome((0.3, 0.1, -0.2), 0.9, 30, 30, 30, seed=7, index=3)
        assert a == b

    def test_index_changes_draw(self):
        draws = {sample_outcome((0, 0, 0), 1.0, 30, 30, 30, seed=1, index=i) for i in range(20)}
        assert len(draws) > 1

    def test_pure_state_is_certain(self):
        c = sample_outcome((0, 0, 1), 1.0, 10, 10, 10, seed=3)
        assert (c.n_z_up, c.n_z_down) == (10, 0)

    def test_sample_mean_converges(self):
        """Averaging many draws recovers eta * r."""
        ups = np.array([sample_outcome((0.5, 0, -0.5), 0.8, 50, 50, 50, seed=11, index=i).ups
                        for i in range(2000)])
        t = 2 * ups.mean(axis=0) / 50 - 1
        assert t == pytest.approx([0.4, 0.0, -0.4], abs=0.01)

    def test_rejects_unphysical(self):
        with pytest.raises(DomainError):
            sample_outcome((1, 1, 0), 1.0, 1, 1, 1, seed=0)


class TestNoise:
    def test_composition_multiplies(self):
        assert (NoiseModel(0.9) * NoiseModel(0.8)).eta == pytest.approx(0.72)

    def test_invalid_eta(self):
        with pytest.raises(DomainError):
            NoiseModel(1.2)

    def test_positivist_report(self):
        rep = to_positivist((0.5, 0.0, 0.5), NoiseModel(0.9))
        assert rep.kind is StateKind.POSITIVIST
        assert rep.vector.as_array() == pytest.approx([0.45, 0.0, 0.45])
