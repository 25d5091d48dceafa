import pytest

from rmstdesign.mcharness import table1_run, table2_run


def test_table1_reproducible_across_workers():
    a = table1_run("sData2a", reps=100, reference_reps=10, seed=3, workers=1)
    b = table1_run("sData2a", reps=100, reference_reps=10, seed=3, workers=2)
    assert a == b
    assert 0 <= a.power_unadjusted <= 1 and a.cpp_augmented is not None


def test_table1_null_has_no_predicted_power():
    row = table1_run("sData1b", reps=100, seed=1, workers=1)
    assert row.cpp_unadjusted is None and row.true_diff == 0


def test_table1_min_reps():
    with pytest.raises(ValueError):
        table1_run("sData2a", reps=10)


def test_table2_quantiles_and_bookkeeping():
    row = table2_run("sData2a", 200, reps=40, method="augmented", seed=2, workers=1)
    assert row.n_min <= row.n_q1 <= row.n_median <= row.n_q3 <= row.n_max
    assert row.unreachable == 0 and row.failed == 0 and len(row.selected_n) == 40
    assert all(n % 10 == 0 and n >= 200 for n in row.selected_n)


def test_table2_unreachable_counted():
    row = table2_run("sData2a", 200, reps=10, seed=2, n_max=210, workers=1)
    assert row.unreachable == 10


def test_table2_validation():
    with pytest.raises(ValueError):
        table2_run("sData2a", 2000, reps=10)
    with pytest.raises(ValueError):
        table2_run("sData2a", 200, reps=10, method="other")
