import pytest

from brickwork.calibration import TargetRates, bisect_increasing
from brickwork.errors import ConfigError

TABLE = "module\tsuccesses\tattempts\tpercent\nAlignment\t292\t346\t84.4\nGrasping\t292\t292\t100.0\nPlacing\t218\t292\t74.7\n"


def test_target_rates_from_table():
    t = TargetRates.from_table(TABLE)
    assert t.align_failure == pytest.approx(54 / 346)
    assert t.place_failure == pytest.approx(74 / 292)


@pytest.mark.parametrize("text", ["", "module\tpercent\n", "module\tsuccesses\tattempts\nAlignment\t1\t2\n",
                                  "module\tsuccesses\tattempts\nAlignment\t3\t2\nPlacing\t1\t1\n",
                                  "module\tsuccesses\tattempts\nAlignment\tx\t2\nPlacing\t1\t1\n"])
def test_target_table_errors(text):
    with pytest.raises(ConfigError):
        TargetRates.from_table(text)


def test_bisection_on_monotone_function():
    p, r = bisect_increasing(lambda x: x ** 2, 0.25, iterations=40, tolerance=1e-12)
    assert p == pytest.approx(0.5, abs=1e-9)


def test_bisection_on_step_function_returns_closest():
    p, r = bisect_increasing(lambda x: round(x * 10) / 10, 0.33, iterations=20)
    assert abs(r - 0.33) <= 0.05
