import json

import numpy as np
import pytest

from carnotheat.estimate import Estimate, LimitReport, extrapolate


def test_estimate_basics():
    e = Estimate(2.0, 0.1)
    assert float(e) == 2.0
    assert e.within(2.25, k=3) and not e.within(2.4, k=3)
    s = e.scaled(-2.0)
    assert s.value == -4.0 and s.error == pytest.approx(0.2)
    with pytest.raises(ValueError):
        Estimate(1.0, -1.0)


def test_extrapolate_recovers_linear_model():
    t = np.array([0.4, 0.2, 0.1, 0.05])
    est = extrapolate(t, 3.0 + 2.0 * t, rate=1.0)
    assert est.value == pytest.approx(3.0, abs=1e-12)
    assert est.breakdown["slope"] == pytest.approx(2.0)
    assert est.error == pytest.approx(0.0, abs=1e-12)


def test_extrapolate_model_term_flags_curvature():
    t = np.array([0.4, 0.2, 0.1, 0.05])
    est = extrapolate(t, 1.0 + t + 5 * t ** 2, rate=1.0)
    assert est.breakdown["model"] > 0
    assert abs(est.value - 1.0) <= est.error * 3


def test_extrapolate_at_one():
    s = np.array([0.9, 0.95, 0.99])
    est = extrapolate(s, 2.0 - 0.5 * (1 - s), rate=1.0, limit_at=1.0)
    assert est.value == pytest.approx(2.0)
    with pytest.raises(ValueError):
        extrapolate([0.1], [1.0])


def test_limit_report_serialization():
    lim = Estimate(1.01, 0.02, "extrapolation")
    rep = LimitReport("x", "t", [0.4, 0.2, 0.1], [1.2, 1.1, 1.05], [0.01] * 3, lim, 0.0, 1.0)
    assert rep.ratio == pytest.approx(1.01)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "param,value,error,target,ratio" and len(lines) == 5
    doc = json.loads(rep.to_json())
    assert doc["schema_version"] == 1 and doc["limit"]["value"] == 1.01
    with pytest.raises(ValueError):
        LimitReport("x", "t", [0.4, 0.1, 0.2], [1, 1, 1], [0] * 3, lim, 0.0, 1.0)
