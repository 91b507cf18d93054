import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrelay.errors import DomainError
from qrelay.security import binary_entropy, qber_cutoff, secure_bits, threshold_report


def test_secure_bits_examples():
    assert secure_bits(1.0) == 1.0
    assert secure_bits(0.945) == pytest.approx(0.385, abs=1e-3)
    # manual H2(0.055)
    h = -0.055 * math.log2(0.055) - 0.945 * math.log2(0.945)
    assert secure_bits(0.945) == pytest.approx(1 - 2 * h, abs=1e-12)


def test_cutoff():
    e = qber_cutoff()
    assert e == pytest.approx(0.1100, abs=5e-5)
    assert secure_bits(1 - e - 1e-6) == 0.0
    assert secure_bits(1 - e + 1e-6) > 0
    # QBER of exactly 11 % sits a hair inside the secure region
    assert 0 < secure_bits(0.89) < 1e-3


@pytest.mark.parametrize("bad", [-0.01, 1.01, float("nan")])
def test_domain(bad):
    with pytest.raises(DomainError):
        secure_bits(bad)
    with pytest.raises(DomainError):
        threshold_report(bad)


def test_entropy():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0


def test_threshold_examples():
    r = threshold_report(0.879)
    assert r.passes_universal_2_3 and r.passes_6state_724 and r.passes_4state_75 and r.passes_ec_80
    r = threshold_report(0.70)
    assert r.passes_universal_2_3
    assert not (r.passes_6state_724 or r.passes_4state_75 or r.passes_ec_80)
    assert not threshold_report(2 / 3).passes_universal_2_3
    assert not threshold_report(0.75).passes_4state_75
    assert set(r.as_dict()) >= {"fidelity", "secure_bits_per_coincidence"}


@given(st.floats(0, 1), st.floats(0, 1))
def test_monotone(a, b):
    lo, hi = sorted((a, b))
    if lo >= 1 - qber_cutoff():
        assert secure_bits(lo) <= secure_bits(hi) + 1e-15
    else:
        assert secure_bits(lo) == 0.0 or lo >= 0.5
    rl, rh = threshold_report(lo).as_dict(), threshold_report(hi).as_dict()
    for k, v in rl.items():
        if k.startswith("passes") and v:
            assert rh[k]
