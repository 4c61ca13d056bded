import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from piqsim.pi_state import (
    PIState,
    expect_Jz,
    fully_excited,
    ground_state,
    init_dicke,
    is_hermitian,
    populations,
    read_snapshot,
    trace,
    write_snapshot,
    zero_state,
)
from piqsim.spin_algebra import DomainError, block_list, multiplicity

from .strategies import random_pi_state


def test_init_dicke_examples():
    assert init_dicke(2, 2, 2).element(2, 2, 2) == 1
    assert init_dicke(2, 0, 0).element(0, 0, 0) == 1
    s = init_dicke(4, 2, -2)
    assert s.element(2, -2, -2) == pytest.approx(1 / 3, abs=1e-16)
    assert trace(s) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("args", [(2, 1, 1), (3, 2, 0), (4, 2, 4), (4, 2, 1)])
def test_init_dicke_domain(args):
    with pytest.raises(DomainError):
        init_dicke(*args)


def test_trace_examples():
    assert trace(zero_state(5)) == 0
    mix = PIState(2, {2: np.diag([0.5, 0, 0]), 0: np.array([[0.5]])})
    assert trace(mix) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("N", range(1, 31))
def test_every_dicke_state_has_unit_trace(N):
    for b in block_list(N):
        for twoM in range(-b.twoJ, b.twoJ + 1, 2):
            assert trace(init_dicke(N, b.twoJ, twoM)) == pytest.approx(1.0, abs=1e-13)


def test_expect_jz_examples():
    assert expect_Jz(fully_excited(7)) == pytest.approx(3.5)
    assert expect_Jz(ground_state(7)) == pytest.approx(-3.5)
    assert expect_Jz(init_dicke(4, 2, 0)) == 0


def test_populations_order_and_values():
    assert populations(init_dicke(2, 2, 2)) == [(0, 0, 0.0), (2, 2, 1.0), (2, 0, 0.0), (2, -2, 0.0)]
    assert all(v == 0 for *_, v in populations(zero_state(6)))
    mix = PIState(2, {2: np.diag([0.5, 0, 0]), 0: np.array([[0.5]])})
    nonzero = {(tj, tm): v for tj, tm, v in populations(mix) if v}
    assert nonzero == {(0, 0): 0.5, (2, 2): 0.5}


def test_block_shape_checked():
    with pytest.raises(DomainError):
        PIState(2, {2: np.zeros((2, 2))})
    with pytest.raises(DomainError):
        PIState(2, {4: np.zeros((5, 5))})


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_vector_roundtrip(N, seed):
    s = random_pi_state(N, seed)
    back = PIState.from_vector(N, s.to_vector())
    for tj in s.blocks:
        np.testing.assert_array_equal(back.blocks[tj], s.blocks[tj])
    assert is_hermitian(s)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_snapshot_roundtrip(tmp_path_factory, N, seed):
    s = random_pi_state(N, seed)
    path = tmp_path_factory.mktemp("snap") / "state.csv"
    write_snapshot(s, path)
    back = read_snapshot(path, N)
    for tj in s.blocks:
        np.testing.assert_array_equal(back.blocks[tj], s.blocks[tj])


def test_degeneracy_weighting_in_random_states():
    s = random_pi_state(9, 3)
    manual = sum(multiplicity(9, tj) * np.trace(blk).real for tj, blk in s.blocks.items())
    assert trace(s) == pytest.approx(manual, rel=1e-14)
    assert trace(s) == pytest.approx(1.0, abs=1e-14)
