import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from piqsim.analytic import (
    TwoAtomState,
    meanfield_delay_estimate,
    meanfield_delay_ratio,
    meanfield_height,
    meanfield_intensity,
    meanfield_trajectory,
    subradiant_intensity,
    subradiant_population,
    two_atom_intensity,
    two_atom_solution,
)
from piqsim.dynamics import SystemParams, build_rate_table, evolve, intensity, rhs
from piqsim.pi_state import init_dicke
from piqsim.spin_algebra import DomainError, block_list, multiplicity

from .strategies import random_pi_state

FIELDS = ("p11", "p00", "pmm", "singlet", "c10", "c1m", "c0m")


def as_array(s):
    return np.array([getattr(s, f) for f in FIELDS], dtype=complex)


def markov_pair(u):
    # maps u in [0, 1] onto dgamma in [0, 2]
    return SystemParams.from_dgamma(2, 2.0 * u)


def random_two_atom_state(seed):
    return TwoAtomState.from_pi(random_pi_state(2, seed))


def test_identity_at_zero():
    p = SystemParams.from_dgamma(2, 0.4, 1.1)
    init = random_two_atom_state(1)
    np.testing.assert_allclose(as_array(two_atom_solution(p, init, 0.0)), as_array(init), atol=1e-15)


def test_pure_superradiance_limit():
    p = SystemParams.from_dgamma(2, 0.0)
    for t in (0.1, 1.0, 4.0):
        s = two_atom_solution(p, TwoAtomState.excited(), t)
        assert s.p00 == pytest.approx(2 * t * math.exp(-2 * t), rel=1e-14)


def test_singlet_decays_alone():
    p = SystemParams.from_dgamma(2, 0.7)
    for t in (0.5, 3.0):
        s = two_atom_solution(p, TwoAtomState(singlet=1.0), t)
        assert s.singlet == pytest.approx(math.exp(-0.7 * t), rel=1e-14)
        assert s.p11 == 0 and s.p00 == 0
        assert s.pmm == pytest.approx(1 - math.exp(-0.7 * t), rel=1e-13)


@pytest.mark.parametrize("dg", [0.0, 1e-10, 0.3, 1.0, 2.0 - 1e-10, 2.0])
def test_limits_are_continuous(dg):
    p = SystemParams.from_dgamma(2, dg, 0.5)
    init = random_two_atom_state(4)
    near = SystemParams.from_dgamma(2, min(max(dg + 1e-7, 0.0), 2.0) if dg < 2 else 2.0 - 1e-7, 0.5)
    a = as_array(two_atom_solution(p, init, 2.0))
    b = as_array(two_atom_solution(near, init, 2.0))
    np.testing.assert_allclose(a, b, atol=1e-5)
    assert np.all(np.isfinite(a))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_solution_satisfies_master_equation(u, ddd, seed):
    """Finite-difference residual against the projected equations."""
    p = SystemParams.from_dgamma(2, 2.0 * u, ddd)
    table = build_rate_table(p)
    init = random_two_atom_state(seed)
    h = 1e-4
    for t in (0.3, 1.7):
        plus = as_array(two_atom_solution(p, init, t + h))
        minus = as_array(two_atom_solution(p, init, t - h))
        fd = (plus - minus) / (2 * h)
        exact = as_array(TwoAtomState.from_pi(rhs(two_atom_solution(p, init, t).to_pi(), table)))
        np.testing.assert_allclose(fd, exact, atol=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_matches_numerical_evolution(u, ddd, seed):
    p = SystemParams.from_dgamma(2, 2.0 * u, ddd)
    init = random_two_atom_state(seed)
    t = np.concatenate([[0.0], np.logspace(-3, 1, 99)])
    traj = evolve(p, init.to_pi(), 10.0, sample_grid=t, populations_only=False)
    for tk, s in zip(t, traj.states):
        got = as_array(TwoAtomState.from_pi(s))
        np.testing.assert_allclose(got, as_array(two_atom_solution(p, init, tk)), atol=1e-8)


def test_real_elements_sum_to_one():
    p = SystemParams.from_dgamma(2, 0.6, 2.0)
    init = random_two_atom_state(9)
    for t in (0.0, 0.5, 5.0, 50.0):
        s = two_atom_solution(p, init, t)
        total = s.p11 + s.p00 + s.pmm + s.singlet
        assert total == pytest.approx(init.p11 + init.p00 + init.pmm + init.singlet, abs=1e-14)
        assert all(-1e-15 <= v <= 1 + 1e-15 for v in (s.p11, s.p00, s.pmm, s.singlet))


def test_two_atom_solution_domain():
    with pytest.raises(DomainError):
        two_atom_solution(SystemParams.from_dgamma(3, 0.1), TwoAtomState.excited(), 1.0)
    with pytest.raises(DomainError):
        two_atom_solution(SystemParams.from_dgamma(2, 0.1), TwoAtomState.excited(), -1.0)


def test_two_atom_intensity_examples():
    t = np.linspace(0, 8, 17)
    pure = SystemParams.from_dgamma(2, 0.0)
    indep = SystemParams.from_dgamma(2, 1.0)
    for tk in t:
        assert two_atom_intensity(pure, tk) == pytest.approx(2 * math.exp(-2 * tk) * (1 + 2 * tk), rel=1e-13)
        assert two_atom_intensity(indep, tk) == pytest.approx(2 * math.exp(-tk), rel=1e-13)
    for dg in (0.0, 0.5, 1.3, 2.0):
        assert two_atom_intensity(SystemParams.from_dgamma(2, dg), 0.0) == pytest.approx(2)


@given(st.floats(0, 1), st.floats(0, 20))
def test_two_atom_intensity_consistent_with_solution(u, t):
    p = markov_pair(u)
    s = two_atom_solution(p, TwoAtomState.excited(), t)
    assert two_atom_intensity(p, t) == pytest.approx(intensity(s.to_pi(), p), abs=1e-10)


# -- mean field ------------------------------------------------------------

def test_meanfield_examples():
    assert meanfield_trajectory(50, 0.8, 0.3, 0.3)[0] == pytest.approx(0.5)
    assert meanfield_trajectory(50, 0.8, 0.3, 1e3)[0] == pytest.approx(0.0, abs=1e-300)
    assert meanfield_intensity(40, 0.5, 0.2, 0.2) == pytest.approx(40**2 * 0.5 / 4)
    assert meanfield_height(40, 0.5) == 200
    assert meanfield_delay_ratio(0.5) == pytest.approx(2)
    assert meanfield_delay_estimate(100, 1.0) == pytest.approx(math.log(100) / 100)
    with pytest.raises(DomainError):
        meanfield_trajectory(10, 0.0, 0.1, 0.0)
    with pytest.raises(DomainError):
        meanfield_delay_ratio(1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 500), st.floats(0.05, 1.0), st.floats(0, 1), st.floats(-5, 5),
       st.floats(-2, 2))
def test_meanfield_odes(N, gamma, u, ddd, theta0):
    t_I = u * math.log(N + 1) / (N * gamma)
    h = 1e-5 / (N * gamma)
    for x in (-3.0, -0.5, 0.0, 0.7, 4.0):
        t = t_I + x / (N * gamma)
        (pm, thm), (pp, thp) = (meanfield_trajectory(N, gamma, t_I, tk, ddd, theta0)
                                for tk in (t - h, t + h))
        p, th = meanfield_trajectory(N, gamma, t_I, t, ddd, theta0)
        # residuals scaled to the natural rate N gamma
        assert abs((pp - pm) / (2 * h) + N * gamma * p * (1 - p)) / (N * gamma) < 1e-8
        assert abs((thp - thm) / (2 * h) + ddd * N * (1 - p)) / (N * gamma) < 1e-8
    assert meanfield_trajectory(N, gamma, t_I, 0.0, ddd, theta0)[1] == pytest.approx(theta0, abs=1e-12)


def test_meanfield_extreme_times_are_finite():
    p, th = meanfield_trajectory(10**6, 1.0, 1e-3, np.array([0.0, 1e3]), 1.0)
    assert np.all(np.isfinite(p)) and np.all(np.isfinite(th))


def test_meanfield_intensity_is_logistic_rate():
    N, g, t_I = 80, 0.7, 0.05
    t = np.linspace(0, 0.3, 31)
    p, _ = meanfield_trajectory(N, g, t_I, t)
    np.testing.assert_allclose(meanfield_intensity(N, g, t_I, t), N * N * g * p * (1 - p), rtol=1e-12)


# -- subradiance -----------------------------------------------------------

@pytest.mark.parametrize("N", [4, 7, 10])
def test_subradiant_initial_and_diagonal_values(N):
    for b in block_list(N):
        assert subradiant_population(N, b.twoJ, b.twoJ, 0.4, 0.0) == pytest.approx(1 / multiplicity(N, b.twoJ))
        n0 = (N - b.twoJ) / 2
        assert subradiant_population(N, b.twoJ, b.twoJ, 0.4, 2.0) == pytest.approx(
            math.exp(-0.4 * n0 * 2.0) / multiplicity(N, b.twoJ))
        for other in block_list(N):
            if other.twoJ > b.twoJ:
                assert subradiant_population(N, b.twoJ, other.twoJ, 0.0, 5.0) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.floats(0, 1), st.floats(0, 10), st.data())
def test_subradiant_probability_conserved(N, dg, t, data):
    twoJ0 = data.draw(st.sampled_from([b.twoJ for b in block_list(N)]))
    total = sum(multiplicity(N, b.twoJ) * subradiant_population(N, twoJ0, b.twoJ, dg, t)
                for b in block_list(N) if b.twoJ >= twoJ0)
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.floats(0.01, 1), st.floats(0.01, 8), st.data())
def test_subradiant_population_ode(N, dg, t, data):
    twoJ0 = data.draw(st.sampled_from([b.twoJ for b in block_list(N)]))
    h = 1e-5
    for b in block_list(N):
        if b.twoJ < twoJ0:
            continue
        nJ = (N - b.twoJ) / 2
        fd = (subradiant_population(N, twoJ0, b.twoJ, dg, t + h)
              - subradiant_population(N, twoJ0, b.twoJ, dg, t - h)) / (2 * h)
        rate = -dg * nJ * subradiant_population(N, twoJ0, b.twoJ, dg, t)
        if b.twoJ > twoJ0:
            ratio = multiplicity(N, b.twoJ - 2) / multiplicity(N, b.twoJ)
            rate += dg * (nJ + 1) * ratio * subradiant_population(N, twoJ0, b.twoJ - 2, dg, t)
        assert fd == pytest.approx(rate, abs=1e-7)


def test_subradiant_intensity_examples():
    assert subradiant_intensity(6, 6, 0.7, 3.0) == 0
    assert subradiant_intensity(2, 0, 0.25, 0.0) == pytest.approx(0.25)
    from scipy.integrate import quad

    total, _ = quad(lambda t: subradiant_intensity(10, 2, 0.3, t), 0, np.inf)
    assert total == pytest.approx(4.0, rel=1e-10)


def test_subradiant_domain():
    with pytest.raises(DomainError):
        subradiant_population(4, 2, 0, 0.1, 1.0)
    with pytest.raises(DomainError):
        subradiant_population(4, 1, 2, 0.1, 1.0)
    with pytest.raises(DomainError):
        subradiant_intensity(4, 2, -0.1, 1.0)


@pytest.mark.parametrize("N", [4, 10])
def test_subradiant_matches_numerical_evolution(N):
    for twoJ0 in [b.twoJ for b in block_list(N)][:3]:
        p = SystemParams.from_dgamma(N, 0.6)
        t = np.linspace(0, 10, 21)
        traj = evolve(p, init_dicke(N, twoJ0, -twoJ0), 10.0, sample_grid=t)
        for tk, s in zip(t, traj.states):
            for b in block_list(N):
                if b.twoJ >= twoJ0:
                    got = s.element(b.twoJ, -b.twoJ, -b.twoJ).real
                    assert got == pytest.approx(subradiant_population(N, twoJ0, b.twoJ, 0.6, tk), abs=1e-8)
        np.testing.assert_allclose(traj.intensity(),
                                   [subradiant_intensity(N, twoJ0, 0.6, tk) for tk in t], atol=1e-8)
