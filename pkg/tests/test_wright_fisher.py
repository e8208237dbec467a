import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seedbank.exceptions import BankTooSmallError, InvalidStateError, NonIntegerMassError, SeedbankError
from seedbank.forward import DiffusionState, moment_ode
from seedbank.measure import SeedBankMeasure, discretize
from seedbank.rng import Purpose, Stream, stream_keys, uniforms
from seedbank.wright_fisher import (
    Bank,
    WFParams,
    WFState,
    _wf_step_counts,
    build_model,
    embed,
    rescaled_ensemble,
    simulate_counts,
    uniforms_per_step,
    wf_step,
)

from oracle_values import GAMMA21_BINS, GAMMA21_TAIL_MASS


def two_bank_model(N=100):
    return build_model(SeedBankMeasure.discrete([(0.5, 1.0), (2.0, 1.0)]), N)


def test_build_model_examples(one_atom, two_atoms):
    p = build_model(one_atom, 100)
    assert (p.c, p.sizes.tolist(), p.rates.tolist()) == (1, [100], [1.0])
    p = build_model(two_atoms, 100)
    assert (p.c, p.sizes.tolist(), p.rates.tolist()) == (2, [200, 50], [0.5, 2.0])


def test_build_model_gamma_against_oracle():
    mu = SeedBankMeasure.gamma(2.0, 1.0, 2.0)
    p = build_model(mu, 2000, 8, 4.0)
    masses = 2 * np.array(GAMMA21_BINS)
    masses[-1] += 2 * GAMMA21_TAIL_MASS  # the tail goes to the last bank
    np.testing.assert_allclose(p.masses, masses, atol=1e-9)
    grid = 0.5 * np.arange(1, 9)
    assert np.all(np.abs(p.rates - grid) / grid <= 1.0 / p.sizes)
    np.testing.assert_allclose(p.rates, p.masses * 2000 / p.sizes, rtol=1e-15)
    assert p.c == 2 and math.isclose(p.masses.sum(), 2.0)


def test_build_model_errors(gamma21):
    with pytest.raises(NonIntegerMassError):
        build_model(SeedBankMeasure.discrete([(1.0, 1.5)]), 100)
    with pytest.raises(BankTooSmallError) as info:
        build_model(SeedBankMeasure.discrete([(1.0, 1.0), (90.0, 1.0)]), 100)
    assert info.value.dropped_mass == 1.0
    with pytest.raises(SeedbankError):
        build_model(SeedBankMeasure.discrete([(1.0, 3.0)]), 2)


def test_params_invariants():
    with pytest.raises(SeedbankError):
        WFParams(10, 0, (Bank(10, 1.0, 1.0),))
    with pytest.raises(SeedbankError):
        WFParams(10, 1, (Bank(10, 0.5, 0.5),))  # masses must add to c
    with pytest.raises(BankTooSmallError):
        WFParams(10, 2, (Bank(1, 1.0, 10.0), Bank(10, 1.0, 1.0)))
    with pytest.raises(SeedbankError):
        WFParams(10, 1, (Bank(10, 1.0, 2.0),))  # rate must be mass * N / size


def test_state_invariants():
    p = two_bank_model()
    with pytest.raises(InvalidStateError):
        WFState(101, (0, 0), 100, (200, 50))
    with pytest.raises(InvalidStateError):
        WFState(5, (0, 51), 100, (200, 50))
    with pytest.raises(InvalidStateError):
        wf_step(WFState(5, (0, 0), 99, (200, 50)), p)


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_absorbing(p):
    params = two_bank_model()
    s = WFState.from_frequencies(p, p, params)
    stream = Stream(1, Purpose.WF)
    for _ in range(50):
        s = wf_step(s, params, stream)
    assert s.x == p and np.all(s.y == p)


def test_embed_examples():
    params = two_bank_model()
    assert embed(WFState.from_frequencies(1.0, 1.0, params), params) == DiffusionState(1.0, [1.0, 1.0])
    assert embed(WFState.from_frequencies(0.0, 0.0, params), params) == DiffusionState(0.0, [0.0, 0.0])
    assert embed(WFState.from_frequencies(0.5, [0.25, 0.76], params), params) == DiffusionState(0.5, [0.25, 0.76])


def test_expected_drift_example():
    params = two_bank_model()
    s = WFState.from_frequencies(0.5, [0.25, 0.76], params)
    assert math.isclose(((params.N - params.c) * s.x + params.masses @ s.y) / params.N, 0.5 + 0.01 / 100)


@given(st.integers(0, 2**32), st.integers(0, 100), st.integers(0, 200), st.integers(0, 50))
def test_counts_stay_on_lattice(seed, a, d1, d2):
    params = two_bank_model()
    z0 = WFState(a, (d1, d2), 100, (200, 50))
    active, dormant = simulate_counts(params, z0, 30, 20, seed, range(31))
    assert np.all((active >= 0) & (active <= 100))
    assert np.all((dormant >= 0) & (dormant <= params.sizes))
    assert active.dtype.kind == "i" and dormant.dtype.kind == "i"


def test_scalar_step_matches_vector_replicate():
    params = two_bank_model()
    z0 = WFState.from_frequencies(0.4, [0.3, 0.6], params)
    active, dormant = simulate_counts(params, z0, 25, 3, seed=9, record_generations=[25])
    for rep in range(3):
        s, stream = z0, Stream(9, Purpose.WF, rep)
        for _ in range(25):
            s = wf_step(s, params, stream)
        assert s.active == active[rep, 0] and list(s.dormant) == dormant[rep, 0].tolist()


def one_step(params, state, reps, seed):
    active, _ = simulate_counts(params, state, 1, reps, seed)
    return active[:, 0] / params.N


def test_one_step_drift_and_variance():
    params = two_bank_model(1000)
    s = WFState.from_frequencies(0.5, [0.25, 0.76], params)
    x1 = one_step(params, s, 100_000, 21)
    d = x1 - s.x
    target = (params.masses @ s.y - params.c * s.x) / params.N
    assert abs(d.mean() - target) <= 3 * d.std(ddof=1) / math.sqrt(d.size)
    sq = (x1 - x1.mean()) ** 2
    nvar = params.N * sq.mean()
    se = params.N * sq.std(ddof=1) / math.sqrt(sq.size)
    assert abs(nvar - s.x * (1 - s.x)) <= 3 * se + 5 * params.c ** 2 / params.N


def test_relabelling_identical_banks_is_pathwise_exact():
    params = WFParams.from_sizes(400, [80, 80], [1.0, 1.0])
    dormant = np.array([[20, 65], [65, 20]])
    keys = stream_keys(3, Purpose.WF, 2_000)
    u = uniforms(keys[:, None], np.arange(uniforms_per_step(params), dtype=np.uint64)[None, :])
    swapped = u.copy()
    for j in range(params.c):
        swapped[:, 1 + 3 * j] = 1.0 - u[:, 1 + 3 * j]  # bank 0 <-> bank 1
    x1, y1 = _wf_step_counts(np.full(2000, 130), np.tile(dormant[0], (2000, 1)), params, u)
    x2, y2 = _wf_step_counts(np.full(2000, 130), np.tile(dormant[1], (2000, 1)), params, swapped)
    np.testing.assert_array_equal(x1, x2)
    np.testing.assert_array_equal(y1, y2[:, ::-1])


def test_rescaled_ensemble_trivial():
    params = two_bank_model()
    s = rescaled_ensemble(params, WFState.from_frequencies(1.0, 1.0, params), 1.0, 50, seed=1,
                          record_times=[0.0, 0.5, 1.0])
    assert np.all(s.mean_x == 1.0) and np.all(s.var_x == 0.0)
    np.testing.assert_allclose(s.t, [0.0, 0.5, 1.0])


def test_rescaled_ensemble_matches_ode(one_atom):
    params = build_model(one_atom, 2000)
    z0 = WFState.from_frequencies(0.5, 0.5, params)
    s = rescaled_ensemble(params, z0, 1.0, 1500, seed=5)
    assert abs(s.mean_x[-1] - moment_ode(embed(z0, params), params.measure(), 1.0)[0]) <= 0.02


def test_rescaled_ensemble_workers_do_not_matter(monkeypatch):
    import seedbank.wright_fisher as wf

    params = two_bank_model()
    z0 = WFState.from_frequencies(0.3, 0.6, params)
    a = rescaled_ensemble(params, z0, 0.5, 300, seed=2)
    monkeypatch.setattr(wf, "CHUNK", 70)
    b = rescaled_ensemble(params, z0, 0.5, 300, seed=2, workers=4)
    np.testing.assert_array_equal(a.mean_x, b.mean_x)
    np.testing.assert_array_equal(a.var_x, b.var_x)
