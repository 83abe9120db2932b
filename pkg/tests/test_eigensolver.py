import numpy as np
import pytest

from rsgame.eigensolver import (
    ConvergenceError,
    best_response_eigenpair,
    principal_eigenpair,
    truncation_ladder,
)
from rsgame.generator import assemble
from rsgame.model import (
    pure_strategy,
    shop_model,
    tabular_model,
    truncate,
    uniform_strategy,
    with_cost_shift,
)

from tests.helpers import dense_principal, dense_tilted, enumerate_selectors, random_game


def fixed_pair(model):
    return uniform_strategy(model, 1), uniform_strategy(model, 2)


class TestPrincipalEigenpair:
    def test_constant_cost_on_conservative_chain(self):
        # Q 1 = 0, so rho equals the constant cost and psi is flat
        rng = np.random.default_rng(20)
        model = random_game(rng, n_states=6, cost_scale=0.0)
        kappa = 0.7
        model = with_cost_shift(model, 1, kappa)
        trunc, _ = truncate(model, 6)
        v1, v2 = fixed_pair(model)
        ep = principal_eigenpair(assemble(model, trunc, v1, v2, 1), i0=1)
        assert ep.rho == pytest.approx(kappa, abs=1e-10)
        assert np.max(np.abs(ep.psi - 1.0)) < 1e-9

    def test_single_state(self):
        grids = {(1, 1): [0.0], (2, 1): [0.0]}
        model = tabular_model({(1, 0, 0): {1: 0.0}}, {(1, 0, 0): (2.5, 1.0)},
                              grids, n_states=1)
        trunc, _ = truncate(model, 1)
        v1, v2 = fixed_pair(model)
        ep = principal_eigenpair(assemble(model, trunc, v1, v2, 1), i0=1)
        assert ep.rho == pytest.approx(2.5, abs=1e-12)
        assert ep.psi.tolist() == [1.0]

    def test_random_metzler_matches_dense_oracle(self):
        rng = np.random.default_rng(21)
        model = random_game(rng, n_states=12, m1=2, m2=2)
        trunc, _ = truncate(model, 12)
        v1, v2 = fixed_pair(model)
        A = assemble(model, trunc, v1, v2, 1)
        ep = principal_eigenpair(A, i0=1, tol=1e-11)
        rho_o, psi_o = dense_principal(dense_tilted(model, 12, v1, v2, 1))
        assert abs(ep.rho - rho_o) <= 1e-8
        assert np.max(np.abs(ep.psi - psi_o)) <= 1e-6

    def test_psi_positive_and_anchored(self):
        model = shop_model()
        trunc, _ = truncate(model, 15)
        v1, v2 = fixed_pair(model)
        ep = principal_eigenpair(assemble(model, trunc, v1, v2, 2), i0=1)
        assert np.all(ep.psi > 0)
        assert ep.psi[0] == 1.0
        assert ep.residual <= 1e-10
        lo, hi = ep.bracket
        assert lo <= ep.rho <= hi

    def test_reducible_matrix_warns_and_falls_back(self):
        grids = {(p, i): [0.0] for p in (1, 2) for i in (1, 2)}
        rates = {(1, 0, 0): {1: 0.0}, (2, 0, 0): {2: 0.0}}
        costs = {(1, 0, 0): (1.0, 0.0), (2, 0, 0): (3.0, 0.0)}
        model = tabular_model(rates, costs, grids, n_states=2)
        trunc, _ = truncate(model, 2)
        v1, v2 = fixed_pair(model)
        with pytest.warns(UserWarning, match="reducible"):
            ep = principal_eigenpair(assemble(model, trunc, v1, v2, 1), i0=1)
        assert ep.rho == pytest.approx(3.0, abs=1e-10)
        assert ep.warnings

    def test_max_iter_exhaustion_reports_bracket(self):
        rng = np.random.default_rng(22)
        model = random_game(rng, n_states=8)
        trunc, _ = truncate(model, 8)
        v1, v2 = fixed_pair(model)
        A = assemble(model, trunc, v1, v2, 1)
        with pytest.raises(ConvergenceError) as err:
            principal_eigenpair(A, i0=1, tol=1e-14, max_iter=2)
        lo, hi = err.value.bracket
        assert np.isfinite(lo) and np.isfinite(hi) and lo <= hi


class TestBestResponseEigenpair:
    def test_own_action_irrelevant_reduces_to_linear(self):
        # rates and costs ignore player 1's action: the inf collapses
        rng = np.random.default_rng(23)
        rates, costs, grids = {}, {}, {}
        for i in range(1, 5):
            grids[(1, i)] = [0.0, 1.0]
            grids[(2, i)] = [0.0, 1.0]
            for ib in range(2):
                succ = i % 4 + 1
                row = {succ: 0.4 + rng.random()}
                row[i] = -sum(row.values())
                cost = (rng.random(), rng.random())
                for ia in range(2):
                    rates[(i, ia, ib)] = row
                    costs[(i, ia, ib)] = cost
        model = tabular_model(rates, costs, grids, n_states=4)
        trunc, _ = truncate(model, 4)
        opp = uniform_strategy(model, 2)
        ep, sel = best_response_eigenpair(model, trunc, opp, player=1)
        A = assemble(model, trunc, pure_strategy(model, 1, lambda i: 0), opp, 1)
        linear = principal_eigenpair(A, i0=1)
        assert ep.rho == pytest.approx(linear.rho, abs=1e-9)
        for i in trunc.states:
            assert sel.weights(i).tolist() == [1.0, 0.0]  # lowest-index ties

    def test_dominated_action_never_selected(self):
        # action 1 repeats action 0's rates but adds one unit of cost
        rates, costs, grids = {}, {}, {}
        base_rows = {1: {2: 1.0, 1: -1.0}, 2: {1: 2.0, 2: -2.0}}
        base_costs = {1: 0.3, 2: 0.8}
        for i in (1, 2):
            grids[(1, i)] = [0.0, 1.0]
            grids[(2, i)] = [0.0]
            for ia in range(2):
                rates[(i, ia, 0)] = base_rows[i]
                costs[(i, ia, 0)] = (base_costs[i] + (1.0 if ia == 1 else 0.0), 0.0)
        model = tabular_model(rates, costs, grids, n_states=2)
        trunc, _ = truncate(model, 2)
        ep, sel = best_response_eigenpair(model, trunc,
                                          uniform_strategy(model, 2), player=1)
        for i in (1, 2):
            assert sel.weights(i).tolist() == [1.0, 0.0]

    def test_matches_exhaustive_selector_enumeration(self):
        rng = np.random.default_rng(25)
        model = random_game(rng, n_states=3, m1=2, m2=2)
        trunc, _ = truncate(model, 3)
        opp = uniform_strategy(model, 2)
        ep, sel = best_response_eigenpair(model, trunc, opp, player=1,
                                          tol=1e-11)
        best = np.inf
        for combo in enumerate_selectors([2, 2, 2]):
            own = pure_strategy(model, 1, lambda i, c=combo: c[i - 1])
            rho_o, _ = dense_principal(dense_tilted(model, 3, own, opp, 1))
            best = min(best, rho_o)
        assert ep.rho == pytest.approx(best, abs=1e-8)

    def test_selector_solves_its_own_linear_problem(self):
        model = shop_model()
        trunc, _ = truncate(model, 12)
        opp = uniform_strategy(model, 2)
        ep, sel = best_response_eigenpair(model, trunc, opp, player=1)
        A = assemble(model, trunc, sel, opp, 1)
        linear = principal_eigenpair(A, i0=1)
        assert linear.rho == pytest.approx(ep.rho, abs=1e-8)
        assert np.all(ep.psi > 0)
        assert ep.psi[0] == 1.0

    def test_acceleration_agrees_with_plain_iteration(self):
        model = shop_model()
        trunc, _ = truncate(model, 10)
        opp = uniform_strategy(model, 1)
        plain, _ = best_response_eigenpair(model, trunc, opp, player=2)
        accel, _ = best_response_eigenpair(model, trunc, opp, player=2,
                                           accelerate=True)
        assert accel.rho == pytest.approx(plain.rho, abs=1e-9)

    def test_constant_cost_shift_moves_rho_only(self):
        rng = np.random.default_rng(26)
        model = random_game(rng, n_states=5, m1=2, m2=2)
        shifted = with_cost_shift(model, 1, 0.7)
        trunc, _ = truncate(model, 5)
        opp = uniform_strategy(model, 2)
        ep0, sel0 = best_response_eigenpair(model, trunc, opp, 1, tol=1e-12)
        ep1, sel1 = best_response_eigenpair(shifted, trunc, opp, 1, tol=1e-12)
        assert ep1.rho - ep0.rho == pytest.approx(0.7, abs=1e-10)
        assert np.max(np.abs(ep1.psi - ep0.psi)) <= 1e-10
        for i in trunc.states:
            assert sel0.weights(i).tolist() == sel1.weights(i).tolist()


class TestLadder:
    def test_repeat_full_space_gives_identical_rho(self):
        rng = np.random.default_rng(27)
        model = random_game(rng, n_states=6)
        opp = uniform_strategy(model, 2)
        a = truncation_ladder(model, opp, 1, [6])
        b = truncation_ladder(model, opp, 1, [6])
        assert a.rungs[0].rho == b.rungs[0].rho

    def test_sizes_must_increase(self):
        model = shop_model()
        with pytest.raises(ValueError, match="increasing"):
            truncation_ladder(model, uniform_strategy(model, 2), 1, [10, 10])

    def test_zero_cost_ladder_nonpositive_then_zero(self):
        rng = np.random.default_rng(28)
        model = random_game(rng, n_states=8, cost_scale=0.0)
        own = uniform_strategy(model, 1)
        opp = uniform_strategy(model, 2)
        res = truncation_ladder(model, opp, 1, [4, 6, 8], own_strategy=own)
        rhos = res.rho_values()
        assert all(r <= 1e-12 for r in rhos)
        assert rhos[-1] == pytest.approx(0.0, abs=1e-9)
        assert res.monotone

    def test_shop_fixed_strategy_ladder_monotone(self):
        model = shop_model()
        own = uniform_strategy(model, 1)
        opp = uniform_strategy(model, 2)
        res = truncation_ladder(model, opp, 1, [6, 9, 12], own_strategy=own,
                                max_iter=200_000)
        rhos = res.rho_values()
        assert len(rhos) == 3
        assert all(b - a >= -1e-10 for a, b in zip(rhos, rhos[1:]))
        assert res.mode == "fixed"
        assert res.limit_estimate is not None

    def test_parallel_rungs_bit_identical(self):
        model = shop_model()
        opp = uniform_strategy(model, 2)
        seq = truncation_ladder(model, opp, 1, [5, 8], workers=1)
        par = truncation_ladder(model, opp, 1, [5, 8], workers=2)
        assert seq.rho_values() == par.rho_values()

    def test_failures_recorded_ladder_continues(self):
        model = shop_model()
        opp = uniform_strategy(model, 2)
        res = truncation_ladder(model, opp, 1, [5, 8], max_iter=3)
        assert all(r.error is not None for r in res.rungs)
        assert res.rho_values() == []
