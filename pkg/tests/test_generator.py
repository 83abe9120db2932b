import numpy as np
import pytest

from rsgame.generator import assemble, average_row, averaged_rate_matrix, response_rows
from rsgame.model import (
    shop_model,
    tabular_model,
    tabular_strategy,
    truncate,
    uniform_strategy,
)

from tests.helpers import dense_tilted, random_game


def oracle_average_row(model, i, w1, w2):
    """Explicit double sum over the full action grid (no skipping)."""
    acc = {}
    c1 = c2 = 0.0
    for ia in range(model.n_actions(1, i)):
        for ib in range(model.n_actions(2, i)):
            w = w1[ia] * w2[ib]
            row = model.row(i, ia, ib)
            for j, r in zip(row.cols, row.rates):
                acc[int(j)] = acc.get(int(j), 0.0) + w * r
            acc[i] = acc.get(i, 0.0) + w * row.diag
            k1, k2 = model.costs(i, ia, ib)
            c1 += w * k1
            c2 += w * k2
    return acc, c1, c2


class TestAverageRow:
    def test_dirac_pair_returns_pure_row_verbatim(self):
        model = random_game(np.random.default_rng(3), n_states=3, m1=2, m2=3)
        acc, c1, c2 = average_row(model, 2, [0.0, 1.0], [0.0, 0.0, 1.0])
        row = model.row(2, 1, 2)
        assert acc[2] == row.diag
        for j, r in zip(row.cols, row.rates):
            assert acc[int(j)] == r
        assert (c1, c2) == model.costs(2, 1, 2)

    def test_half_half_averages_two_rows(self):
        model = random_game(np.random.default_rng(4), n_states=3, m1=2, m2=1)
        acc, _, _ = average_row(model, 1, [0.5, 0.5], [1.0])
        ra = model.row(1, 0, 0)
        rb = model.row(1, 1, 0)
        da = dict(zip(ra.cols.tolist(), ra.rates.tolist()))
        db = dict(zip(rb.cols.tolist(), rb.rates.tolist()))
        for j in set(da) | set(db):
            expect = (da.get(j, 0.0) + db.get(j, 0.0)) / 2.0
            assert acc[j] == pytest.approx(expect, abs=1e-15)
        assert acc[1] == pytest.approx((ra.diag + rb.diag) / 2.0, abs=1e-15)

    def test_random_mixed_pair_matches_double_loop_oracle(self):
        rng = np.random.default_rng(5)
        model = random_game(rng, n_states=4, m1=3, m2=3)
        w1 = rng.dirichlet(np.ones(3))
        w2 = rng.dirichlet(np.ones(3))
        acc, c1, c2 = average_row(model, 3, w1, w2)
        exp, e1, e2 = oracle_average_row(model, 3, w1, w2)
        assert set(acc) == set(exp)
        for j in exp:
            assert acc[j] == pytest.approx(exp[j], abs=1e-14)
        assert c1 == pytest.approx(e1, abs=1e-14)
        assert c2 == pytest.approx(e2, abs=1e-14)

    def test_dimension_mismatch_raises(self):
        model = random_game(np.random.default_rng(6), n_states=2, m1=2, m2=2)
        with pytest.raises(ValueError, match="2 entries|action grid"):
            average_row(model, 1, [1.0], [0.5, 0.5])


class TestAssemble:
    def test_zero_cost_model_gives_bare_generator(self):
        rng = np.random.default_rng(7)
        model = random_game(rng, n_states=4, cost_scale=0.0)
        trunc, _ = truncate(model, 4)
        u1, u2 = uniform_strategy(model, 1), uniform_strategy(model, 2)
        tw = assemble(model, trunc, u1, u2, player=1)
        rm = averaged_rate_matrix(model, trunc, u1, u2)
        assert np.allclose(tw.A.toarray(), rm.Q.toarray(), atol=0)
        assert rm.conservative

    def test_one_state_constant_cost(self):
        grids = {(1, 1): [0.0], (2, 1): [0.0]}
        model = tabular_model({(1, 0, 0): {1: 0.0}}, {(1, 0, 0): (2.5, 0.0)},
                              grids, n_states=1)
        trunc, _ = truncate(model, 1)
        tw = assemble(model, trunc, uniform_strategy(model, 1),
                      uniform_strategy(model, 2), player=1)
        assert tw.A.toarray().tolist() == [[2.5]]
        # the shift keeps the shifted diagonal strictly positive
        assert tw.alpha >= 0.0
        assert (tw.A + tw.alpha * np.eye(1)).min() >= 0.0

    def test_shop_truncation_matches_dense_oracle(self):
        model = shop_model()
        trunc, _ = truncate(model, 10)
        u1, u2 = uniform_strategy(model, 1), uniform_strategy(model, 2)
        for player in (1, 2):
            tw = assemble(model, trunc, u1, u2, player)
            oracle = dense_tilted(model, 10, u1, u2, player)
            assert np.max(np.abs(tw.A.toarray() - oracle)) < 1e-13
            assert not tw.conservative  # boundary rows lose mass

    def test_bilinearity_in_each_strategy(self):
        rng = np.random.default_rng(8)
        model = random_game(rng, n_states=4, m1=3, m2=2)
        trunc, _ = truncate(model, 4)
        lam = 0.37
        v2 = uniform_strategy(model, 2)
        a = tabular_strategy(model, 1, {i: rng.dirichlet(np.ones(3)) for i in range(1, 5)})
        b = tabular_strategy(model, 1, {i: rng.dirichlet(np.ones(3)) for i in range(1, 5)})
        mixed = tabular_strategy(model, 1, {
            i: lam * a.weights(i) + (1 - lam) * b.weights(i) for i in range(1, 5)})
        A_mixed = assemble(model, trunc, mixed, v2, 1).A.toarray()
        A_a = assemble(model, trunc, a, v2, 1).A.toarray()
        A_b = assemble(model, trunc, b, v2, 1).A.toarray()
        assert np.max(np.abs(A_mixed - (lam * A_a + (1 - lam) * A_b))) <= 1e-12

    def test_metzler_and_subconservative(self):
        model = shop_model()
        trunc, _ = truncate(model, 8)
        tw = assemble(model, trunc, uniform_strategy(model, 1),
                      uniform_strategy(model, 2), player=2)
        A = tw.A.toarray()
        off = A - np.diag(np.diag(A))
        assert off.min() >= 0.0
        rm = averaged_rate_matrix(model, trunc, uniform_strategy(model, 1),
                                  uniform_strategy(model, 2))
        assert rm.Q.toarray().sum(axis=1).max() <= 1e-12
        assert tw.alpha >= (-rm.Q.diagonal()).max()

    def test_shifted_matrix_entrywise_nonnegative(self):
        rng = np.random.default_rng(9)
        model = random_game(rng, n_states=5)
        trunc, _ = truncate(model, 5)
        tw = assemble(model, trunc, uniform_strategy(model, 1),
                      uniform_strategy(model, 2), player=1)
        M = tw.A.toarray() + tw.alpha * np.eye(5)
        assert M.min() >= 0.0
        assert np.diag(M).min() > 0.0


class TestResponseRows:
    def test_matches_manual_half_average(self):
        rng = np.random.default_rng(10)
        model = random_game(rng, n_states=3, m1=2, m2=3)
        trunc, _ = truncate(model, 3)
        w2 = {i: rng.dirichlet(np.ones(3)) for i in range(1, 4)}
        opp = tabular_strategy(model, 2, w2)
        rows = response_rows(model, trunc, opp, player=1)
        i = 2
        for a in range(2):
            cols, rates, diag, cost = rows[i - 1][a]
            exp = {}
            exp_diag = 0.0
            exp_cost = 0.0
            for ib, wb in enumerate(w2[i]):
                row = model.row(i, a, ib)
                for j, r in zip(row.cols, row.rates):
                    if j <= 3:
                        exp[int(j) - 1] = exp.get(int(j) - 1, 0.0) + wb * r
                exp_diag += wb * row.diag
                exp_cost += wb * model.cost(1, i, a, ib)
            assert cols.tolist() == sorted(exp)
            for c, r in zip(cols, rates):
                assert r == pytest.approx(exp[int(c)], abs=1e-14)
            assert diag == pytest.approx(exp_diag, abs=1e-14)
            assert cost == pytest.approx(exp_cost, abs=1e-14)

    def test_rejects_same_player_opponent(self):
        model = random_game(np.random.default_rng(11), n_states=2)
        trunc, _ = truncate(model, 2)
        with pytest.raises(ValueError, match="responding player"):
            response_rows(model, trunc, uniform_strategy(model, 1), player=1)
