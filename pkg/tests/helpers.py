"""Shared test fixtures: random games and independent dense oracles.

The oracles here deliberately avoid the library's assembly and solver
paths: dense matrices are built by direct loops over the model's raw rows,
and eigenpairs come from scipy's general dense eigensolver.
"""

import numpy as np
import scipy.linalg

from rsgame.model import GameModel, tabular_model


def random_game(rng, n_states=4, m1=2, m2=2, rate_scale=1.0, cost_scale=1.0,
                extra_edge_prob=0.4):
    """Random finite game, irreducible under every pure action pair.

    A forward cycle 1 -> 2 -> ... -> n -> 1 is present for every action
    pair (with action-dependent rates), so every averaged generator is
    strongly connected.
    """
    rates = {}
    costs = {}
    grids = {}
    for i in range(1, n_states + 1):
        grids[(1, i)] = np.arange(m1, dtype=float)
        grids[(2, i)] = np.arange(m2, dtype=float)
    for i in range(1, n_states + 1):
        succ = i % n_states + 1
        for ia in range(m1):
            for ib in range(m2):
                row = {succ: rate_scale * (0.3 + rng.random())}
                for j in range(1, n_states + 1):
                    if j in (i, succ):
                        continue
                    if rng.random() < extra_edge_prob:
                        row[j] = rate_scale * rng.random()
                row[i] = -sum(row.values())
                rates[(i, ia, ib)] = row
                costs[(i, ia, ib)] = (cost_scale * rng.random(),
                                      cost_scale * rng.random())
    return tabular_model(rates, costs, grids, n_states=n_states)


def dense_tilted(model: GameModel, n, v1, v2, player):
    """Dense oracle assembly of the tilted operator on states 1..n.

    Independent of rsgame.generator: loops over pure action pairs and
    averages explicitly, dropping off-truncation columns while keeping the
    full-space diagonal.
    """
    A = np.zeros((n, n))
    for i in range(1, n + 1):
        w1 = v1.weights(i)
        w2 = v2.weights(i)
        for ia, wa in enumerate(w1):
            for ib, wb in enumerate(w2):
                if wa * wb == 0.0:
                    continue
                row = model.row(i, ia, ib)
                for j, r in zip(row.cols, row.rates):
                    if j <= n:
                        A[i - 1, j - 1] += wa * wb * r
                A[i - 1, i - 1] += wa * wb * row.diag
                A[i - 1, i - 1] += wa * wb * model.cost(player, i, ia, ib)
    return A


def dense_principal(A, anchor_idx=0):
    """Principal eigenpair of a dense Metzler matrix via scipy.linalg.eig.

    Returns the eigenvalue of maximal real part and its eigenvector scaled
    to one at the anchor index (made real and positive).
    """
    vals, vecs = scipy.linalg.eig(A)
    k = int(np.argmax(vals.real))
    rho = vals[k]
    assert abs(rho.imag) < 1e-9 * (1 + abs(rho.real))
    psi = vecs[:, k]
    psi = psi / psi[anchor_idx]
    assert np.max(np.abs(psi.imag)) < 1e-8
    psi = psi.real
    return float(rho.real), psi


def enumerate_selectors(sizes):
    """All pure selectors as index tuples over per-state grid sizes."""
    if not sizes:
        yield ()
        return
    for head in range(sizes[0]):
        for rest in enumerate_selectors(sizes[1:]):
            yield (head,) + rest


def _principal_left_right(A):
    vals, vr = scipy.linalg.eig(A)
    k = int(np.argmax(vals.real))
    rho = float(vals[k].real)
    psi = vr[:, k].real
    if psi[0] < 0:
        psi = -psi
    valsl, vl = scipy.linalg.eig(A.T)
    kl = int(np.argmax(valsl.real))
    w = vl[:, kl].real
    if w.sum() < 0:
        w = -w
    return rho, psi, w


def unbiased_mc_instance(rng, n_states=None, rate_scale=0.12, cost_scale=0.15,
                         horizon=200.0):
    """Single-action chain whose finite-horizon estimator bias vanishes.

    The plain ``(1/T) log E[exp(integral c)]`` estimator carries an O(1/T)
    bias ``log(psi(start) * (w.1) / (w.psi)) / T`` from the left/right
    principal eigenvectors.  One cost entry is tuned by bisection until
    that constant is exactly one at the start state, so at any horizon the
    estimator is unbiased and the Monte-Carlo/eigenvalue comparison tests
    pure sampling noise.  Returns ``(model, start, rho)`` with ``rho``
    from the dense oracle.
    """
    import scipy.optimize

    from rsgame.model import tabular_model, truncate, uniform_strategy
    from rsgame.generator import assemble

    if n_states is None:
        n_states = int(rng.integers(3, 8))
    start = 1
    grids = {(p, i): [0.0] for p in (1, 2) for i in range(1, n_states + 1)}
    rates = {}
    costs = cost_scale * rng.random(n_states)
    for i in range(1, n_states + 1):
        succ = i % n_states + 1
        row = {succ: rate_scale * (0.4 + rng.random())}
        for j in range(1, n_states + 1):
            if j not in (i, succ) and rng.random() < 0.5:
                row[j] = rate_scale * rng.random()
        row[i] = -sum(row.values())
        rates[(i, 0, 0)] = row

    def build(cost_vec):
        table = {(i, 0, 0): (cost_vec[i - 1], 0.0)
                 for i in range(1, n_states + 1)}
        return tabular_model(rates, table, grids, n_states=n_states)

    def log_bias_constant(cost_vec):
        model = build(cost_vec)
        trunc, _ = truncate(model, n_states)
        A = assemble(model, trunc, uniform_strategy(model, 1),
                     uniform_strategy(model, 2), 1).A.toarray()
        rho, psi, w = _principal_left_right(A)
        return np.log(psi[start - 1] * w.sum() / (w @ psi)), rho

    for k in range(n_states):
        def f(s, k=k):
            c = costs.copy()
            c[k] = s
            return log_bias_constant(c)[0]

        if f(0.0) * f(4.0 * cost_scale) < 0:
            costs[k] = scipy.optimize.brentq(f, 0.0, 4.0 * cost_scale,
                                             xtol=1e-14)
            break

    final, rho = log_bias_constant(costs)
    assert abs(final) < 1e-10, "bias tuning failed for this draw"
    return build(costs), start, rho
