"""Principal eigenpairs of tilted generators, linear and nonlinear.

The linear solver handles a fixed strategy pair: power iteration on the
shifted nonnegative matrix ``A + alpha I``, bracketing the eigenvalue with
the Collatz-Wielandt bounds ``min_i (M psi)_i / psi_i`` and
``max_i (M psi)_i / psi_i`` and stopping when the bracket width drops
below tolerance.  The nonlinear solver freezes one player and minimizes
over the other player's pure actions inside the iteration (the objective
is linear in the mixed action, so pure minimizers suffice); the same
bracket applies because the min-operator is monotone and positively
homogeneous.  A ladder of nested truncations tracks the eigenvalue as the
state space grows.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph, csr_matrix

from . import generator
from .model import GameModel, StationaryStrategy, pure_strategy, truncate

__all__ = [
    "EigenPair",
    "LadderRung",
    "LadderResult",
    "ConvergenceError",
    "principal_eigenpair",
    "best_response_eigenpair",
    "truncation_ladder",
    "default_max_iter",
]


class ConvergenceError(RuntimeError):
    """Raised when an eigensolve exhausts its iteration budget.

    Carries the last Collatz-Wielandt bracket (already unshifted) so the
    caller can see how tight the estimate got.
    """

    def __init__(self, message, bracket, iterations):
        super().__init__(message)
        self.bracket = bracket
        self.iterations = iterations


@dataclass(frozen=True)
class EigenPair:
    """Principal eigenvalue and positive eigenfunction on a truncation.

    ``psi`` is indexed like ``states`` and normalized to one at the anchor
    state; ``bracket`` holds the final Collatz-Wielandt bounds on ``rho``
    and ``residual`` the sup-norm eigen-equation defect relative to
    ``max |psi|``.
    """

    rho: float
    psi: np.ndarray
    residual: float
    iterations: int
    states: tuple
    anchor: int
    bracket: tuple
    warnings: tuple = ()

    def psi_at(self, state: int) -> float:
        return float(self.psi[state - self.states[0]])

    def psi_map(self) -> dict:
        return {s: float(x) for s, x in zip(self.states, self.psi)}


def default_max_iter(n: int) -> int:
    return 100 * n + 10_000


def _strong_components(pattern: csr_matrix):
    ncomp, labels = csgraph.connected_components(pattern, directed=True,
                                                 connection="strong")
    return ncomp, labels


def _power_iterate(apply_shifted, n, anchor_idx, tol, max_iter, psi0=None):
    """Shared power iteration with Collatz-Wielandt stopping.

    ``apply_shifted`` maps a positive vector through the shifted
    (entrywise nonnegative, positive diagonal) operator.  Returns
    ``(lam_lo, lam_hi, psi, iterations)`` for the shifted operator.
    """
    psi = np.ones(n) if psi0 is None else psi0.copy()
    psi /= psi[anchor_idx]
    lo = hi = np.nan
    for it in range(1, max_iter + 1):
        y = apply_shifted(psi)
        ratios = y / psi
        lo = float(ratios.min())
        hi = float(ratios.max())
        psi = y / y[anchor_idx]
        if hi - lo <= tol:
            return lo, hi, psi, it
    raise ConvergenceError(
        f"power iteration did not reach bracket width {tol:g} within "
        f"{max_iter} iterations (last width {hi - lo:.3e})",
        bracket=(lo, hi), iterations=max_iter)


def principal_eigenpair(A: generator.TwistedMatrix, i0: int,
                        tol: float = 1e-10,
                        max_iter: int | None = None) -> EigenPair:
    """Principal eigenpair of the tilted operator under fixed strategies.

    Power iteration on ``A + alpha I``; the reported eigenvalue is the
    bracket midpoint minus the shift.  A reducible operator triggers a
    warning and a component-wise fallback whose eigenvector may vanish off
    the dominant component (and at the anchor, in which case the
    normalization falls back to the maximum entry).
    """
    n = A.n
    if max_iter is None:
        max_iter = default_max_iter(n)
    anchor_idx = A.index(i0)
    pattern = csr_matrix((A.A > 0).astype(np.int8))
    pattern.setdiag(0)
    pattern.eliminate_zeros()
    ncomp, labels = _strong_components(pattern)
    notes: list = []
    if ncomp > 1 and n > 1:
        msg = (f"operator is reducible ({ncomp} strongly connected "
               "components); falling back to component-wise solves")
        warnings.warn(msg)
        notes.append(msg)
        return _reducible_fallback(A, i0, tol, max_iter, labels, ncomp, notes)

    lo, hi, psi, its = _power_iterate(A.shifted_apply, n, anchor_idx, tol,
                                      max_iter)
    mid = 0.5 * (lo + hi)
    resid = float(np.max(np.abs(A.shifted_apply(psi) - mid * psi))
                  / np.max(np.abs(psi)))
    return EigenPair(rho=mid - A.alpha, psi=psi, residual=resid,
                     iterations=its, states=A.states, anchor=i0,
                     bracket=(lo - A.alpha, hi - A.alpha),
                     warnings=tuple(notes))


def _reducible_fallback(A, i0, tol, max_iter, labels, ncomp, notes):
    n = A.n
    dense = A.A.toarray()
    best = None
    for comp in range(ncomp):
        idx = np.flatnonzero(labels == comp)
        sub = dense[np.ix_(idx, idx)]

        def apply_shifted(v, sub=sub):
            return sub @ v + A.alpha * v

        lo, hi, psi_sub, its = _power_iterate(apply_shifted, len(idx), 0,
                                              tol, max_iter)
        mid = 0.5 * (lo + hi)
        if best is None or mid > best[0]:
            best = (mid, idx, psi_sub, (lo, hi), its)
    mid, idx, psi_sub, (lo, hi), its = best
    psi = np.zeros(n)
    psi[idx] = psi_sub / psi_sub.max()
    anchor_idx = A.index(i0)
    if psi[anchor_idx] > 0:
        psi /= psi[anchor_idx]
    else:
        notes.append("eigenvector vanishes at the anchor state; normalized "
                     "by its maximum instead")
    resid = float(np.max(np.abs(dense @ psi + A.alpha * psi - mid * psi))
                  / np.max(np.abs(psi)))
    return EigenPair(rho=mid - A.alpha, psi=psi, residual=resid,
                     iterations=its, states=A.states, anchor=i0,
                     bracket=(lo - A.alpha, hi - A.alpha),
                     warnings=tuple(notes))


class _ResponseOperator:
    """Stacked per-action rows for the frozen-opponent minimization.

    Row ``(i, a)`` of the stacked sparse matrix applies the shifted
    tilted operator for own action ``a`` at state ``i``; a segmented
    minimum then yields the nonlinear operator image in one matvec.
    """

    def __init__(self, model, truncation, opponent, player, alpha=None):
        rows = generator.response_rows(model, truncation, opponent, player)
        n = truncation.n
        counts = np.array([len(per) for per in rows], dtype=np.int64)
        owner = np.repeat(np.arange(n), counts)
        starts = np.zeros(n, dtype=np.int64)
        np.cumsum(counts[:-1], out=starts[1:])
        diag_cost = np.empty(owner.size)
        ri, cj, vals = [], [], []
        k = 0
        max_exit = 0.0
        for i_idx, per_action in enumerate(rows):
            for cols, rates, diag, cost in per_action:
                ri.extend([k] * len(cols))
                cj.extend(cols.tolist())
                vals.extend(rates.tolist())
                diag_cost[k] = diag + cost
                max_exit = max(max_exit, -diag)
                k += 1
        if alpha is None:
            alpha = max_exit + 1.0
        # fold diagonal + cost + shift into the stacked matrix
        ri.extend(range(k))
        cj.extend(owner.tolist())
        vals.extend((diag_cost + alpha).tolist())
        self.S = csr_matrix((vals, (ri, cj)), shape=(k, n))
        self.owner = owner
        self.starts = starts
        self.counts = counts
        self.alpha = float(alpha)
        self.n = n

    def apply_min(self, psi):
        z = self.S @ psi
        return np.minimum.reduceat(z, self.starts), z

    def argmin_indices(self, psi):
        z = self.S @ psi
        y = np.minimum.reduceat(z, self.starts)
        sel = np.empty(self.n, dtype=np.int64)
        for i in range(self.n):
            seg = z[self.starts[i]:self.starts[i] + self.counts[i]]
            sel[i] = int(np.argmin(seg))  # ties: lowest action index
        return sel, y

    def intersection_pattern(self):
        """Edges present under every own action (sufficient irreducibility)."""
        S = self.S
        ri: list = []
        ci: list = []
        for i in range(self.n):
            common = None
            for k in range(self.starts[i], self.starts[i] + self.counts[i]):
                cols = S.indices[S.indptr[k]:S.indptr[k + 1]]
                vals = S.data[S.indptr[k]:S.indptr[k + 1]]
                edges = {int(c) for c, v in zip(cols, vals) if v > 0 and c != i}
                common = edges if common is None else common & edges
            for j in sorted(common or ()):
                ri.append(i)
                ci.append(j)
        return csr_matrix((np.ones(len(ri), dtype=np.int8), (ri, ci)),
                          shape=(self.n, self.n))


def best_response_eigenpair(model: GameModel, truncation, opponent_strategy,
                            player: int, tol: float = 1e-10,
                            max_iter: int | None = None,
                            accelerate: bool = False):
    """Minimal eigenpair of the frozen-opponent minimization equation.

    Monotone nonlinear power iteration: each sweep applies every own pure
    action's shifted operator and keeps the pointwise minimum, with the
    Collatz-Wielandt bracket as exit test.  Returns ``(EigenPair,
    StationaryStrategy)`` where the strategy is the minimizing pure
    selector (ties broken toward the lowest action index).

    With ``accelerate=True`` the iteration periodically solves the linear
    eigenpair of the current selector and restarts from its eigenvector;
    the nonlinear bracket still decides convergence, so acceleration can
    never loosen the result.
    """
    if player not in (1, 2):
        raise ValueError("player must be 1 or 2")
    n = truncation.n
    if max_iter is None:
        max_iter = default_max_iter(n)
    op = _ResponseOperator(model, truncation, opponent_strategy, player)
    anchor_idx = truncation.index(model.anchor)

    notes = []
    ncomp, _ = _strong_components(op.intersection_pattern())
    if ncomp > 1 and n > 1:
        msg = (f"action-intersection graph is reducible ({ncomp} strong "
               "components); nonlinear iteration may find a non-minimal pair")
        warnings.warn(msg)
        notes.append(msg)

    psi = np.ones(n)
    lo = hi = np.nan
    accel_every = 40
    it = 0
    while it < max_iter:
        it += 1
        y, _ = op.apply_min(psi)
        ratios = y / psi
        lo = float(ratios.min())
        hi = float(ratios.max())
        psi_next = y / y[anchor_idx]
        if hi - lo <= tol:
            psi = psi_next
            break
        psi = psi_next
        if accelerate and it % accel_every == 0:
            psi = _accelerate_once(model, truncation, opponent_strategy,
                                   player, op, psi, tol, max_iter)
    else:
        raise ConvergenceError(
            f"nonlinear power iteration did not reach bracket width {tol:g} "
            f"within {max_iter} iterations (last width {hi - lo:.3e})",
            bracket=(lo - op.alpha, hi - op.alpha), iterations=max_iter)

    sel, y = op.argmin_indices(psi)
    mid = 0.5 * (lo + hi)
    resid = float(np.max(np.abs(y - mid * psi)) / np.max(np.abs(psi)))
    pair = EigenPair(rho=mid - op.alpha, psi=psi, residual=resid,
                     iterations=it, states=truncation.states,
                     anchor=model.anchor, bracket=(lo - op.alpha, hi - op.alpha),
                     warnings=tuple(notes))
    selector = pure_strategy(model, player, _table_choice(truncation, sel))
    return pair, selector


def _table_choice(truncation, sel):
    table = {s: int(a) for s, a in zip(truncation.states, sel)}

    def choice(i):
        try:
            return table[i]
        except KeyError:
            raise ValueError(f"selector undefined outside truncation "
                             f"(state {i})") from None

    return choice


def _accelerate_once(model, truncation, opponent, player, op, psi, tol,
                     max_iter):
    """One policy-improvement jump: eigenvector of the current selector."""
    sel, _ = op.argmin_indices(psi)
    own = pure_strategy(model, player, _table_choice(truncation, sel))
    if player == 1:
        A = generator.assemble(model, truncation, own, opponent, 1)
    else:
        A = generator.assemble(model, truncation, opponent, own, 2)
    try:
        ep = principal_eigenpair(A, model.anchor, tol, max_iter)
    except ConvergenceError:
        return psi
    if np.all(ep.psi > 0):
        return ep.psi
    return psi


@dataclass(frozen=True)
class LadderRung:
    n: int
    rho: float | None
    eigenpair: EigenPair | None
    error: str | None = None


@dataclass(frozen=True)
class LadderResult:
    """Eigenvalues along nested truncations, with a limit estimate.

    ``monotone`` asserts nondecreasing rungs only in fixed-strategy mode
    (principal submatrix monotonicity); in best-response mode it is
    recorded but carries no guarantee.
    """

    rungs: tuple
    mode: str
    monotone: bool
    max_defect: float
    limit_estimate: float | None
    increments: tuple = field(default=())

    def rho_values(self):
        return [r.rho for r in self.rungs if r.rho is not None]


def _aitken_limit(rhos):
    if len(rhos) < 3:
        return rhos[-1] if rhos else None
    r0, r1, r2 = rhos[-3], rhos[-2], rhos[-1]
    d1, d2 = r1 - r0, r2 - r1
    denom = d2 - d1
    if denom == 0.0 or abs(d2) < 1e-14:
        return r2
    acc = r2 - d2 * d2 / denom
    # reject wild extrapolations when increments are not contracting
    if abs(acc - r2) > 10 * abs(d2):
        return r2
    return acc


def truncation_ladder(model: GameModel, opponent_strategy, player: int,
                      n_list, tol: float = 1e-10,
                      own_strategy: StationaryStrategy | None = None,
                      max_iter: int | None = None,
                      workers: int = 1) -> LadderResult:
    """Eigenvalue sequence over increasing truncations.

    With ``own_strategy=None`` each rung solves the nonlinear
    best-response eigenproblem; otherwise the pair is frozen and each rung
    is a linear solve.  Per-rung failures are recorded and the ladder
    continues.  Rungs are independent and may be solved in parallel;
    results do not depend on ``workers``.
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("truncation sizes must be strictly increasing")

    def solve(n):
        trunc, _ = truncate(model, n)
        if own_strategy is None:
            ep, _ = best_response_eigenpair(model, trunc, opponent_strategy,
                                            player, tol, max_iter)
        else:
            v1, v2 = ((own_strategy, opponent_strategy) if player == 1
                      else (opponent_strategy, own_strategy))
            A = generator.assemble(model, trunc, v1, v2, player)
            ep = principal_eigenpair(A, model.anchor, tol, max_iter)
        return ep

    results: list = [None] * len(n_list)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {k: pool.submit(solve, n) for k, n in enumerate(n_list)}
            for k, fut in futures.items():
                try:
                    results[k] = fut.result()
                except (ConvergenceError, ValueError) as exc:
                    results[k] = exc
    else:
        for k, n in enumerate(n_list):
            try:
                results[k] = solve(n)
            except (ConvergenceError, ValueError) as exc:
                results[k] = exc

    rungs = []
    for n, res in zip(n_list, results):
        if isinstance(res, EigenPair):
            rungs.append(LadderRung(n=n, rho=res.rho, eigenpair=res))
        else:
            rungs.append(LadderRung(n=n, rho=None, eigenpair=None,
                                    error=str(res)))
    rhos = [r.rho for r in rungs if r.rho is not None]
    increments = tuple(b - a for a, b in zip(rhos, rhos[1:]))
    max_defect = max((-d for d in increments), default=0.0)
    monotone = max_defect <= 1e-10
    return LadderResult(rungs=tuple(rungs),
                        mode="fixed" if own_strategy is not None else "best-response",
                        monotone=monotone, max_defect=float(max_defect),
                        limit_estimate=_aitken_limit(rhos),
                        increments=increments)
