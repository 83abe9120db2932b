"""Machine checks of the standing stability assumptions.

Every check quantifies an inequality over a finite range of states and all
pure action pairs, reporting the worst witness when it fails.  Countable
models can never be verified exhaustively, so reports carry their checked
range and a needs-analytic-tail status unless the Lyapunov specification
certifies the tail analytically (the shop model does: its boundary row
decays geometrically by construction).

For the shop model, :func:`shop_condition_report` reproduces the whole
chain of closed-form displays behind its stability argument, from the
exponentially weighted drift identity to the cost-margin inequality, and
accepts parameter sets that the model constructor would reject so that
violations show up as failed displays with concrete witnesses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .generator import average_row
from .model import (
    GameModel,
    LyapunovSpec,
    ShopParams,
    Truncation,
    shop_costs,
    shop_drift_margin,
    shop_row,
    _shop_boundary_row,
)

__all__ = [
    "Witness",
    "AssumptionReport",
    "IrreducibilityReport",
    "ConditionDisplay",
    "ShopConditionReport",
    "check_growth_drift",
    "check_killed_drift",
    "check_irreducibility",
    "check_anchor_row",
    "shop_condition_report",
]

REL_TOL = 1e-9

HOLDS = "holds-on-checked-range"
VIOLATED = "violated-at"
NEEDS_TAIL = "needs-analytic-tail"


@dataclass(frozen=True)
class Witness:
    state: int
    a1: int | None
    a2: int | None
    defect: float
    note: str = ""

    def __str__(self):
        acts = "" if self.a1 is None else f", actions ({self.a1},{self.a2})"
        note = f" [{self.note}]" if self.note else ""
        return f"state {self.state}{acts}: defect {self.defect:.3e}{note}"


@dataclass(frozen=True)
class AssumptionReport:
    name: str
    status: str
    witnesses: tuple
    checked_range: tuple
    max_defect: float
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.status != VIOLATED

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "checked_range": list(self.checked_range),
            "max_defect": self.max_defect,
            "note": self.note,
            "witnesses": [
                {"state": w.state, "a1": w.a1, "a2": w.a2,
                 "defect": w.defect, "note": w.note}
                for w in self.witnesses],
        }


def _tolerance(*values):
    return REL_TOL * max(1.0, *(abs(v) for v in values))


def _status(model, spec, witnesses):
    if witnesses:
        return VIOLATED
    if not model.is_finite and not (spec is not None and spec.tail_certified):
        return NEEDS_TAIL
    return HOLDS


def _weighted_row_sum(model, W, i, ia, ib):
    row = model.row(i, ia, ib)
    total = row.diag * W(i)
    for j, r in zip(row.cols, row.rates):
        total += r * W(int(j))
    return total


def _action_pairs(model, i):
    for ia in range(model.n_actions(1, i)):
        for ib in range(model.n_actions(2, i)):
            yield ia, ib


def check_growth_drift(model: GameModel, spec: LyapunovSpec,
                   states) -> AssumptionReport:
    """Growth bound: weighted drift at most ``C1 W + C2``, exit rate at
    most ``C3 W``, for every state in range and every pure action pair."""
    states = tuple(states)
    W = spec.growth_weight()
    witnesses = []
    worst = 0.0
    for i in states:
        if W(i) < 1.0 - REL_TOL:
            witnesses.append(Witness(i, None, None, 1.0 - W(i),
                                     "Lyapunov weight below one"))
        bound = spec.C1 * W(i) + spec.C2
        exit_bound = spec.C3 * W(i)
        for ia, ib in _action_pairs(model, i):
            drift = _weighted_row_sum(model, W, i, ia, ib)
            defect = drift - bound
            worst = max(worst, defect)
            if defect > _tolerance(drift, bound):
                witnesses.append(Witness(i, ia, ib, defect,
                                         "weighted drift above C1*W + C2"))
            exit_defect = model.row(i, ia, ib).exit_rate - exit_bound
            worst = max(worst, exit_defect)
            if exit_defect > _tolerance(exit_bound):
                witnesses.append(Witness(i, ia, ib, exit_defect,
                                         "exit rate above C3*W"))
    return AssumptionReport(
        name="growth-drift", status=_status(model, spec, witnesses),
        witnesses=tuple(witnesses), checked_range=(states[0], states[-1]),
        max_defect=float(worst))


def check_killed_drift(model: GameModel, spec: LyapunovSpec, variant: str,
                   states) -> AssumptionReport:
    """Killed drift bound with either a constant or a norm-like rate.

    Variant ``bounded`` uses ``-gamma * W`` on the right-hand side and
    additionally confirms that ``gamma`` dominates both cost rates on the
    range; variant ``unbounded`` uses ``-ell(i) * W`` and checks that
    ``ell - max cost`` trends upward over the tail of the range (its
    sublevel sets within the range are finite by finiteness of the range).
    """
    states = tuple(states)
    if variant not in ("bounded", "unbounded"):
        raise ValueError("variant must be 'bounded' or 'unbounded'")
    witnesses = []
    worst = 0.0
    W = spec.W
    in_kappa = spec.kappa_set.__contains__

    if variant == "bounded":
        if spec.gamma is None:
            raise ValueError("bounded variant needs gamma in the spec")
        top_cost = max(max(model.costs(i, ia, ib))
                       for i in states for ia, ib in _action_pairs(model, i))
        if spec.gamma <= top_cost:
            witnesses.append(Witness(0, None, None, top_cost - spec.gamma,
                                     "gamma does not dominate the costs on "
                                     "the checked range"))
        rate = lambda i: spec.gamma
    else:
        if spec.ell is None:
            raise ValueError("unbounded variant needs ell in the spec")
        rate = spec.ell

    for i in states:
        if W(i) < 1.0 - REL_TOL:
            witnesses.append(Witness(i, None, None, 1.0 - W(i),
                                     "Lyapunov weight below one"))
        bound = (spec.C4 if in_kappa(i) else 0.0) - rate(i) * W(i)
        for ia, ib in _action_pairs(model, i):
            drift = _weighted_row_sum(model, W, i, ia, ib)
            defect = drift - bound
            worst = max(worst, defect)
            if defect > _tolerance(drift, bound):
                witnesses.append(Witness(i, ia, ib, defect,
                                         "killed drift bound violated"))

    if variant == "unbounded":
        for player in (1, 2):
            margins = [rate(i) - max(model.costs(i, ia, ib)[player - 1]
                                     for ia, ib in _action_pairs(model, i))
                       for i in states]
            tail = max(3, len(states) // 4)
            for k in range(len(states) - tail, len(states) - 1):
                if k < 0:
                    continue
                if margins[k + 1] < margins[k] - _tolerance(margins[k]):
                    witnesses.append(Witness(
                        states[k + 1], None, None, margins[k] - margins[k + 1],
                        f"ell - max cost of player {player} decreases at the "
                        "tail of the range (not norm-like)"))
                    break
    return AssumptionReport(
        name=f"killed-drift-{variant}", status=_status(model, spec, witnesses),
        witnesses=tuple(witnesses), checked_range=(states[0], states[-1]),
        max_defect=float(worst))


@dataclass(frozen=True)
class IrreducibilityReport:
    irreducible: bool
    n_components: int
    components: tuple
    mode: str

    def to_json_dict(self) -> dict:
        return {"irreducible": self.irreducible,
                "n_components": self.n_components,
                "components": [list(c) for c in self.components],
                "mode": self.mode}


def check_irreducibility(model: GameModel, truncation: Truncation,
                         pair=None) -> IrreducibilityReport:
    """Strong connectivity of the jump graph on a truncation.

    With ``pair=(v1, v2)`` the graph of the averaged chain is used; with
    ``pair=None`` an edge must be present under every pure action pair,
    which is sufficient for irreducibility under arbitrary mixed
    stationary strategies.
    """
    n = truncation.n
    ri, ci = [], []
    for i in truncation.states:
        if pair is not None:
            v1, v2 = pair
            acc, _, _ = average_row(model, i, v1.weights(i), v2.weights(i))
            edges = {j for j, r in acc.items() if j != i and j <= n and r > 0}
        else:
            edges = None
            for ia, ib in _action_pairs(model, i):
                row = model.row(i, ia, ib)
                present = {int(j) for j, r in zip(row.cols, row.rates)
                           if r > 0 and j <= n}
                edges = present if edges is None else edges & present
        for j in sorted(edges or ()):
            ri.append(i - 1)
            ci.append(j - 1)
    graph = csr_matrix((np.ones(len(ri), dtype=np.int8), (ri, ci)),
                       shape=(n, n))
    ncomp, labels = connected_components(graph, directed=True,
                                         connection="strong")
    comps = [[] for _ in range(ncomp)]
    for idx, lab in enumerate(labels):
        comps[lab].append(idx + 1)
    return IrreducibilityReport(
        irreducible=(ncomp == 1), n_components=int(ncomp),
        components=tuple(tuple(c) for c in comps),
        mode="pair" if pair is not None else "all-pure")


def check_anchor_row(model: GameModel, i0: int | None = None,
                     targets=None) -> AssumptionReport:
    """Positivity of the anchor row toward every target state.

    ``targets`` defaults to all other states of a finite model, or to the
    support of the anchor row under the first action pair for a countable
    one (pass the intended range explicitly for a sharper claim).
    """
    i0 = model.anchor if i0 is None else i0
    if targets is None:
        if model.is_finite:
            targets = [j for j in model.states() if j != i0]
        else:
            targets = [int(j) for j in model.row(i0, 0, 0).cols]
    targets = [j for j in targets if j != i0]
    witnesses = []
    for ia, ib in _action_pairs(model, i0):
        row = model.row(i0, ia, ib)
        have = dict(zip((int(j) for j in row.cols), row.rates))
        for j in targets:
            if have.get(j, 0.0) <= 0.0:
                witnesses.append(Witness(i0, ia, ib, -have.get(j, 0.0),
                                         f"no positive rate to state {j}"))
    return AssumptionReport(
        name="anchor-row", status=VIOLATED if witnesses else HOLDS,
        witnesses=tuple(witnesses),
        checked_range=(min(targets), max(targets)) if targets else (i0, i0),
        max_defect=0.0 if not witnesses else max(w.defect for w in witnesses),
        note=f"anchor state {i0}")


# ---------------------------------------------------------------------------
# Shop condition displays
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionDisplay:
    key: str
    description: str
    passed: bool
    worst: Witness | None
    margin: float

    def to_json_dict(self) -> dict:
        return {"key": self.key, "description": self.description,
                "passed": self.passed, "margin": self.margin,
                "worst": None if self.worst is None else {
                    "state": self.worst.state, "a1": self.worst.a1,
                    "a2": self.worst.a2, "defect": self.worst.defect,
                    "note": self.worst.note}}


@dataclass(frozen=True)
class ShopConditionReport:
    displays: tuple
    checked_range: tuple

    @property
    def all_pass(self) -> bool:
        return all(d.passed for d in self.displays)

    def display(self, key: str) -> ConditionDisplay:
        for d in self.displays:
            if d.key == key:
                return d
        raise KeyError(key)

    def to_json_dict(self) -> dict:
        return {"all_pass": self.all_pass,
                "checked_range": list(self.checked_range),
                "displays": [d.to_json_dict() for d in self.displays]}

    def summary(self) -> str:
        lines = []
        for d in self.displays:
            mark = "pass" if d.passed else "FAIL"
            extra = "" if d.worst is None else f"  worst: {d.worst}"
            lines.append(f"[{mark}] {d.key}: {d.description}{extra}")
        return "\n".join(lines)


def _display(key, description, witnesses, margin):
    worst = max(witnesses, key=lambda w: w.defect, default=None)
    return ConditionDisplay(key=key, description=description,
                            passed=not witnesses, worst=worst,
                            margin=float(margin))


def shop_condition_report(params: ShopParams, states) -> ShopConditionReport:
    """Numerically reproduce every closed-form stability display of the
    shop model on a range of states, action grids included.

    Accepts parameter sets violating the standing conditions; each display
    then fails with the concrete witness.  The displays are:

    - ``weighted-drift-identity``: the exponentially weighted row sum at
      ``i >= 2`` equals ``i W(i) [buy (e^t - 1) + sell (e^-t - 1)]`` plus
      the action term on the coupled set, exactly up to rounding;
    - ``killed-drift-bound``: weighted drift at most
      ``C4 1_K(i) - margin * i * W(i)``;
    - ``boundary-row-bound``: the weighted state-1 row sum stays strictly
      below ``pi_11 e^t + e^-2t / (1 - e^-t)`` and is finite;
    - ``growth-drift-constants``: weighted drift at most ``W(i) + C4``
      (the ``C1 = 1``, ``C2 = C4`` form of the growth bound);
    - ``exit-rate-bound``: exit rates at most
      ``(2 L + buy + sell) / theta * W(i)``;
    - ``cost-margin``: the fee margin ``beta_k = margin - fee_k`` is
      nonnegative and ``ell - max cost`` equals ``i beta_k + min payoff``
      (condition (IV)).
    """
    states = tuple(states)
    th = params.theta
    W = lambda i: math.exp(th * i)
    margin = shop_drift_margin(params)
    ell = lambda i: margin * i
    c4 = max(params.action_max * (math.exp(th) - 1.0),
             math.exp(-2.0 * th) / (1.0 - math.exp(-th)))
    c3 = (2.0 * params.action_max + params.buy_rate + params.sell_rate) / th
    bracket = (params.buy_rate * (math.exp(th) - 1.0)
               + params.sell_rate * (math.exp(-th) - 1.0))
    boundary = _shop_boundary_row(params)
    in_kappa = params.coupled_states.__contains__

    def grids(i):
        g1 = params.grid(1, i)
        g2 = params.grid(2, i)
        return [(u1, u2) for u1 in g1 for u2 in g2]

    def weighted(row):
        return sum(r * W(j) for j, r in sorted(row.items()))

    identity_w, killed_w, growth_w, exit_w = [], [], [], []
    id_margin = killed_margin = growth_margin = exit_margin = math.inf
    if margin <= 0:
        # the kill rate ell(i) = margin * i must be positive norm-like;
        # an outward weighted drift leaves nothing to certify
        killed_w.append(Witness(0, None, None, -margin,
                                "drift margin nonpositive: the weighted "
                                "chain drifts outward (condition (II) "
                                "inverted relative to theta)"))
        killed_margin = margin
    for i in states:
        for u1, u2 in grids(i):
            row = shop_row(params, i, u1, u2, boundary=boundary)
            drift = weighted(row)
            if i >= 2:
                action_term = ((u1 * (math.exp(th) - 1.0)
                                + u2 * (math.exp(-th) - 1.0))
                               if in_kappa(i) else 0.0)
                rhs = i * W(i) * bracket + action_term
                err = abs(drift - rhs)
                scale = _tolerance(drift, rhs, i * W(i) * (params.buy_rate + params.sell_rate))
                id_margin = min(id_margin, scale - err)
                if err > scale:
                    identity_w.append(Witness(i, None, None, err,
                                              f"identity off by {err:.3e} at "
                                              f"actions ({u1:g},{u2:g})"))
            killed_bound = (c4 if in_kappa(i) else 0.0) - ell(i) * W(i)
            defect = drift - killed_bound
            killed_margin = min(killed_margin, -defect)
            if defect > _tolerance(drift, killed_bound):
                killed_w.append(Witness(i, None, None, defect,
                                        f"actions ({u1:g},{u2:g})"))
            growth_bound = W(i) + c4
            gdefect = drift - growth_bound
            growth_margin = min(growth_margin, -gdefect)
            if gdefect > _tolerance(drift, growth_bound):
                growth_w.append(Witness(i, None, None, gdefect,
                                        f"actions ({u1:g},{u2:g})"))
            exit_rate = -row[i]
            edefect = exit_rate - c3 * W(i)
            exit_margin = min(exit_margin, -edefect)
            if edefect > _tolerance(exit_rate, c3 * W(i)):
                exit_w.append(Witness(i, None, None, edefect,
                                      f"actions ({u1:g},{u2:g})"))

    boundary_w = []
    lhs = weighted(boundary)
    rhs = boundary[1] * math.exp(th) + math.exp(-2.0 * th) / (1.0 - math.exp(-th))
    bmargin = rhs - lhs
    if not (math.isfinite(lhs) and lhs < rhs):
        boundary_w.append(Witness(1, None, None, lhs - rhs,
                                  "weighted boundary row not strictly below "
                                  "its geometric bound"))

    cost_w = []
    cmargin = math.inf
    for k, fee in ((1, params.fee1), (2, params.fee2)):
        beta = margin - fee
        cmargin = min(cmargin, beta)
        if beta < 0:
            cost_w.append(Witness(0, None, None, -beta,
                                  f"fee margin beta_{k} = {beta:.6g} < 0 "
                                  "(condition (IV))"))
        for i in states:
            sup_cost = max(shop_costs(params, i, u1, u2)[k - 1]
                           for u1, u2 in grids(i))
            inf_payoff = min(params.payoff(k, i, u)
                             for u in params.grid(k, i))
            lhs_i = ell(i) - sup_cost
            rhs_i = i * beta + inf_payoff
            if abs(lhs_i - rhs_i) > _tolerance(lhs_i, rhs_i, ell(i)):
                cost_w.append(Witness(i, None, None, abs(lhs_i - rhs_i),
                                      f"cost-margin identity broken for "
                                      f"player {k}"))

    displays = (
        _display("weighted-drift-identity",
                 "weighted row sums match the closed drift form at i >= 2",
                 identity_w, id_margin),
        _display("killed-drift-bound",
                 "weighted drift <= C4 on the coupled set minus ell(i) W(i)",
                 killed_w, killed_margin),
        _display("boundary-row-bound",
                 "weighted boundary row strictly below its geometric bound",
                 boundary_w, bmargin),
        _display("growth-drift-constants",
                 "weighted drift <= W(i) + C4 (C1 = 1, C2 = C4)",
                 growth_w, growth_margin),
        _display("exit-rate-bound",
                 "exit rates <= (2 L + buy + sell) / theta * W(i)",
                 exit_w, exit_margin),
        _display("cost-margin",
                 "fee margins nonnegative and the cost-margin identity holds",
                 cost_w, cmargin),
    )
    return ShopConditionReport(displays=displays,
                               checked_range=(states[0], states[-1]))
