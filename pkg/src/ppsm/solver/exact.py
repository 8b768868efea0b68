"""Exact combinatorial solver.

Every product edge advances the source side, so the active edges of one
product graph form closed walks of length ``3k``; with INJY each source
halfedge is used at most once, hence ``k <= 1``. A cycle therefore either
stays unmatched (its three INJY slacks are 1) or picks one closed 3-walk
``y1 -> y2 -> y3 -> y1`` through the target steps. The solver searches over
these per-cycle choices depth first, propagating COUPL to neighbouring
cycles. Bounds come from per-cycle minimum reduced costs, where target
coverage is priced by multipliers tuned once at the root, plus a lower
bound on the remaining SURJY slack.
"""

from __future__ import annotations

import sys
import time

import numpy as np

from ..errors import BudgetExceeded
from .base import FEASIBLE_TIME_LIMIT, OPTIMAL, Solution

DEFAULT_OPTION_BUDGET = 1_000_000
_EPS = 1e-12


def enumerate_cycle_paths(steps: np.ndarray) -> np.ndarray:
    """All step triples ``(t0, t1, t2)`` forming a closed walk ``y1 y2 y3 y1``."""
    lookup = {(int(a), int(b)): t for t, (a, b) in enumerate(steps)}
    out_steps = {}
    for t, (a, _) in enumerate(steps):
        out_steps.setdefault(int(a), []).append(t)
    paths = []
    for t0, (a, b) in enumerate(steps):
        a, b = int(a), int(b)
        for t1 in out_steps.get(b, ()):
            c = int(steps[t1][1])
            t2 = lookup.get((c, a))
            if t2 is not None:
                paths.append((t0, t1, t2))
    return np.array(paths, dtype=np.int64).reshape(-1, 3)


class _Timeout(Exception):
    pass


class _Search:
    def __init__(self, model, time_limit_s, option_budget):
        col = model.collection
        self.model = model
        self.col = col
        S = col.n_steps
        nY = col.meshY.n_vertices
        self.nY = nY
        lam = model.lam
        costs = col.costs
        paths = enumerate_cycle_paths(col.steps)
        n_cyc = col.n_cycles
        if (len(paths) + 1) * n_cyc > option_budget:
            raise BudgetExceeded(
                f"{(len(paths) + 1) * n_cyc} cycle options exceed the budget of {option_budget}")
        self.deadline = time.perf_counter() + time_limit_s
        step_int = col.step_interior
        fixed = model.fixed_zero
        ys = col.steps[:, 0]
        pe = model.prior.edge_probs_X
        self.oy = lam * model.prior.vertex_probs_Y

        raw = []
        for i in range(n_cyc):
            k = (3 * i + np.arange(3)) * S + paths
            ok = ~fixed[k].any(axis=1)
            st = np.vstack([np.full((1, 3), -1), paths[ok]])
            c = np.concatenate([[lam * pe[3 * i:3 * i + 3].sum()], costs[k[ok]].sum(axis=1)])
            cov = np.where(st >= 0, ys[np.maximum(st, 0)], -1)
            # count each covered target vertex once per option
            uq = cov >= 0
            uq[:, 1] &= cov[:, 1] != cov[:, 0]
            uq[:, 2] &= (cov[:, 2] != cov[:, 0]) & (cov[:, 2] != cov[:, 1])
            raw.append((st, c, cov, uq))
        self.mu = self._multipliers(raw)

        self.opt_steps, self.opt_cost, self.opt_true, self.opt_cover, self.opt_int = [], [], [], [], []
        for st, c, cov, uq in raw:
            red = c - (uq * self.mu[np.maximum(cov, 0)]).sum(axis=1)
            order = np.argsort(red, kind="stable")  # unmatched wins ties
            st, cov, uq = st[order], cov[order], uq[order]
            self.opt_steps.append(st)
            self.opt_cost.append(red[order])
            self.opt_true.append(c[order])
            self.opt_cover.append([r[u] for r, u in zip(cov, uq)])
            self.opt_int.append((st >= 0) & step_int[np.maximum(st, 0)])

        # target vertices each cycle could ever cover
        self.cov_set = [np.unique(cov[uq]) for _, _, cov, uq in raw]

        self.links = [[] for _ in range(n_cyc)]
        opp = col.meshX.opposite
        for h in np.flatnonzero(col.halfedge_interior):
            hh = int(opp[h])
            self.links[h // 3].append((h % 3, hh // 3, hh % 3))
        self.rev = col.step_reverse
        self.step_int = step_int
        self.lam = lam
        self.n_cyc = n_cyc
        self.nodes = 0

    def _multipliers(self, raw, max_iter=300):
        """Subgradient ascent on the relaxation that prices target coverage.

        For any ``0 <= mu <= oy`` the objective is bounded below by
        ``sum(mu) + sum_i min_o [c_i(o) - mu(cover(o))]``; the search works on
        these reduced costs and adds back a non-negative coverage residual.
        """
        oy = self.oy
        mu = np.zeros(self.nY)
        if not np.any(oy > 0):
            return mu
        cost = np.concatenate([c for _, c, _, _ in raw])
        cov = np.maximum(np.vstack([cv for _, _, cv, _ in raw]), 0)
        uq = np.vstack([u for _, _, _, u in raw])
        sizes = np.array([len(c) for _, c, _, _ in raw])
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        seg = np.repeat(np.arange(len(raw)), sizes)
        ub = float(sum(c[0] for _, c, _, _ in raw) + oy.sum())
        best_lb, best_mu, theta, stall = -np.inf, mu, 1.0, 0
        for _ in range(max_iter):
            red = cost - (uq * mu[cov]).sum(axis=1)
            mins = np.minimum.reduceat(red, starts)
            lb = float(mins.sum() + mu.sum())
            if lb > best_lb + 1e-12:
                best_lb, best_mu, stall = lb, mu.copy(), 0
            else:
                stall += 1
                if stall >= 15:
                    theta, stall = theta / 2, 0
                    if theta < 1e-3:
                        break
            at_min = np.flatnonzero(red <= mins[seg])
            _, first = np.unique(seg[at_min], return_index=True)
            pick = at_min[first]
            k = np.bincount(cov[pick][uq[pick]], minlength=self.nY)
            g = 1.0 - k
            g[(mu <= 0) & (g < 0)] = 0.0
            g[(mu >= oy) & (g > 0)] = 0.0
            gg = float(g @ g)
            if gg == 0.0:
                break
            mu = np.clip(mu + theta * max(ub - lb, 1e-9) / gg * g, 0.0, oy)
        return best_mu

    def run(self):
        n = self.n_cyc
        self.dom = [np.ones(len(c), dtype=bool) for c in self.opt_cost]
        self.count = np.array([len(c) for c in self.opt_cost])
        self.minc = np.array([c[0] for c in self.opt_cost])
        self.assigned = np.full(n, -1)
        self.cover_count = np.zeros(self.nY, dtype=np.int64)
        self.free_cov = np.zeros(self.nY, dtype=np.int64)
        for cs in self.cov_set:
            self.free_cov[cs] += 1
        self.mu_sum = float(self.mu.sum())
        self.slack_gap = self.oy - self.mu
        # all-unmatched start incumbent
        unmatched = [int(np.flatnonzero(s[:, 0] < 0)[0]) for s in self.opt_steps]
        self.best = float(sum(c[o] for c, o in zip(self.opt_true, unmatched)) + self.oy.sum())
        self.best_choice = unmatched
        rest = float(self.minc.sum())
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, 10 * n + 1000))
        timed_out = False
        try:
            self._dfs(0.0, 0.0, rest, n)
        except _Timeout:
            timed_out = True
        finally:
            sys.setrecursionlimit(old)
        return self.best_choice, self.best, timed_out

    def _residual_bound(self, n_left):
        """Lower bound on the coverage residual left over by the reduced costs."""
        cc = self.cover_count
        bound = self.mu_sum + float(self.mu @ np.maximum(cc - 1, 0))
        unc = cc == 0
        # uncovered vertices no free cycle can reach keep their slack
        stuck = unc & (self.free_cov == 0)
        bound += float(self.slack_gap[stuck].sum())
        rest = unc & ~stuck
        excess = int(rest.sum()) - 3 * n_left
        if excess > 0:
            bound += float(np.sort(self.slack_gap[rest])[:excess].sum())
        return bound

    def _dfs(self, cur, cur_true, rest, n_left):
        self.nodes += 1
        if (self.nodes & 255) == 0 and time.perf_counter() > self.deadline:
            raise _Timeout
        if n_left == 0:
            total = cur_true + float(self.oy[self.cover_count == 0].sum())
            if total < self.best - _EPS:
                self.best = total
                self.best_choice = self.assigned.tolist()
            return
        free = np.flatnonzero(self.assigned < 0)
        i = int(free[np.argmin(self.count[free])])
        rest_wo = rest - self.minc[i]
        resid = self._residual_bound(n_left)
        costs = self.opt_cost[i]
        steps = self.opt_steps[i]
        for o in np.flatnonzero(self.dom[i]):
            c = costs[o]
            if cur + c + rest_wo + resid >= self.best - _EPS:
                break
            trail = []
            new_rest = rest_wo
            dead = False
            for s, j, sj in self.links[i]:
                if self.assigned[j] >= 0:
                    continue
                t = steps[o, s]
                if t >= 0 and self.step_int[t]:
                    allow = self.opt_steps[j][:, sj] == self.rev[t]
                else:
                    allow = ~self.opt_int[j][:, sj]
                nd = self.dom[j] & allow
                cnt = int(nd.sum())
                if cnt == self.count[j]:
                    continue
                trail.append((j, self.dom[j], self.count[j], self.minc[j]))
                self.dom[j] = nd
                self.count[j] = cnt
                if cnt == 0:
                    dead = True
                    break
                m = self.opt_cost[j][int(np.argmax(nd))]
                new_rest += m - self.minc[j]
                self.minc[j] = m
            if not dead and cur + c + new_rest + resid < self.best - _EPS:
                cov = self.opt_cover[i][o]
                self.cover_count[cov] += 1
                self.free_cov[self.cov_set[i]] -= 1
                self.assigned[i] = o
                self._dfs(cur + c, cur_true + self.opt_true[i][o], new_rest, n_left - 1)
                self.assigned[i] = -1
                self.free_cov[self.cov_set[i]] += 1
                self.cover_count[cov] -= 1
            for j, d, cnt, m in reversed(trail):
                self.dom[j], self.count[j], self.minc[j] = d, cnt, m

    def assignment(self, choice):
        model, col = self.model, self.col
        S = col.n_steps
        z = np.zeros(model.n_vars, dtype=np.int8)
        covered = np.zeros(self.nY, dtype=bool)
        for i, o in enumerate(choice):
            st = self.opt_steps[i][o]
            if st[0] < 0:
                z[model.num_x + 3 * i: model.num_x + 3 * i + 3] = 1
            else:
                z[(3 * i + np.arange(3)) * S + st] = 1
                covered[self.opt_cover[i][o]] = True
        z[model.num_x + model.num_sinj:] = ~covered
        return z


def solve_exact(model, time_limit_s: float = 60.0, option_budget: int = DEFAULT_OPTION_BUDGET) -> Solution:
    """Provably optimal solve by depth-first branch and bound over cycle choices.

    Among optima of equal objective the search keeps the first one found,
    which prefers leaving cycles unmatched.

    Raises
    ------
    BudgetExceeded
        When the number of per-cycle options exceeds ``option_budget``.
    """
    if model.literal_signs:
        raise ValueError("the exact solver only supports the default slack signs")
    t0 = time.perf_counter()
    search = _Search(model, time_limit_s, option_budget)
    choice, _, timed_out = search.run()
    z = search.assignment(choice)
    obj = float(model.objective @ z)
    status = FEASIBLE_TIME_LIMIT if timed_out else OPTIMAL
    return Solution(z, obj, status, time.perf_counter() - t0, {"nodes": search.nodes, "backend": "exact"})

