"""Stephenson-Tawn, full, and j-wise composite log-likelihoods.

The density of a max-stable vector is exp(-V(z)) times a sum over set
partitions of products of mixed partial derivatives of V.  The full sum
has Bell(d) terms; the Stephenson-Tawn form keeps only the observed
hitting scenario's term, and the composite form applies either one to
all close-by j-tuples of sites.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .exponent import ExponentContext, ModelSpec
from .qmc_cdf import QmcConfig, QmcPreset
from .spatial import SiteSet

__all__ = [
    "HittingScenario",
    "MaximaDataset",
    "TupleSelection",
    "LikelihoodError",
    "st_loglik",
    "full_loglik",
    "cl_loglik",
    "select_tuples",
    "enumerate_partitions",
    "derive_hitting_scenarios",
]

PARTITION_CAP = 12
FULL_LOGLIK_CAP = 10


class LikelihoodError(RuntimeError):
    """A likelihood term could not be evaluated to a usable value."""


@dataclass(frozen=True)
class HittingScenario:
    """A partition of the site indices 0..d-1 into concurrent-event blocks."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(i) for i in b)) for b in self.blocks)
        if not blocks or any(not b for b in blocks):
            raise ValueError("blocks must be nonempty")
        flat = [i for b in blocks for i in b]
        if len(flat) != len(set(flat)):
            raise ValueError("blocks must be disjoint")
        if set(flat) != set(range(max(flat) + 1)):
            raise ValueError("blocks must cover 0..d-1")
        object.__setattr__(self, "blocks", tuple(sorted(blocks, key=lambda b: b[0])))

    @property
    def d(self) -> int:
        return sum(len(b) for b in self.blocks)

    def restrict(self, keep) -> "HittingScenario":
        """Projection onto a subset of sites: intersect each block with the
        kept set (relabelled to 0..len-1), dropping empty intersections."""
        keep = sorted(keep)
        pos = {site: k for k, site in enumerate(keep)}
        blocks = []
        for b in self.blocks:
            inter = tuple(pos[i] for i in b if i in pos)
            if inter:
                blocks.append(inter)
        return HittingScenario(blocks=tuple(blocks))


@dataclass(frozen=True)
class MaximaDataset:
    """Componentwise maxima at d sites over N blocks (e.g. years), with the
    optional per-row hitting scenarios or raw event dates they came from."""

    sites: SiteSet
    Z: np.ndarray
    scenarios: tuple | None = None
    event_dates: np.ndarray | None = None

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        if Z.shape[1] != self.sites.d:
            raise ValueError("Z column count must match the site count")
        if not (np.all(np.isfinite(Z)) and np.all(Z > 0)):
            raise ValueError("Z must be finite and positive")
        object.__setattr__(self, "Z", Z)
        if self.scenarios is not None:
            scen = tuple(self.scenarios)
            if len(scen) != Z.shape[0]:
                raise ValueError("need one scenario per row")
            if any(s.d != self.sites.d for s in scen):
                raise ValueError("scenario dimension must match the site count")
            object.__setattr__(self, "scenarios", scen)
        if self.event_dates is not None:
            dates = np.atleast_2d(np.asarray(self.event_dates))
            if dates.shape != Z.shape:
                raise ValueError("event_dates must match the shape of Z")
            object.__setattr__(self, "event_dates", dates)

    @property
    def n(self) -> int:
        return self.Z.shape[0]


@dataclass(frozen=True)
class TupleSelection:
    """The j-tuples of sites kept by the binary distance weights: a tuple is
    in if its diameter (max intra-tuple distance) is below the threshold."""

    j: int
    u: float
    tuples: tuple

    def __post_init__(self):
        if not self.tuples:
            raise ValueError("selection must contain at least one tuple")
        tuples = tuple(tuple(sorted(int(i) for i in q)) for q in self.tuples)
        if any(len(q) != self.j or len(set(q)) != self.j for q in tuples):
            raise ValueError(f"every tuple must contain {self.j} distinct sites")
        object.__setattr__(self, "tuples", tuples)


def enumerate_partitions(j: int) -> list[HittingScenario]:
    """All set partitions of {0..j-1}, canonically ordered; Bell(j) of them."""
    if not 1 <= j <= PARTITION_CAP:
        raise ValueError(f"partition enumeration supports 1 <= j <= {PARTITION_CAP}")
    out = []

    def grow(i, blocks):
        if i == j:
            out.append(HittingScenario(blocks=tuple(tuple(b) for b in blocks)))
            return
        for b in blocks:
            b.append(i)
            grow(i + 1, blocks)
            b.pop()
        blocks.append([i])
        grow(i + 1, blocks)
        blocks.pop()

    grow(0, [])
    return out


def _check(res, what: str, strict: bool):
    if not np.isfinite(res.value):
        raise LikelihoodError(f"non-finite {what}")
    if strict and not res.converged:
        raise LikelihoodError(f"{what} did not reach its error target")
    return res.value


def _dataset_log_density(ctx: ExponentContext, Z: np.ndarray, scenarios, cfg: QmcPreset,
                         strict: bool) -> float:
    """Sum over rows of -V plus the partition term(s).

    ``scenarios=None`` sums every partition per row (the full likelihood);
    otherwise only the row's own partition contributes (Stephenson-Tawn).
    Rows sharing a partial-derivative block are evaluated in one batched
    QMC pass, which dominates the cost at realistic dataset sizes.
    """
    total = 0.0
    for res in ctx.V_many(Z, cfg.exponent_cfg):
        total -= _check(res, "exponent term", strict)
    if scenarios is None:
        block_logs = {}
        for m in range(1, ctx.d + 1):
            for block in itertools.combinations(range(ctx.d), m):
                block_logs[block] = np.array([
                    _check(res, f"partial term for block {block}", strict)
                    for res in ctx.partial_many(Z, block, cfg.partial_cfg)
                ])
        terms = np.stack([
            sum(block_logs[b] for b in part.blocks)
            for part in enumerate_partitions(ctx.d)
        ])
        return total + float(np.sum(logsumexp(terms, axis=0)))
    rows_by_block: dict[tuple, list[int]] = {}
    for r, scen in enumerate(scenarios):
        for block in scen.blocks:
            rows_by_block.setdefault(block, []).append(r)
    for block, rows in rows_by_block.items():
        for res in ctx.partial_many(Z[rows], block, cfg.partial_cfg):
            total += _check(res, f"partial term for block {block}", strict)
    return total


def st_loglik(data: MaximaDataset, model: ModelSpec, sites: SiteSet | None,
              cfg: QmcPreset, strict: bool = False) -> float:
    """Log-likelihood keeping one partition term per row: the observed one."""
    sites = sites or data.sites
    if data.scenarios is None:
        raise LikelihoodError("Stephenson-Tawn likelihood needs per-row scenarios")
    ctx = ExponentContext.from_model(model, sites)
    return _dataset_log_density(ctx, data.Z, data.scenarios, cfg, strict)


def full_loglik(data: MaximaDataset, model: ModelSpec, sites: SiteSet | None,
                cfg: QmcPreset, strict: bool = False) -> float:
    """Log-likelihood summing over all Bell(d) partitions per row."""
    sites = sites or data.sites
    if sites.d > FULL_LOGLIK_CAP:
        raise ValueError(f"full likelihood supports at most d={FULL_LOGLIK_CAP} sites")
    ctx = ExponentContext.from_model(model, sites)
    return _dataset_log_density(ctx, data.Z, None, cfg, strict)


def cl_loglik(data: MaximaDataset, model: ModelSpec, sites: SiteSet | None, j: int,
              sel: TupleSelection, cfg: QmcPreset, use_scenarios: bool = False,
              strict: bool = False) -> float:
    """j-wise composite log-likelihood over the selected site tuples.

    Each tuple contributes the log density of the j-dimensional marginal
    process; with ``use_scenarios`` the observed partition restricted to
    the tuple replaces the Bell(j) partition sum.
    """
    sites = sites or data.sites
    if not 2 <= j <= sites.d:
        raise ValueError("need 2 <= j <= d")
    if sel.j != j:
        raise ValueError("selection tuple size does not match j")
    if use_scenarios and data.scenarios is None:
        raise LikelihoodError("scenario-based composite likelihood needs scenarios")
    ctx = ExponentContext.from_model(model, sites)
    total = 0.0
    for q in sel.tuples:
        scen = None
        if use_scenarios:
            scen = [data.scenarios[r].restrict(q) for r in range(data.n)]
        total += _dataset_log_density(ctx.subset(q), data.Z[:, list(q)], scen, cfg, strict)
    return float(total)


def select_tuples(sites: SiteSet, j: int, target_count: int | None = None,
                  u: float | None = None) -> TupleSelection:
    """Tuples of j sites whose diameter falls below a distance threshold.

    Give either the threshold ``u`` directly or a ``target_count``; in the
    latter case the threshold becomes the smallest value selecting at
    least that many tuples (all diameter ties at the cut are kept).
    """
    if (target_count is None) == (u is None):
        raise ValueError("give exactly one of target_count or u")
    if not 2 <= j <= sites.d:
        raise ValueError("need 2 <= j <= d")
    dist = sites.distances
    combos = list(itertools.combinations(range(sites.d), j))
    diams = np.array([
        max(dist[a, b] for a, b in itertools.combinations(q, 2)) for q in combos
    ])
    if target_count is not None:
        if not 1 <= target_count <= len(combos):
            raise ValueError(f"target_count must lie in [1, {len(combos)}]")
        cut = np.sort(diams)[target_count - 1]
        u = float(np.nextafter(cut, np.inf))
    keep = tuple(q for q, dm in zip(combos, diams) if dm < u)
    if not keep:
        raise ValueError(f"no tuple has diameter below u={u}")
    return TupleSelection(j=j, u=float(u), tuples=keep)


def derive_hitting_scenarios(event_dates, gap: float = 3.0) -> HittingScenario:
    """Group sites whose event dates chain together within ``gap`` days.

    Sites join the same block when their dates are linked by a chain of
    steps each at most ``gap`` apart (transitive closure, so a long event
    can connect dates further apart than the gap itself).
    """
    dates = np.atleast_1d(np.asarray(event_dates, dtype=float))
    if dates.ndim != 1 or not np.all(np.isfinite(dates)):
        raise ValueError("need one finite event date per site")
    order = np.argsort(dates, kind="stable")
    blocks, current = [], [int(order[0])]
    for prev, nxt in zip(order[:-1], order[1:]):
        if dates[nxt] - dates[prev] <= gap:
            current.append(int(nxt))
        else:
            blocks.append(tuple(current))
            current = [int(nxt)]
    blocks.append(tuple(current))
    return HittingScenario(blocks=tuple(blocks))
