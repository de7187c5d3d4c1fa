"""Sensor-network scenario engine.

Each scan every node filters its own image, the local posteriors are exchanged
with graph neighbours, and each node folds its neighbours' posteriors into its
own by pairwise fusion. In mode M2 the fused posterior replaces the node's
working posterior for the next scan; in M1 the local filters run open loop.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fusion import metropolis_row, sequential_fuse
from .mbfilter import LocalFilter, extract_estimates, initialize_tracks
from .metrics import approximation_error, efficiency_proportion, ospa
from .rfs import POSITION
from .tbd import generate_frame


@dataclass(frozen=True, eq=False)
class StepRecord:
    k: int
    node: int
    mode: str
    local_ospa: float
    fused_ospa: float
    card_local: int
    card_fused: int
    local_estimates: np.ndarray
    fused_estimates: np.ndarray
    approx_error: float


def fusion_exponents(topology, node, policy="metropolis"):
    """Closed-neighbourhood members of ``node`` (itself first) and their weights."""
    adj = topology.adjacency
    if policy == "metropolis":
        return metropolis_row(adj, node)
    members = [node] + sorted(adj[node])
    return members, [1.0 / len(members)] * len(members)


def _streams(seed, nodes):
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(nodes))
    out = {}
    for node, child in zip(nodes, children):
        frame_ss, filter_ss, fusion_ss = child.spawn(3)
        out[node] = (np.random.default_rng(frame_ss), np.random.default_rng(filter_ss),
                     np.random.default_rng(fusion_ss))
    return out


def run_scenario(config, seed=None):
    """Simulate one Monte-Carlo run; returns one record per (scan, node)."""
    seed = config.seed if seed is None else seed
    topo = config.topology
    truth = config.truth()
    rngs = _streams(seed, topo.nodes)
    filters = {n: LocalFilter(config.sensor, config.motion, config.filter, rngs[n][1]) for n in topo.nodes}
    working = {n: initialize_tracks(truth.at(0), config.filter, rngs[n][1], config.sensor.dx)
               for n in topo.nodes}
    exponents = {n: fusion_exponents(topo, n, config.omega) for n in topo.nodes}

    records = []
    for k in range(truth.n_steps):
        targets = truth.at(k)
        local = {}
        for n in topo.nodes:
            frame = generate_frame(targets, config.sensor, rngs[n][0], k)
            local[n] = filters[n].step(working[n], frame, first=(k == 0))
        fused = {}
        for n in topo.nodes:
            members, weights = exponents[n]
            fused[n] = sequential_fuse([local[m] for m in members], weights, config.fusion, rngs[n][2])
        for n in topo.nodes:
            est_l = extract_estimates(local[n], config.filter)
            est_f = extract_estimates(fused[n], config.filter)
            err = approximation_error(local[n], est_l, exponents[n][1][0])
            records.append(StepRecord(
                k=k, node=n, mode=config.mode,
                local_ospa=ospa(est_l[:, POSITION], targets[:, POSITION], config.ospa),
                fused_ospa=ospa(est_f[:, POSITION], targets[:, POSITION], config.ospa),
                card_local=len(est_l), card_fused=len(est_f),
                local_estimates=est_l, fused_estimates=est_f,
                approx_error=err,
            ))
        if config.mode == "M2":
            working = fused
        else:
            working = local
    return records


FIELDS = ("local_ospa", "fused_ospa", "card_local", "card_fused", "approx_error")


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    """Per-run metric arrays of shape (runs, steps, nodes)."""

    config: object
    seeds: tuple
    nodes: tuple
    local_ospa: np.ndarray
    fused_ospa: np.ndarray
    card_local: np.ndarray
    card_fused: np.ndarray
    approx_error: np.ndarray

    @property
    def runs(self):
        return len(self.seeds)

    def mean_by_step(self, name):
        """Mean over runs, shape (steps, nodes)."""
        return getattr(self, name).mean(axis=0)

    def mean(self, name, node=None):
        arr = getattr(self, name)
        if node is not None:
            arr = arr[..., self.nodes.index(node)]
        return float(arr.mean())

    def efficient_mask(self):
        return self.local_ospa < self.config.efficiency_threshold

    def mean_efficient_approx_error(self):
        """Approximation error averaged over efficient local estimates only."""
        mask = self.efficient_mask()
        return float(self.approx_error[mask].mean()) if mask.any() else float("nan")

    def efficiency(self):
        return efficiency_proportion(self.local_ospa.ravel(), self.config.efficiency_threshold)


def _records_to_arrays(records, nodes, steps):
    arr = {f: np.zeros((steps, len(nodes))) for f in FIELDS}
    for rec in records:
        j = nodes.index(rec.node)
        for f in FIELDS:
            arr[f][rec.k, j] = getattr(rec, f)
    return arr


def _run_arrays(args):
    config, seed = args
    return _records_to_arrays(run_scenario(config, seed), config.topology.nodes, config.steps)


def run_seeds(config, runs):
    return tuple((config.seed, r) for r in range(runs))


def worker_count():
    try:
        return max(1, int(os.environ.get("GCIMB_THREADS", "1")))
    except ValueError:
        return 1


def monte_carlo(config, runs=None, seeds=None, workers=None):
    """Run independent replications and stack their metrics.

    Replication ``r`` uses seed ``(config.seed, r)`` unless ``seeds`` is given.
    ``workers`` (default: ``GCIMB_THREADS`` or 1) bounds the process pool.
    """
    if seeds is None:
        seeds = run_seeds(config, runs or config.runs)
    seeds = tuple(seeds)
    if not seeds:
        raise ValueError("at least one run required")
    workers = workers or worker_count()
    jobs = [(config, s) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_run = list(pool.map(_run_arrays, jobs))
    else:
        per_run = [_run_arrays(j) for j in jobs]
    stacked = {f: np.stack([r[f] for r in per_run]) for f in FIELDS}
    return MonteCarloResult(config=config, seeds=seeds, nodes=config.topology.nodes, **stacked)
