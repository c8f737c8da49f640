"""Voting-based topology detection from phasor measurements.

Compares measured voltage phasors against a library of power-flow states
computed for every candidate topology, forms angle and magnitude
difference matrices (one row per μPMU, one column per candidate), and
applies three voting criteria over the row minima.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NetworkGraph, TopologyConfig, build_ybus
from .powerflow import (
    InjectionSnapshot,
    PowerFlowError,
    PowerFlowSolution,
    solve_newton_raphson,
)

CRITERIA = ("rmv", "armv", "ormv")
SIGNALS = ("angle", "magnitude")
INCONCLUSIVE = "inconclusive"


class LibraryError(Exception):
    """A library power flow failed for a specific (topology, time) pair."""


@dataclass(frozen=True)
class TopologyLibrary:
    """Power-flow state per candidate topology per time step."""

    topology_ids: tuple[str, ...]
    entries: dict[tuple[str, int], PowerFlowSolution]

    def solution(self, topology_id: str, t: int) -> PowerFlowSolution:
        try:
            return self.entries[(topology_id, t)]
        except KeyError:
            raise KeyError(f"no library entry for topology {topology_id} at t={t}") from None

    @property
    def time_indices(self) -> tuple[int, ...]:
        return tuple(sorted({t for (_, t) in self.entries}))


@dataclass(frozen=True)
class DifferenceMatrices:
    """|measured - calculated| per μPMU row and candidate-topology column.

    adm holds angle deltas in degrees, mdm magnitude deltas in p.u.
    """

    adm: np.ndarray
    mdm: np.ndarray
    pmu_bus_ids: tuple[int, ...]
    topology_ids: tuple[str, ...]

    def matrix(self, signal: str) -> np.ndarray:
        if signal == "angle":
            return self.adm
        if signal == "magnitude":
            return self.mdm
        raise ValueError(f"unknown signal {signal!r}")


@dataclass(frozen=True)
class DetectionOutcome:
    criterion: str
    signal: str
    verdict: str  # topology id or INCONCLUSIVE
    per_row_votes: tuple[str | None, ...] = ()  # None = row abstained (tied)


def build_library(graph: NetworkGraph, topologies: list[TopologyConfig],
                  injections_by_step: dict[int, InjectionSnapshot],
                  tol: float = 1e-8) -> TopologyLibrary:
    """Solve the power flow for every (candidate topology, time step) pair."""
    entries: dict[tuple[str, int], PowerFlowSolution] = {}
    slack = graph.slack_index
    for topo in topologies:
        ybus = build_ybus(graph, topo)
        for t, inj in injections_by_step.items():
            try:
                entries[(topo.id, t)] = solve_newton_raphson(
                    ybus, inj, tol=tol, slack_index=slack)
            except PowerFlowError as exc:
                raise LibraryError(
                    f"power flow failed for topology {topo.id} at t={t}: {exc}"
                ) from exc
    return TopologyLibrary(topology_ids=tuple(t.id for t in topologies), entries=entries)


def compute_difference_matrices(measurements, library: TopologyLibrary,
                                t: int) -> DifferenceMatrices:
    """ADM/MDM at time step t for one measurement set."""
    phasors = sorted(measurements.phasors, key=lambda m: m.bus_id)
    topo_ids = library.topology_ids
    adm = np.zeros((len(phasors), len(topo_ids)))
    mdm = np.zeros_like(adm)
    for col, q in enumerate(topo_ids):
        sol = library.solution(q, t)
        for row, ph in enumerate(phasors):
            if ph.bus_id not in sol.bus_ids:
                raise LibraryError(
                    f"μPMU bus {ph.bus_id} missing from library solution "
                    f"for topology {q} at t={t}")
            adm[row, col] = abs(ph.va_meas - sol.va_at(ph.bus_id))
            mdm[row, col] = abs(ph.vm_meas - sol.vm_at(ph.bus_id))
    return DifferenceMatrices(adm=adm, mdm=mdm,
                              pmu_bus_ids=tuple(ph.bus_id for ph in phasors),
                              topology_ids=topo_ids)


def row_votes(matrix: np.ndarray, topology_ids: tuple[str, ...]) -> tuple[str | None, ...]:
    """Argmin vote per row; a row whose minimum is tied abstains (None).

    A tied row cannot discriminate between candidates, which happens
    systematically for the slack bus (its calculated state is identical
    under every topology).
    """
    votes: list[str | None] = []
    for row in matrix:
        m = row.min()
        winners = np.flatnonzero(row == m)
        votes.append(topology_ids[winners[0]] if len(winners) == 1 else None)
    return tuple(votes)


def detect_rmv(matrices: DifferenceMatrices, signal: str) -> DetectionOutcome:
    """Row-minimum voting: majority over per-row argmin votes.

    A tie in the vote count (or no informative row) is inconclusive.
    """
    votes = row_votes(matrices.matrix(signal), matrices.topology_ids)
    counts: dict[str, int] = {}
    for v in votes:
        if v is not None:
            counts[v] = counts.get(v, 0) + 1
    if not counts:
        return DetectionOutcome("rmv", signal, INCONCLUSIVE, votes)
    best = max(counts.values())
    leaders = [q for q, c in counts.items() if c == best]
    verdict = leaders[0] if len(leaders) == 1 else INCONCLUSIVE
    return DetectionOutcome("rmv", signal, verdict, votes)


def detect_armv(matrices: DifferenceMatrices, signal: str) -> DetectionOutcome:
    """Average-row-minimum voting: argmin over per-topology column means."""
    matrix = matrices.matrix(signal)
    col_means = matrix.mean(axis=0)
    verdict = matrices.topology_ids[int(np.argmin(col_means))]
    return DetectionOutcome("armv", signal, verdict, ())


def detect_ormv(matrices: DifferenceMatrices, signal: str) -> DetectionOutcome:
    """Overall-row-minimum voting: conclusive only on unanimous row votes."""
    votes = row_votes(matrices.matrix(signal), matrices.topology_ids)
    informative = [v for v in votes if v is not None]
    if informative and all(v == informative[0] for v in informative):
        return DetectionOutcome("ormv", signal, informative[0], votes)
    return DetectionOutcome("ormv", signal, INCONCLUSIVE, votes)


def detect(matrices: DifferenceMatrices, criterion: str, signal: str) -> DetectionOutcome:
    if criterion == "rmv":
        return detect_rmv(matrices, signal)
    if criterion == "armv":
        return detect_armv(matrices, signal)
    if criterion == "ormv":
        return detect_ormv(matrices, signal)
    raise ValueError(f"unknown criterion {criterion!r}")
