"""AC power flow for a slack + PQ-bus network in per-unit.

The production solver is a polar Newton-Raphson with flat start. A
Gauss-Seidel-style successive-substitution solver is kept alongside as an
independent cross-check; the test suite requires both to agree.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NetworkGraph


class PowerFlowError(Exception):
    """Base class for power flow failures."""


class DivergedError(PowerFlowError):
    """Solver did not reach the mismatch tolerance within max_iter."""

    def __init__(self, message: str, last_mismatch: float):
        super().__init__(message)
        self.last_mismatch = last_mismatch


class SingularJacobianError(PowerFlowError):
    """Jacobian (or diagonal) became singular; topology likely degenerate."""


@dataclass(frozen=True)
class InjectionSnapshot:
    """Net per-bus power injection (generation minus load), per-unit.

    Entries are ordered like the network buses; the slack entry is fixed
    at zero (the slack bus carries no injection specification).
    """

    bus_ids: tuple[int, ...]
    p: tuple[float, ...]
    q: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.bus_ids) == len(self.p) == len(self.q)):
            raise ValueError("bus_ids, p and q must have equal length")
        if not all(np.isfinite(self.p)) or not all(np.isfinite(self.q)):
            raise ValueError("injections must be finite")

    @classmethod
    def from_bus_map(cls, graph: NetworkGraph,
                     injections: dict[int, tuple[float, float]]) -> "InjectionSnapshot":
        """Build a snapshot from {bus_id: (p, q)}; unlisted PQ buses get zero."""
        unknown = set(injections) - set(graph.bus_ids)
        if unknown:
            raise KeyError(f"injections reference unknown buses: {sorted(unknown)}")
        slack_id = graph.slack_bus.id
        p = []
        q = []
        for bus in graph.buses:
            if bus.id == slack_id:
                p.append(0.0)
                q.append(0.0)
            else:
                pi, qi = injections.get(bus.id, (0.0, 0.0))
                p.append(float(pi))
                q.append(float(qi))
        return cls(bus_ids=graph.bus_ids, p=tuple(p), q=tuple(q))


@dataclass(frozen=True)
class PowerFlowSolution:
    """Converged bus voltages: magnitude in p.u., angle in degrees."""

    bus_ids: tuple[int, ...]
    vm: tuple[float, ...]
    va_deg: tuple[float, ...]
    iterations: int
    max_mismatch: float

    def vm_at(self, bus_id: int) -> float:
        return self.vm[self.bus_ids.index(bus_id)]

    def va_at(self, bus_id: int) -> float:
        return self.va_deg[self.bus_ids.index(bus_id)]

    def complex_voltages(self) -> np.ndarray:
        return np.asarray(self.vm) * np.exp(1j * np.radians(self.va_deg))


def compute_mismatch(ybus: np.ndarray, inj: InjectionSnapshot,
                     vm: np.ndarray, va_rad: np.ndarray,
                     slack_index: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus power mismatch (specified minus implied) at PQ buses.

    Returns (dP, dQ) full-length arrays with zeros at the slack position,
    where the implied injection is s_k = v_k * conj((Y v)_k).
    """
    v = vm * np.exp(1j * va_rad)
    s_calc = v * np.conj(ybus @ v)
    dp = np.asarray(inj.p) - s_calc.real
    dq = np.asarray(inj.q) - s_calc.imag
    dp[slack_index] = 0.0
    dq[slack_index] = 0.0
    return dp, dq


def _solution(inj, vm, va_rad, iterations, mism) -> PowerFlowSolution:
    return PowerFlowSolution(
        bus_ids=inj.bus_ids,
        vm=tuple(float(x) for x in vm),
        va_deg=tuple(float(x) for x in np.degrees(va_rad)),
        iterations=iterations,
        max_mismatch=float(mism),
    )


def solve_newton_raphson(ybus: np.ndarray, inj: InjectionSnapshot,
                         tol: float = 1e-8, max_iter: int = 50,
                         slack_index: int = 0) -> PowerFlowSolution:
    """Polar Newton-Raphson power flow from a flat start (1.0 p.u., 0 deg)."""
    n = len(inj.bus_ids)
    pq = np.array([i for i in range(n) if i != slack_index])
    p_spec = np.asarray(inj.p)
    q_spec = np.asarray(inj.q)
    vm = np.ones(n)
    va = np.zeros(n)
    mism = np.inf

    for iteration in range(max_iter + 1):
        v = vm * np.exp(1j * va)
        ibus = ybus @ v
        s_calc = v * np.conj(ibus)
        dp = p_spec[pq] - s_calc.real[pq]
        dq = q_spec[pq] - s_calc.imag[pq]
        mism = max(np.max(np.abs(dp)), np.max(np.abs(dq)))
        if mism < tol:
            return _solution(inj, vm, va, iteration, mism)
        if iteration == max_iter:
            break

        diag_v = np.diag(v)
        diag_i = np.diag(ibus)
        diag_e = np.diag(v / vm)
        ds_dvm = diag_v @ np.conj(ybus @ diag_e) + np.conj(diag_i) @ diag_e
        ds_dva = 1j * diag_v @ np.conj(diag_i - ybus @ diag_v)
        j = np.block([
            [ds_dva.real[np.ix_(pq, pq)], ds_dvm.real[np.ix_(pq, pq)]],
            [ds_dva.imag[np.ix_(pq, pq)], ds_dvm.imag[np.ix_(pq, pq)]],
        ])
        try:
            dx = np.linalg.solve(j, np.concatenate([dp, dq]))
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(f"singular Jacobian at iteration {iteration}") from exc
        k = len(pq)
        va[pq] += dx[:k]
        vm[pq] += dx[k:]

    raise DivergedError(
        f"Newton-Raphson did not converge in {max_iter} iterations "
        f"(last mismatch {mism:.3e} p.u.)", last_mismatch=float(mism))


def solve_fixed_point_oracle(ybus: np.ndarray, inj: InjectionSnapshot,
                             tol: float = 1e-8, max_iter: int = 50000,
                             slack_index: int = 0) -> PowerFlowSolution:
    """Successive-substitution (Gauss-Seidel) solver, used as a cross-check.

    Deliberately shares no code with the Newton-Raphson path beyond the
    mismatch definition.
    """
    n = len(inj.bus_ids)
    pq = [i for i in range(n) if i != slack_index]
    v = np.ones(n, dtype=complex)
    s_spec = np.asarray(inj.p) + 1j * np.asarray(inj.q)
    if np.any(np.abs(np.diag(ybus)[pq]) == 0):
        raise SingularJacobianError("zero diagonal admittance at a PQ bus")

    mism = np.inf
    for iteration in range(1, max_iter + 1):
        for k in pq:
            rest = ybus[k] @ v - ybus[k, k] * v[k]
            v[k] = (np.conj(s_spec[k] / v[k]) - rest) / ybus[k, k]
        s_calc = v * np.conj(ybus @ v)
        err = s_spec - s_calc
        mism = np.max(np.abs(np.concatenate([err.real[pq], err.imag[pq]])))
        if mism < tol:
            return _solution(inj, np.abs(v), np.angle(v), iteration, mism)

    raise DivergedError(
        f"fixed-point oracle did not converge in {max_iter} sweeps "
        f"(last mismatch {mism:.3e} p.u.)", last_mismatch=float(mism))
