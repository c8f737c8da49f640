"""Microgrid network model: buses, switched lines, candidate topologies.

Builds incidence and bus-admittance matrices for any switch configuration,
checks that a configuration keeps every bus reachable from the slack bus,
and loads network definition files (see `data/fivebus.net` for the format).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np


class NetworkError(Exception):
    """Base class for network definition and configuration problems."""


class ParseError(NetworkError):
    """A network definition file could not be parsed."""


class ValidationError(NetworkError):
    """A parsed network violates one or more structural invariants."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConfigurationError(NetworkError):
    """A topology references a switch that does not exist."""


class TopologyError(NetworkError):
    """A switch configuration islands part of the grid."""


class BusKind(Enum):
    SLACK = "slack"
    PQ = "pq"


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind
    base_voltage: float = 1.0


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: int
    to_bus: int
    r_pu: float
    x_pu: float
    switch_id: str

    @property
    def impedance(self) -> complex:
        return complex(self.r_pu, self.x_pu)

    @property
    def admittance(self) -> complex:
        return 1.0 / self.impedance


@dataclass(frozen=True)
class TopologyConfig:
    """One candidate switch configuration (which line switches are closed)."""

    id: str
    closed_switches: frozenset[str]


@dataclass(frozen=True)
class ConnectivityReport:
    connected: bool
    unreachable: tuple[int, ...]


@dataclass(frozen=True)
class NetworkGraph:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    @property
    def slack_bus(self) -> Bus:
        return next(b for b in self.buses if b.kind is BusKind.SLACK)

    @property
    def slack_index(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.kind is BusKind.SLACK)

    def bus_index(self, bus_id: int) -> int:
        try:
            return self.bus_ids.index(bus_id)
        except ValueError:
            raise KeyError(f"unknown bus id {bus_id}") from None

    def switch_ids(self) -> frozenset[str]:
        return frozenset(line.switch_id for line in self.lines)

    def closed_lines(self, topo: TopologyConfig) -> tuple[Line, ...]:
        """Lines whose switch is closed under `topo`, in file order."""
        unknown = topo.closed_switches - self.switch_ids()
        if unknown:
            raise ConfigurationError(
                f"topology {topo.id} references unknown switches: "
                f"{sorted(unknown)}"
            )
        return tuple(l for l in self.lines if l.switch_id in topo.closed_switches)


def build_incidence_matrix(graph: NetworkGraph, topo: TopologyConfig) -> np.ndarray:
    """Oriented incidence matrix over closed lines.

    One row per closed line: -1 at the from-bus column, +1 at the to-bus
    column. Shape is (n_closed_lines, n_bus); 0 x N when nothing is closed.
    """
    closed = graph.closed_lines(topo)
    a = np.zeros((len(closed), graph.n_bus), dtype=int)
    for row, line in enumerate(closed):
        a[row, graph.bus_index(line.from_bus)] = -1
        a[row, graph.bus_index(line.to_bus)] = 1
    return a


def check_connectivity(graph: NetworkGraph, topo: TopologyConfig) -> ConnectivityReport:
    """Breadth-first reachability from the slack bus over closed lines."""
    closed = graph.closed_lines(topo)
    adjacency: dict[int, set[int]] = {b.id: set() for b in graph.buses}
    for line in closed:
        adjacency[line.from_bus].add(line.to_bus)
        adjacency[line.to_bus].add(line.from_bus)

    seen = {graph.slack_bus.id}
    frontier = [graph.slack_bus.id]
    while frontier:
        nxt = []
        for node in frontier:
            for nb in adjacency[node]:
                if nb not in seen:
                    seen.add(nb)
                    nxt.append(nb)
        frontier = nxt

    unreachable = tuple(sorted(set(graph.bus_ids) - seen))
    return ConnectivityReport(connected=not unreachable, unreachable=unreachable)


def build_ybus(graph: NetworkGraph, topo: TopologyConfig) -> np.ndarray:
    """Bus admittance matrix for the closed lines of `topo`.

    Diagonal entries sum the admittances of incident closed lines; the
    (i, j) off-diagonal is minus the line admittance when line ij is closed.
    Raises TopologyError when the configuration islands part of the grid.
    """
    report = check_connectivity(graph, topo)
    if not report.connected:
        raise TopologyError(
            f"topology {topo.id} leaves buses unreachable from the slack bus: "
            f"{list(report.unreachable)}"
        )
    n = graph.n_bus
    y = np.zeros((n, n), dtype=complex)
    for line in graph.closed_lines(topo):
        i = graph.bus_index(line.from_bus)
        j = graph.bus_index(line.to_bus)
        yl = line.admittance
        y[i, i] += yl
        y[j, j] += yl
        y[i, j] -= yl
        y[j, i] -= yl
    return y


def _parse_sections(path: Path) -> dict[str, list[tuple[int, str]]]:
    sections: dict[str, list[tuple[int, str]]] = {}
    current: str | None = None
    text = path.read_text()
    if not text.strip():
        raise ParseError(f"{path}: file is empty")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip().lower()
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ParseError(f"{path}:{lineno}: data before any [section] header")
        sections[current].append((lineno, stripped))
    return sections


def load_network(path: str | Path) -> tuple[NetworkGraph, list[TopologyConfig]]:
    """Load a network definition file and its candidate topologies.

    Raises ParseError on malformed rows (with line numbers) and
    ValidationError listing every violated invariant at once.
    """
    path = Path(path)
    sections = _parse_sections(path)
    for required in ("buses", "lines", "topologies"):
        if required not in sections:
            raise ParseError(f"{path}: missing [{required}] section")

    buses: list[Bus] = []
    for lineno, row in sections["buses"]:
        fields = [f.strip() for f in row.split(",")]
        if len(fields) != 3:
            raise ParseError(f"{path}:{lineno}: expected 'id,kind,base_voltage'")
        try:
            kind = BusKind(fields[1].lower())
            buses.append(Bus(id=int(fields[0]), kind=kind, base_voltage=float(fields[2])))
        except (ValueError, KeyError) as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc

    lines: list[Line] = []
    for lineno, row in sections["lines"]:
        fields = [f.strip() for f in row.split(",")]
        if len(fields) != 6:
            raise ParseError(f"{path}:{lineno}: expected 'id,from,to,r_pu,x_pu,switch'")
        try:
            lines.append(Line(id=fields[0], from_bus=int(fields[1]), to_bus=int(fields[2]),
                              r_pu=float(fields[3]), x_pu=float(fields[4]), switch_id=fields[5]))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc

    topologies: list[TopologyConfig] = []
    for lineno, row in sections["topologies"]:
        fields = [f.strip() for f in row.split(",")]
        if len(fields) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'id,closed_switch_list'")
        closed = frozenset(s.strip() for s in fields[1].split(";") if s.strip())
        topologies.append(TopologyConfig(id=fields[0], closed_switches=closed))

    graph = NetworkGraph(buses=tuple(buses), lines=tuple(lines))
    violations = validate_network(graph, topologies)
    if violations:
        raise ValidationError(violations)
    return graph, topologies


def validate_network(graph: NetworkGraph, topologies: list[TopologyConfig]) -> list[str]:
    """All invariant violations of a graph + topology set, empty when valid."""
    violations: list[str] = []
    ids = [b.id for b in graph.buses]
    if len(set(ids)) != len(ids):
        violations.append("duplicate bus ids")
    if sorted(ids) != list(range(1, len(ids) + 1)):
        violations.append("bus ids must be contiguous from 1")
    n_slack = sum(1 for b in graph.buses if b.kind is BusKind.SLACK)
    if n_slack != 1:
        violations.append(f"exactly one slack bus required, found {n_slack}")

    line_ids = [l.id for l in graph.lines]
    if len(set(line_ids)) != len(line_ids):
        violations.append("duplicate line ids")
    switch_ids = [l.switch_id for l in graph.lines]
    if len(set(switch_ids)) != len(switch_ids):
        violations.append("duplicate switch ids (one switch per line)")
    bus_id_set = set(ids)
    for line in graph.lines:
        if line.from_bus == line.to_bus:
            violations.append(f"line {line.id}: from_bus equals to_bus")
        if line.from_bus not in bus_id_set or line.to_bus not in bus_id_set:
            violations.append(f"line {line.id}: endpoint references unknown bus")
        if line.r_pu < 0:
            violations.append(f"line {line.id}: negative resistance {line.r_pu}")
        if abs(line.impedance) == 0:
            violations.append(f"line {line.id}: zero impedance")

    topo_ids = [t.id for t in topologies]
    if len(set(topo_ids)) != len(topo_ids):
        violations.append("duplicate topology ids")
    if violations:
        return violations  # connectivity checks need a structurally sound graph

    known_switches = graph.switch_ids()
    for topo in topologies:
        unknown = topo.closed_switches - known_switches
        if unknown:
            violations.append(
                f"topology {topo.id}: unknown switches {sorted(unknown)}")
            continue
        report = check_connectivity(graph, topo)
        if not report.connected:
            violations.append(
                f"topology {topo.id}: buses unreachable from slack: "
                f"{list(report.unreachable)}")
    return violations
