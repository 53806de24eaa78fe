from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.backend.errors import HGraphParseError, HGraphValidationError
from src.backend.utils import dump_json, to_index, to_label
from src.typings import ModeIndex, ModeLabel, ModePair

logger = logging.getLogger(__name__)

# Base graphs of the builtin "x2" instances: (modes per copy, 1-based edges)
BUILTIN_BASES: dict[str, tuple[int, tuple[tuple[int, int, int], ...]]] = {
    "two_epr": (2, ((1, 2, 1),)),
    "chain3x2": (3, ((1, 2, 1), (2, 3, 1))),
    "ghz3x2": (3, ((1, 2, 1), (2, 3, 1), (1, 3, 1))),
    "chain4x2": (4, ((1, 2, 1), (2, 3, 1), (3, 4, 1))),
    "square4x2": (4, ((1, 2, 1), (2, 3, 1), (3, 4, 1), (1, 4, -1))),
    "ring4x2": (4, ((1, 2, 1), (2, 3, 1), (3, 4, 1), (1, 4, 1))),
    "ghz4x2": (4, ((1, 2, 1), (1, 3, 1), (1, 4, 1), (2, 3, 1), (2, 4, 1), (3, 4, 1))),
}
BUILTIN_NAMES = tuple(BUILTIN_BASES)
BUILTIN_PREFIX = "builtin:"


@dataclass(frozen=True)
class HGraph:
    """Symmetric integer adjacency matrix G of the two-mode-squeezing interactions."""

    n_modes: int
    weights: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if isinstance(self.n_modes, bool) or not isinstance(self.n_modes, int):
            raise HGraphValidationError(f"n_modes must be an integer, but got {self.n_modes!r}")
        if self.n_modes < 2:
            raise HGraphValidationError(f"Graph must have at least 2 modes, but got {self.n_modes}")
        if len(self.weights) != self.n_modes or any(len(row) != self.n_modes for row in self.weights):
            raise HGraphValidationError(f"Weights must be a {self.n_modes}x{self.n_modes} matrix")

        for j, row in enumerate(self.weights):
            for k, weight in enumerate(row):
                if isinstance(weight, bool) or not isinstance(weight, int):
                    raise HGraphValidationError(
                        f"Weight G[{to_label(j)},{to_label(k)}] must be an integer, but got {weight!r}"
                    )
            if row[j] != 0:
                raise HGraphValidationError(f"Diagonal weight G[{to_label(j)},{to_label(j)}] must be 0, but got {row[j]}")
            for k in range(j + 1, self.n_modes):
                if row[k] != self.weights[k][j]:
                    raise HGraphValidationError(
                        f"Weights must be symmetric, but G[{to_label(j)},{to_label(k)}] = {row[k]} "
                        f"and G[{to_label(k)},{to_label(j)}] = {self.weights[k][j]}"
                    )

    @classmethod
    def from_edges(cls, n_modes: int, edges: Iterable[tuple[ModeIndex, ModeIndex, int]]) -> HGraph:
        """Builds a graph from 0-based (j, k, weight) triples; each unordered edge appears once."""
        matrix = [[0] * n_modes for _ in range(n_modes)]
        for j, k, weight in edges:
            matrix[j][k] = weight
            matrix[k][j] = weight
        return cls(n_modes, tuple(map(tuple, matrix)))

    @classmethod
    def empty(cls, n_modes: int) -> HGraph:
        return cls.from_edges(n_modes, [])

    @property
    def edges(self) -> tuple[tuple[ModeIndex, ModeIndex, int], ...]:
        """Nonzero edges as 0-based (j, k, weight) with j < k, in ascending order."""
        return tuple(
            (j, k, self.weights[j][k])
            for j in range(self.n_modes)
            for k in range(j + 1, self.n_modes)
            if self.weights[j][k] != 0
        )

    def to_numpy(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    def block(self, start: ModeIndex, stop: ModeIndex) -> tuple[tuple[int, ...], ...]:
        return tuple(row[start:stop] for row in self.weights[start:stop])

    @property
    def is_bipartite(self) -> bool:
        colours: dict[ModeIndex, int] = {}
        for root in range(self.n_modes):
            if root in colours:
                continue
            colours[root] = 0
            frontier = [root]
            while frontier:
                mode = frontier.pop()
                for neighbour in range(self.n_modes):
                    if self.weights[mode][neighbour] == 0:
                        continue
                    if neighbour not in colours:
                        colours[neighbour] = 1 - colours[mode]
                        frontier.append(neighbour)
                    elif colours[neighbour] == colours[mode]:
                        return False
        return True

    def is_twin(self) -> bool:
        """True if the graph is two identical, uncoupled copies on modes 1..n and n+1..2n."""
        if self.n_modes % 2:
            return False
        half = self.n_modes // 2
        coupled = any(self.weights[j][k] for j in range(half) for k in range(half, self.n_modes))
        return not coupled and self.block(0, half) == self.block(half, self.n_modes)


@dataclass(frozen=True)
class SpinPairing:
    """Disjoint mode pairs, each carrying one Schwinger spin. The first mode of a pair plays mode 1."""

    pairs: tuple[ModePair, ...]

    def __post_init__(self) -> None:
        seen: dict[ModeIndex, int] = {}
        for position, (mode_a, mode_b) in enumerate(self.pairs):
            if mode_a < 0 or mode_b < 0:
                raise HGraphValidationError(f"pairing[{position}] has a negative mode index: {(mode_a, mode_b)!r}")
            if mode_a == mode_b:
                raise HGraphValidationError(
                    f"pairing[{position}] = {[to_label(mode_a), to_label(mode_b)]!r} pairs mode {to_label(mode_a)} with itself"
                )
            for mode in (mode_a, mode_b):
                if mode in seen:
                    raise HGraphValidationError(
                        f"pairing[{position}] reuses mode {to_label(mode)} already in pairing[{seen[mode]}]"
                    )
                seen[mode] = position

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @classmethod
    def from_labels(cls, labels: Iterable[Sequence[ModeLabel]]) -> SpinPairing:
        return cls(tuple((to_index(a), to_index(b)) for a, b in labels))

    @classmethod
    def twin(cls, n_base: int) -> SpinPairing:
        """Pairs mode k with mode k+n for k = 1..n."""
        return cls(tuple((k, k + n_base) for k in range(n_base)))

    @property
    def labels(self) -> list[list[ModeLabel]]:
        return [[to_label(a), to_label(b)] for a, b in self.pairs]

    @property
    def modes(self) -> tuple[ModeIndex, ...]:
        return tuple(mode for pair in self.pairs for mode in pair)

    def relabeled_twin(self) -> SpinPairing:
        """Swaps the order of every second pair (pairs 2, 4, ...), e.g. (2,6) -> (6,2)."""
        return SpinPairing(
            tuple((b, a) if position % 2 else (a, b) for position, (a, b) in enumerate(self.pairs))
        )

    def validate_for(self, n_modes: int) -> None:
        for position, pair in enumerate(self.pairs):
            for mode in pair:
                if mode >= n_modes:
                    raise HGraphValidationError(
                        f"pairing[{position}] = {[to_label(m) for m in pair]!r} refers to mode {to_label(mode)}, "
                        f"outside 1..{n_modes}"
                    )


def _expect_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise HGraphParseError(f"{where} must be an integer, but got {value!r}")
    return value


def parse_hgraph(text: str) -> tuple[HGraph, SpinPairing | None]:
    """Parses {"modes": n, "edges": [[i, j, w], ...], "pairing": [[a, b], ...]} with 1-based indices."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise HGraphParseError(f"Graph document is not valid JSON: {e.msg} (line {e.lineno}, column {e.colno})")

    if not isinstance(document, dict):
        raise HGraphParseError(f"Graph document must be a JSON object, but got {type(document).__name__!r}")
    for key in document:
        if key not in ("modes", "edges", "pairing"):
            raise HGraphParseError(f"Unknown key {key!r} in graph document")
    for key in ("modes", "edges"):
        if key not in document:
            raise HGraphParseError(f"Graph document is missing the {key!r} key")

    n_modes = _expect_int(document["modes"], "'modes'")
    if n_modes < 2:
        raise HGraphValidationError(f"Graph must have at least 2 modes, but got {n_modes}")

    raw_edges = document["edges"]
    if not isinstance(raw_edges, list):
        raise HGraphParseError(f"'edges' must be a list, but got {type(raw_edges).__name__!r}")

    edges: list[tuple[ModeIndex, ModeIndex, int]] = []
    first_seen: dict[frozenset[int], int] = {}
    for position, edge in enumerate(raw_edges):
        if not isinstance(edge, list) or len(edge) != 3:
            raise HGraphParseError(f"edges[{position}] must be a list [i, j, w], but got {edge!r}")
        i, j, weight = (_expect_int(value, f"edges[{position}] entry") for value in edge)
        for mode in (i, j):
            if not 1 <= mode <= n_modes:
                raise HGraphValidationError(f"edges[{position}] = {edge!r} refers to mode {mode}, outside 1..{n_modes}")
        if i == j:
            raise HGraphValidationError(f"edges[{position}] = {edge!r} is a self-loop on mode {i}")
        key = frozenset((i, j))
        if key in first_seen:
            raise HGraphValidationError(f"edges[{position}] = {edge!r} duplicates edges[{first_seen[key]}]")
        first_seen[key] = position
        edges.append((to_index(i), to_index(j), weight))

    graph = HGraph.from_edges(n_modes, edges)

    pairing: SpinPairing | None = None
    if "pairing" in document:
        raw_pairing = document["pairing"]
        if not isinstance(raw_pairing, list):
            raise HGraphParseError(f"'pairing' must be a list, but got {type(raw_pairing).__name__!r}")
        labels: list[tuple[int, int]] = []
        for position, pair in enumerate(raw_pairing):
            if not isinstance(pair, list) or len(pair) != 2:
                raise HGraphParseError(f"pairing[{position}] must be a list [a, b], but got {pair!r}")
            a, b = (_expect_int(value, f"pairing[{position}] entry") for value in pair)
            for mode in (a, b):
                if not 1 <= mode <= n_modes:
                    raise HGraphValidationError(
                        f"pairing[{position}] = {pair!r} refers to mode {mode}, outside 1..{n_modes}"
                    )
            labels.append((a, b))
        pairing = SpinPairing.from_labels(labels)

    logger.info("Parsed graph with %d modes and %d edges", n_modes, len(edges))
    return graph, pairing


def serialize_hgraph(graph: HGraph, pairing: SpinPairing | None = None) -> str:
    document: dict[str, Any] = {
        "modes": graph.n_modes,
        "edges": [[to_label(j), to_label(k), weight] for j, k, weight in graph.edges],
    }
    if pairing is not None:
        document["pairing"] = pairing.labels
    return dump_json(document)


def twin(base: HGraph) -> HGraph:
    """Two uncoupled copies of `base` on modes 1..n and n+1..2n."""
    n = base.n_modes
    edges = [*base.edges, *((j + n, k + n, weight) for j, k, weight in base.edges)]
    return HGraph.from_edges(2 * n, edges)


def builtin(name: str) -> tuple[HGraph, SpinPairing]:
    if name not in BUILTIN_BASES:
        raise HGraphValidationError(f"Unknown builtin graph {name!r}; expected one of {', '.join(BUILTIN_NAMES)}")
    n_base, base_edges = BUILTIN_BASES[name]
    base = HGraph.from_edges(n_base, ((to_index(j), to_index(k), weight) for j, k, weight in base_edges))
    return twin(base), SpinPairing.twin(n_base)


def load_graph_source(source: str) -> tuple[HGraph, SpinPairing | None]:
    """Resolves a CLI graph source: "builtin:NAME" or a path to a graph document."""
    if source.startswith(BUILTIN_PREFIX):
        return builtin(source[len(BUILTIN_PREFIX) :])
    try:
        with open(source, encoding="utf-8") as file:
            text = file.read()
    except OSError as e:
        raise HGraphParseError(f"Cannot read graph document {source!r}: {e.strerror}")
    return parse_hgraph(text)
