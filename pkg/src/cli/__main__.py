import argparse
import json
import logging
import math
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, NoReturn

from src.backend.entangle import entanglement_report
from src.backend.focksim import (
    FockVector,
    SpinSectorState,
    casimir_postselect,
    evolve_vacuum,
    measure_spins,
    relabel_twin,
    sample_counts,
    spin_statistics,
)
from src.backend.heisenberg import decomposition_report, diagonalize
from src.backend.hgraph import SpinPairing, load_graph_source
from src.backend.nullifiers import canonicalize_twin, find_nullifiers, nullifier_report
from src.backend.utils import DEFAULT_CUTOFF, DEFAULT_R, DEFAULT_R_GRID, dump_json, parse_half_integer
from src.cli.reproduce import run_acceptance

logger = logging.getLogger(__name__)

COMMANDS = ("nullifiers", "diagonalize", "simulate", "postselect", "measure", "entangle", "reproduce")
GRAPH_COMMANDS = {"nullifiers", "diagonalize", "simulate"}


class ExitCode(IntEnum):
    SUCCESS = 0
    USAGE = 1
    VALIDATION = 2
    ACCEPTANCE = 3


class CliArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(ExitCode.USAGE, f"{self.prog}: error: {message}\n")


def parse_pairing(text: str) -> SpinPairing:
    """"1-3,2-4" -> pairs (1, 3) and (2, 4)."""
    labels = []
    for entry in text.split(","):
        parts = entry.strip().split("-")
        if len(parts) != 2 or not all(part.strip().isdigit() for part in parts):
            raise ValueError(f"--pairing entry {entry.strip()!r} must look like 'a-b' with 1-based mode numbers")
        labels.append((int(parts[0]), int(parts[1])))
    if any(a < 1 or b < 1 for a, b in labels):
        raise ValueError(f"--pairing entries must use 1-based mode numbers, but got {text!r}")
    return SpinPairing.from_labels(labels)


def parse_float_list(text: str, flag: str) -> tuple[float, ...]:
    try:
        values = tuple(float(entry) for entry in text.split(","))
    except ValueError:
        raise ValueError(f"{flag} must be a comma-separated list of numbers, but got {text!r}")
    return values


def parse_j_list(text: str) -> tuple[float, ...]:
    return tuple(parse_half_integer(entry.strip()) for entry in text.split(","))


@dataclass(frozen=True)
class RunConfig:
    command: str
    graph: str | None = None
    pairing: SpinPairing | None = None
    r: float = DEFAULT_R
    r_grid: tuple[float, ...] = DEFAULT_R_GRID
    cutoff: int = DEFAULT_CUTOFF
    j_list: tuple[float, ...] | None = None
    thetas: tuple[float, ...] = ()
    phis: tuple[float, ...] = ()
    out: str | None = None
    seed: int | None = None
    shots: int | None = None
    state: str | None = None
    sector: str | None = None
    canonical: bool = False
    relabel: bool = False
    verbose: bool = False

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"Unknown command {self.command!r}")
        if self.command in GRAPH_COMMANDS and self.graph is None:
            raise ValueError(f"--graph is required for {self.command!r}")
        if self.command == "postselect" and self.state is None:
            raise ValueError("--state is required for 'postselect'")
        if self.command == "postselect" and self.j_list is None:
            raise ValueError("--j is required for 'postselect'")
        if self.command == "measure" and (self.state is None) == (self.sector is None):
            raise ValueError("'measure' needs exactly one of --state and --sector")
        if self.command == "entangle" and self.sector is None:
            raise ValueError("--sector is required for 'entangle'")
        if not math.isfinite(self.r) or self.r < 0:
            raise ValueError(f"--r must be a non-negative number, but got {self.r!r}")
        if not self.r_grid or any(not math.isfinite(r) or r < 0 for r in self.r_grid):
            raise ValueError(f"--r-grid must be a non-empty list of non-negative numbers, but got {list(self.r_grid)!r}")
        if self.cutoff < 2 or self.cutoff % 2:
            raise ValueError(f"--cutoff must be an even integer >= 2, but got {self.cutoff!r}")
        if self.shots is not None and self.shots < 1:
            raise ValueError(f"--shots must be a positive integer, but got {self.shots!r}")

    @classmethod
    def from_namespace(cls, namespace: argparse.Namespace) -> "RunConfig":
        return cls(
            command=namespace.command,
            graph=namespace.graph,
            pairing=parse_pairing(namespace.pairing) if namespace.pairing else None,
            r=namespace.r,
            r_grid=parse_float_list(namespace.r_grid, "--r-grid") if namespace.r_grid else DEFAULT_R_GRID,
            cutoff=namespace.cutoff,
            j_list=parse_j_list(namespace.j) if namespace.j else None,
            thetas=tuple(namespace.theta or ()),
            phis=tuple(namespace.phi or ()),
            out=namespace.out,
            seed=namespace.seed,
            shots=namespace.shots,
            state=namespace.state,
            sector=namespace.sector,
            canonical=namespace.canonical,
            relabel=namespace.relabel,
            verbose=namespace.verbose,
        )


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(prog="python -m src.cli", description="Schwinger-spin nullifiers of two-mode-squeezing graphs")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--graph", help="builtin:NAME or path to a graph document")
    parser.add_argument("--pairing", help="spin pairs as 1-based modes, e.g. 1-3,2-4")
    parser.add_argument("--r", type=float, default=DEFAULT_R, help="squeezing parameter")
    parser.add_argument("--r-grid", dest="r_grid", help="comma-separated r values for verification tables")
    parser.add_argument("--cutoff", type=int, default=DEFAULT_CUTOFF, help="total photon-number cutoff (even)")
    parser.add_argument("--j", help="comma-separated spin magnitudes, e.g. 1/2,1/2")
    parser.add_argument("--theta", type=float, action="append", help="polar angle per measured pair (repeatable)")
    parser.add_argument("--phi", type=float, action="append", help="azimuthal angle per measured pair (repeatable)")
    parser.add_argument("--out", help="write the report here instead of stdout")
    parser.add_argument("--seed", type=int, help="seed for measurement sampling")
    parser.add_argument("--shots", type=int, help="number of sampled measurement shots")
    parser.add_argument("--state", help="state dump written by 'simulate'")
    parser.add_argument("--sector", help="sector dump written by 'postselect'")
    parser.add_argument("--canonical", action="store_true", help="report nullifiers after the twin relabeling")
    parser.add_argument("--relabel", action="store_true", help="apply the twin relabeling to the simulated state")
    parser.add_argument("--verbose", action="store_true")
    return parser


def _read_json(path: str, flag: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as file:
            return json.load(file)
    except OSError as e:
        raise ValueError(f"Cannot read {flag} {path!r}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise ValueError(f"{flag} {path!r} is not valid JSON: {e.msg}")


def _graph_and_pairing(config: RunConfig, required: bool = True):
    graph, document_pairing = load_graph_source(config.graph)  # type: ignore (checked by RunConfig)
    pairing = config.pairing or document_pairing
    if pairing is None and required:
        raise ValueError(f"--pairing is required: graph {config.graph!r} does not declare one")
    if pairing is not None:
        pairing.validate_for(graph.n_modes)
    return graph, pairing


def run_nullifiers(config: RunConfig) -> dict[str, Any]:
    graph, pairing = _graph_and_pairing(config)
    nullifier_set = find_nullifiers(graph, pairing)
    if config.canonical:
        nullifier_set = canonicalize_twin(nullifier_set)
    report = nullifier_report(nullifier_set, graph, config.r_grid, config.cutoff)
    report["graph"] = config.graph
    return report


def run_diagonalize(config: RunConfig) -> dict[str, Any]:
    graph, _ = _graph_and_pairing(config, required=False)
    report = decomposition_report(diagonalize(graph))
    report["graph"] = config.graph
    return report


def run_simulate(config: RunConfig) -> dict[str, Any]:
    graph, pairing = _graph_and_pairing(config, required=config.relabel)
    state = evolve_vacuum(graph, config.r, config.cutoff)
    if config.relabel:
        state, pairing = relabel_twin(state, pairing)
    document = state.to_dict(pairing)
    document["relabeled"] = config.relabel
    return document


def run_postselect(config: RunConfig) -> dict[str, Any]:
    document = _read_json(config.state, "--state")  # type: ignore (checked by RunConfig)
    state = FockVector.from_dict(document)
    pairing = config.pairing or (SpinPairing.from_labels(document["pairing"]) if document.get("pairing") else None)
    if pairing is None:
        raise ValueError("--pairing is required: the state dump does not declare one")
    return casimir_postselect(state, pairing, config.j_list).to_dict()  # type: ignore (checked by RunConfig)


def run_measure(config: RunConfig) -> dict[str, Any]:
    if config.sector is not None:
        state: FockVector | SpinSectorState = SpinSectorState.from_dict(_read_json(config.sector, "--sector"))
        default_pairing = state.pairing
    else:
        document = _read_json(config.state, "--state")  # type: ignore (checked by RunConfig)
        state = FockVector.from_dict(document)
        default_pairing = SpinPairing.from_labels(document["pairing"]) if document.get("pairing") else None
    pairing = config.pairing or default_pairing
    if pairing is None:
        raise ValueError("--pairing is required: the state dump does not declare one")

    n_pairs = len(pairing)
    thetas, phis = config.thetas or (0.0,) * n_pairs, config.phis or (0.0,) * n_pairs
    if len(thetas) != n_pairs:
        raise ValueError(f"--theta was given {len(thetas)} time(s) but {n_pairs} pair(s) are measured")
    if len(phis) != n_pairs:
        raise ValueError(f"--phi was given {len(phis)} time(s) but {n_pairs} pair(s) are measured")

    settings = list(zip(pairing, thetas, phis))
    distribution = measure_spins(state, settings)
    marginals = []
    for position in range(n_pairs):
        marginal: dict[tuple[int, int], float] = {}
        for outcome, probability in distribution.items():
            marginal[outcome[position]] = marginal.get(outcome[position], 0.0) + probability
        statistics = spin_statistics(marginal)
        marginals.append(
            {
                "n_plus": [[n, p] for n, p in statistics["n_plus"].items()],
                "projection": [[m, p] for m, p in statistics["projection"].items()],
                "mean_projection": statistics["mean_projection"],
            }
        )
    report: dict[str, Any] = {
        "pairing": pairing.labels,
        "settings": [{"theta": theta, "phi": phi} for _, theta, phi in settings],
        "distribution": [
            {"outcome": [list(counts) for counts in outcome], "probability": probability}
            for outcome, probability in distribution.items()
        ],
        "marginals": marginals,
    }
    if config.shots is not None:
        counts = sample_counts(distribution, config.shots, config.seed)
        report["seed"] = config.seed
        report["shots"] = config.shots
        report["counts"] = [{"outcome": [list(c) for c in outcome], "count": n} for outcome, n in counts.items()]
    return report


def run_entangle(config: RunConfig) -> dict[str, Any]:
    sector = SpinSectorState.from_dict(_read_json(config.sector, "--sector"))  # type: ignore (checked by RunConfig)
    return entanglement_report(sector, state_id=config.sector).to_dict()  # type: ignore


def _emit(document: dict[str, Any], out: str | None) -> None:
    text = dump_json(document)
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8") as file:
            file.write(text)
    except OSError as e:
        raise ValueError(f"Cannot write --out {out!r}: {e.strerror}")


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        namespace = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.INFO if namespace.verbose else logging.WARNING, format="%(levelname)s:%(name)s:%(message)s"
    )
    try:
        config = RunConfig.from_namespace(namespace)
        if config.command == "reproduce":
            report = run_acceptance(config.r_grid, config.cutoff, config.seed)
            _emit(report, config.out)
            return ExitCode.SUCCESS if report["passed"] else ExitCode.ACCEPTANCE

        handlers = {
            "nullifiers": run_nullifiers,
            "diagonalize": run_diagonalize,
            "simulate": run_simulate,
            "postselect": run_postselect,
            "measure": run_measure,
            "entangle": run_entangle,
        }
        _emit(handlers[config.command](config), config.out)
    except (ValueError, ArithmeticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.VALIDATION
    return ExitCode.SUCCESS


if __name__ == "__main__":
    sys.exit(run())
