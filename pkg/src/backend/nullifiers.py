from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Any, NamedTuple

import numpy as np
from scipy import sparse
from sympy import QQ_I
from sympy.polys.domains.gaussiandomains import GaussianRational
from sympy.polys.matrices import DomainMatrix

from src.backend import focksim
from src.backend.heisenberg import cv_nullifiers, diagonalize
from src.backend.hgraph import HGraph, SpinPairing, builtin
from src.backend.qops import (
    IMAG,
    ONE,
    UNIT_KEY,
    ZERO,
    Coefficient,
    QuadOp,
    commutator,
    dense_matrix,
    hamiltonian_generator,
    mixed,
    nullifies_vacuum,
    quad_product,
    quadratic_basis,
    schwinger_spin,
    to_complex,
)
from src.backend.utils import (
    DEFAULT_CUTOFF,
    DEFAULT_R_GRID,
    PROJECTION_RESIDUAL_THRESHOLD,
    SPIN_COMPONENT_ORDER,
    complex_record,
    rational_string,
    spin_label,
)
from src.typings import NullifierKind, SpinComponent

logger = logging.getLogger(__name__)


# ---- exact row reduction over Q(i) ----


def _rref(rows: Sequence[Sequence[GaussianRational]], n_cols: int) -> tuple[list[list[GaussianRational]], tuple[int, ...]]:
    if not rows or n_cols == 0:
        return [], ()
    matrix = DomainMatrix([list(row) for row in rows], (len(rows), n_cols), QQ_I)
    reduced, pivots = matrix.rref()
    nonzero = [row for row in reduced.to_list() if any(row)]
    return nonzero, tuple(pivots)


def _nullspace(rows: Sequence[Sequence[GaussianRational]], n_cols: int) -> list[list[GaussianRational]]:
    reduced, pivots = _rref(rows, n_cols)
    vectors = []
    for free in (column for column in range(n_cols) if column not in pivots):
        vector = [ZERO] * n_cols
        vector[free] = ONE
        for row, pivot in zip(reduced, pivots):
            vector[pivot] = -row[free]
        vectors.append(vector)
    return vectors


def _rank(rows: Sequence[Sequence[GaussianRational]], n_cols: int) -> int:
    return len(_rref(rows, n_cols)[0])


def format_coefficient(value: Coefficient) -> str:
    if not isinstance(value, GaussianRational):
        return f"({value.real:.6g}{value.imag:+.6g}i)"
    if not value.y:
        return rational_string(value.x).removesuffix("/1")
    if not value.x:
        return f"{rational_string(value.y).removesuffix('/1')}i"
    return f"({rational_string(value.x).removesuffix('/1')}+{rational_string(value.y).removesuffix('/1')}i)"


def format_expression(coordinates: Sequence[Coefficient], labels: Sequence[str]) -> str:
    parts: list[str] = []
    for value, label in zip(coordinates, labels):
        if isinstance(value, GaussianRational) and not value:
            continue
        if not isinstance(value, GaussianRational) and abs(value) < 1e-12:
            continue
        negative = isinstance(value, GaussianRational) and not value.y and value.x < 0
        magnitude = -value if negative else value
        text = format_coefficient(magnitude)
        term = label if text == "1" else f"{text}·{label}"
        if not parts:
            parts.append(f"-{term}" if negative else term)
        else:
            parts.append(f"{'-' if negative else '+'} {term}")
    return " ".join(parts) if parts else "0"


# ---- bases ----


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Linearly independent quadratic operators; `trivial` holds elements reported apart (the identity)."""

    elements: tuple[QuadOp, ...]
    n_modes: int
    labels: tuple[str, ...] | None = None
    trivial: tuple[QuadOp, ...] = ()

    @property
    def dimension(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def rank(self) -> int:
        basis = quadratic_basis(self.n_modes)
        return _rank([element.vector(basis) for element in self.elements], len(basis))


def ad_kernel(generator: QuadOp, n_modes: int | None = None) -> OperatorBasis:
    """Kernel of X -> [K, X] on the full quadratic space, by exact row reduction. The identity goes to `trivial`."""
    generator.require_exact("ad_kernel")
    n_modes = max(generator.max_mode() + 1, n_modes or 0)
    if n_modes < 1:
        raise ValueError("ad_kernel needs at least one mode")
    basis = quadratic_basis(n_modes)
    images = [commutator(generator, QuadOp.monomial(key)).vector(basis) for key in basis]
    rows = [[images[column][row] for column in range(len(basis))] for row in range(len(basis))]

    elements = [QuadOp.from_terms(dict(zip(basis, vector))) for vector in _nullspace(rows, len(basis))]
    nontrivial = tuple(element for element in elements if element != QuadOp.unit())
    logger.info("Adjoint kernel on %d modes: dimension %d (+ identity)", n_modes, len(nontrivial))
    return OperatorBasis(nontrivial, n_modes, trivial=(QuadOp.unit(),))


def spin_labels(pairing: SpinPairing) -> tuple[str, ...]:
    return tuple(spin_label(component, a, b) for a, b in pairing for component in SPIN_COMPONENT_ORDER)


def spin_span(pairing: SpinPairing) -> OperatorBasis:
    """J0, Jz, Jx, Jy of every pair (in that order), then the identity."""
    elements = [schwinger_spin(pair, component) for pair in pairing for component in SPIN_COMPONENT_ORDER]
    elements.append(QuadOp.unit())
    n_modes = max(pairing.modes, default=-1) + 1
    return OperatorBasis(tuple(elements), n_modes, (*spin_labels(pairing), "𝟙"))


def spin_coordinates(op: QuadOp, pairing: SpinPairing) -> list[Coefficient] | None:
    """Coordinates over (J0, Jz, Jx, Jy per pair, 𝟙), or None if `op` is outside the spin span."""
    coordinates: list[Coefficient] = []
    for a, b in pairing:
        c_aa, c_bb = op.coefficient(mixed(a, a)), op.coefficient(mixed(b, b))
        c_ab, c_ba = op.coefficient(mixed(a, b)), op.coefficient(mixed(b, a))
        imag = 1j if op.approximate else IMAG
        coordinates += [c_aa + c_bb, c_aa - c_bb, c_ab + c_ba, imag * (c_ab - c_ba)]
    coordinates.append(op.coefficient(UNIT_KEY))

    rebuilt = QuadOp.zero()
    for value, element in zip(coordinates, spin_span(pairing)):
        rebuilt = rebuilt + element * value
    return coordinates if rebuilt == op else None


# ---- nullifier sets ----


@dataclass(frozen=True, eq=False)
class SpinNullifier:
    operator: QuadOp
    coordinates: tuple[Coefficient, ...]
    labels: tuple[str, ...]
    kind: NullifierKind = "exact"
    rate: float = 0.0

    @property
    def expression(self) -> str:
        return format_expression(self.coordinates, self.labels)

    def __repr__(self) -> str:
        return f"SpinNullifier({self.expression}, kind={self.kind})"

    def to_dict(self) -> dict[str, Any]:
        coordinates: dict[str, Any] = {}
        for value, label in zip(self.coordinates, self.labels):
            if isinstance(value, GaussianRational):
                if value:
                    coordinates[label] = {"re": rational_string(value.x), "im": rational_string(value.y)}
            elif abs(value) > 1e-12:
                coordinates[label] = complex_record(value)
        return {
            "expression": self.expression,
            "kind": self.kind,
            "rate": self.rate,
            "spin_coordinates": coordinates,
            "terms": self.operator.to_records(),
        }


class AsymptoticCandidate(NamedTuple):
    """quad_product of two squeezed forms, its decay rate and its distance from the spin span."""

    forms: tuple[int, int]
    rate: float
    product: QuadOp
    residual: float
    coordinates: tuple[complex, ...] | None

    @property
    def in_span(self) -> bool:
        return self.coordinates is not None

    def to_dict(self, labels: Sequence[str]) -> dict[str, Any]:
        record: dict[str, Any] = {
            "forms": [index + 1 for index in self.forms],
            "rate": self.rate,
            "residual": self.residual,
            "in_span": self.in_span,
        }
        if self.coordinates is not None:
            record["expression"] = format_expression(self.coordinates, labels)
        return record


@dataclass(frozen=True, eq=False)
class NullifierSet:
    pairing: SpinPairing
    exact: tuple[SpinNullifier, ...]
    asymptotic: tuple[AsymptoticCandidate, ...] = ()
    candidates: tuple[AsymptoticCandidate, ...] = ()
    kernel_dimension: int | None = None
    relabeled: bool = False

    @property
    def spin_expression(self) -> list[tuple[Coefficient, ...]]:
        """Exact elements over the labeled spin basis, identity coordinate last."""
        return [(*nullifier.coordinates, ZERO) for nullifier in self.exact]


def _canonical_nullifiers(vectors: Iterable[Sequence[GaussianRational]], pairing: SpinPairing) -> tuple[SpinNullifier, ...]:
    labels = spin_labels(pairing)
    rows, _ = _rref(list(vectors), len(labels))
    elements = spin_span(pairing).elements
    nullifiers = []
    for row in rows:
        operator = QuadOp.zero()
        for value, element in zip(row, elements):
            operator = operator + element * value
        nullifiers.append(SpinNullifier(operator, tuple(row), labels))
    return tuple(nullifiers)


def exact_spin_nullifiers(graph: HGraph, pairing: SpinPairing, kernel: OperatorBasis | None = None) -> tuple[SpinNullifier, ...]:
    """ad_kernel(K) ∩ spin span, without the identity, in reduced row echelon form over (J0, Jz, Jx, Jy per pair)."""
    pairing.validate_for(graph.n_modes)
    if kernel is None:
        kernel = ad_kernel(hamiltonian_generator(graph), graph.n_modes)
    span = spin_span(pairing)
    basis = quadratic_basis(graph.n_modes)

    columns = [element.vector(basis) for element in (*kernel.elements, *kernel.trivial, *span.elements)]
    rows = [[column[row] for column in columns] for row in range(len(basis))]
    offset = kernel.dimension + len(kernel.trivial)

    # β coordinates of the intersection; the identity lies in both spaces and is dropped
    intersection = [vector[offset:-1] for vector in _nullspace(rows, len(columns))]
    nullifiers = _canonical_nullifiers(intersection, pairing)
    logger.info("Pairing %s: %d exact spin nullifier(s)", pairing.labels, len(nullifiers))
    return nullifiers


def combined_nullifier_span(graph: HGraph, pairings: Iterable[SpinPairing]) -> list[QuadOp]:
    """Basis of the union of the exact nullifier spans of several pairings, as operators."""
    kernel = ad_kernel(hamiltonian_generator(graph), graph.n_modes)
    basis = quadratic_basis(graph.n_modes)
    vectors = [
        nullifier.operator.vector(basis)
        for pairing in pairings
        for nullifier in exact_spin_nullifiers(graph, pairing, kernel)
    ]
    rows, _ = _rref(vectors, len(basis))
    return [QuadOp.from_terms(dict(zip(basis, row))) for row in rows]


def in_span(op: QuadOp, elements: Sequence[QuadOp], n_modes: int) -> bool:
    op.require_exact("in_span")
    basis = quadratic_basis(n_modes)
    vectors = [element.vector(basis) for element in elements]
    return _rank([*vectors, op.vector(basis)], len(basis)) == _rank(vectors, len(basis))


def _project(product: QuadOp, pairing: SpinPairing, n_modes: int) -> tuple[float, tuple[complex, ...] | None]:
    basis = quadratic_basis(n_modes)
    span = np.array([[to_complex(value) for value in element.vector(basis)] for element in spin_span(pairing)]).T
    target = np.array([to_complex(value) for value in product.vector(basis)])
    coordinates, *_ = np.linalg.lstsq(span, target, rcond=None)
    residual = float(np.linalg.norm(span @ coordinates - target) / max(np.linalg.norm(target), 1e-300))
    if residual < PROJECTION_RESIDUAL_THRESHOLD:
        return residual, tuple(complex(value) for value in coordinates)
    return residual, None


def asymptotic_candidates(graph: HGraph, pairing: SpinPairing) -> tuple[AsymptoticCandidate, ...]:
    """Every product f_i·f_j (i <= j, squares included) of squeezed forms with its projection residual onto the spin span."""
    pairing.validate_for(graph.n_modes)
    squeezed = [nullifier for nullifier in cv_nullifiers(diagonalize(graph)) if nullifier.kind == "squeezed"]
    candidates = []
    for (i, first), (j, second) in combinations_with_replacement(enumerate(squeezed), 2):
        product = quad_product(first.form, second.form)
        residual, coordinates = _project(product, pairing, graph.n_modes)
        candidates.append(AsymptoticCandidate((i, j), first.rate + second.rate, product, residual, coordinates))
    return tuple(candidates)


def asymptotic_spin_nullifiers(graph: HGraph, pairing: SpinPairing) -> tuple[AsymptoticCandidate, ...]:
    return tuple(candidate for candidate in asymptotic_candidates(graph, pairing) if candidate.in_span)


def find_nullifiers(graph: HGraph, pairing: SpinPairing) -> NullifierSet:
    kernel = ad_kernel(hamiltonian_generator(graph), graph.n_modes)
    candidates = asymptotic_candidates(graph, pairing)
    return NullifierSet(
        pairing,
        exact_spin_nullifiers(graph, pairing, kernel),
        tuple(candidate for candidate in candidates if candidate.in_span),
        candidates,
        kernel.dimension,
    )


def canonicalize_twin(nullifier_set: NullifierSet) -> NullifierSet:
    """Re-expresses the set after swapping every second pair and π-shifting its new first mode."""
    pairing = nullifier_set.pairing.relabeled_twin()
    shifted = [a for position, (a, _) in enumerate(pairing) if position % 2]
    vectors = []
    for nullifier in nullifier_set.exact:
        coordinates = spin_coordinates(nullifier.operator.phase_flip(shifted), pairing)
        if coordinates is None:
            raise ValueError(f"Nullifier {nullifier.expression} left the spin span after relabeling")
        vectors.append(coordinates[:-1])
    n_modes = max(pairing.modes) + 1

    def relabel(candidate: AsymptoticCandidate) -> AsymptoticCandidate:
        product = candidate.product.phase_flip(shifted)
        residual, coordinates = _project(product, pairing, n_modes)
        return candidate._replace(product=product, residual=residual, coordinates=coordinates)

    return NullifierSet(
        pairing,
        _canonical_nullifiers(vectors, pairing),
        tuple(map(relabel, nullifier_set.asymptotic)),
        tuple(map(relabel, nullifier_set.candidates)),
        nullifier_set.kernel_dimension,
        relabeled=True,
    )


# ---- numeric verification ----


class Verification(NamedTuple):
    r: float
    expectation: complex
    variance: float
    norm_deficit: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "r": self.r,
            "expectation": complex_record(self.expectation),
            "variance": self.variance,
            "norm_deficit": self.norm_deficit,
        }


def verify_nullifiers(
    ops: Sequence[QuadOp], graph: HGraph, r_grid: Sequence[float] = DEFAULT_R_GRID, cutoff: int = DEFAULT_CUTOFF
) -> list[list[Verification]]:
    """One evolved state per r, shared by all operators; non-Hermitian operators are replaced by their Hermitian part."""
    hermitian = [op if op.is_hermitian else op.hermitian_part() for op in ops]
    tables: list[list[Verification]] = [[] for _ in ops]
    for r in r_grid:
        if r < 0:
            raise ValueError(f"r values must be non-negative, but got {r!r}")
        state = focksim.evolve_vacuum(graph, float(r), cutoff)
        for table, op in zip(tables, hermitian):
            expectation, variance = focksim.expectation_variance(op, state)
            table.append(Verification(float(r), expectation, variance, state.norm_deficit))
    return tables


def verify_nullifier(
    op: QuadOp, graph: HGraph, r_grid: Sequence[float] = DEFAULT_R_GRID, cutoff: int = DEFAULT_CUTOFF
) -> list[Verification]:
    return verify_nullifiers([op], graph, r_grid, cutoff)[0]


def numeric_kernel_dimension(generator: QuadOp, n_modes: int, cutoff: int = 4, tolerance: float = 1e-9) -> int:
    """Kernel dimension of X -> [K, X] from Fock-space matrices restricted to <= cutoff photons, identity excluded."""
    basis = quadratic_basis(n_modes)
    working = cutoff + 2
    keep = [position for position, occupation in enumerate(focksim.fock_basis(n_modes, working)) if sum(occupation) <= cutoff]
    generator_matrix = dense_matrix(generator, n_modes, working)
    blocks = []
    for key in basis:
        element = dense_matrix(QuadOp.monomial(key), n_modes, working)
        block = (generator_matrix @ element - element @ generator_matrix).tocsr()[keep][:, keep]
        blocks.append(block.reshape((1, len(keep) ** 2)))
    stacked = sparse.vstack(blocks).tocsr()
    gram = (stacked @ stacked.conj().T).toarray()
    eigenvalues = np.linalg.eigvalsh(gram)
    rank = int(np.sum(eigenvalues > tolerance * max(float(eigenvalues.max()), 1.0)))
    return len(basis) - rank - 1


def commutator_oracle_error(a: QuadOp, b: QuadOp, n_modes: int, cutoff: int = 4) -> float:
    """Largest entry of |matrix([a, b]) - (AB - BA)| on the <= cutoff block."""
    symbolic = dense_matrix(commutator(a, b), n_modes, cutoff)
    numeric = focksim.commutator_matrix(a, b, n_modes, cutoff)
    difference = abs(symbolic - numeric)
    return float(difference.max()) if difference.nnz else 0.0


# ---- reports ----


def nullifier_report(
    nullifier_set: NullifierSet,
    graph: HGraph,
    r_grid: Sequence[float] = DEFAULT_R_GRID,
    cutoff: int = DEFAULT_CUTOFF,
) -> dict[str, Any]:
    labels = (*spin_labels(nullifier_set.pairing), "𝟙")
    # verification always runs in the frame the graph was given in
    if nullifier_set.relabeled:
        shifted = [a for position, (a, _) in enumerate(nullifier_set.pairing) if position % 2]
        operators = [nullifier.operator.phase_flip(shifted) for nullifier in nullifier_set.exact]
    else:
        operators = [nullifier.operator for nullifier in nullifier_set.exact]
    tables = verify_nullifiers(operators, graph, r_grid, cutoff) if operators else []

    exact = []
    for nullifier, table in zip(nullifier_set.exact, tables):
        record = nullifier.to_dict()
        record["verification"] = [row.to_dict() for row in table]
        exact.append(record)
    return {
        "pairing": nullifier_set.pairing.labels,
        "relabeled": nullifier_set.relabeled,
        "kernel_dimension": nullifier_set.kernel_dimension,
        "exact": exact,
        "asymptotic": [candidate.to_dict(labels) for candidate in nullifier_set.asymptotic],
        "candidates": [candidate.to_dict(labels) for candidate in nullifier_set.candidates],
        "cutoff": cutoff,
    }


PrintedTerm = tuple[int, SpinComponent, int, int]  # (sign, component, 1-based a, 1-based b)

# Reference list of ten three-chain constants of the motion; the flag marks a "+𝟙" term
PRINTED_THREE_CHAIN: tuple[tuple[tuple[PrintedTerm, ...], bool], ...] = (
    (((1, "zero", 1, 4), (1, "zero", 3, 6), (-1, "zero", 2, 5)), True),
    (((1, "z", 1, 4), (1, "z", 3, 6), (-1, "z", 2, 5)), False),
    (((1, "x", 1, 4), (1, "x", 3, 6), (-1, "x", 2, 5)), False),
    (((1, "y", 1, 4), (1, "y", 3, 6), (1, "y", 2, 5)), False),
    (((1, "x", 1, 6), (1, "x", 3, 4), (-1, "x", 2, 5)), False),
    (((1, "y", 1, 6), (1, "y", 3, 4), (1, "y", 2, 5)), False),
    (((1, "x", 1, 5), (1, "x", 3, 5), (-1, "x", 2, 4), (-1, "x", 2, 6)), False),
    (((1, "y", 1, 5), (1, "y", 3, 5), (1, "y", 2, 4), (1, "y", 2, 6)), False),
    (((1, "zero", 1, 4), (1, "zero", 3, 6), (-1, "x", 1, 3), (-1, "x", 4, 6)), True),
    (((1, "z", 1, 4), (1, "z", 3, 6), (-1, "x", 1, 3), (1, "x", 4, 6)), False),
)


def printed_constant(terms: Sequence[PrintedTerm], with_unit: bool) -> tuple[QuadOp, str]:
    operator = QuadOp.unit() if with_unit else QuadOp.zero()
    labels = []
    for sign, component, a, b in terms:
        operator = operator + schwinger_spin((a - 1, b - 1), component) * sign
        labels.append(f"{'-' if sign < 0 else '+'} {spin_label(component, a - 1, b - 1)}")
    text = " ".join(labels).removeprefix("+ ") + (" + 𝟙" if with_unit else "")
    return operator, text


def three_chain_discrepancy_report(
    r_grid: Sequence[float] = DEFAULT_R_GRID, cutoff: int = DEFAULT_CUTOFF
) -> dict[str, Any]:
    """Compares the printed three-chain constants with what the exact and asymptotic searches find."""
    graph, pairing = builtin("chain3x2")
    generator = hamiltonian_generator(graph)
    nullifier_set = find_nullifiers(graph, pairing)
    computed = [nullifier.operator for nullifier in nullifier_set.exact]

    printed = [printed_constant(terms, with_unit) for terms, with_unit in PRINTED_THREE_CHAIN]
    printed_tables = verify_nullifiers([operator for operator, _ in printed], graph, r_grid, cutoff)
    printed_records = []
    for (operator, text), table in zip(printed, printed_tables):
        printed_records.append(
            {
                "expression": text,
                "commutes_with_generator": commutator(generator, operator).is_zero,
                "nullifies_vacuum": nullifies_vacuum(operator),
                "in_computed_span": in_span(operator, computed, graph.n_modes),
                "verification": [row.to_dict() for row in table],
            }
        )

    report = nullifier_report(nullifier_set, graph, r_grid, cutoff)
    report["printed"] = printed_records
    report["printed_count"] = len(printed_records)
    report["computed_exact_count"] = len(computed)
    report["computed_asymptotic_count"] = len(nullifier_set.asymptotic)
    return report
