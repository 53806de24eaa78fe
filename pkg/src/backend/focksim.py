from __future__ import annotations

import cmath
import logging
import math
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Union

import numpy as np
import sympy
from numpy.polynomial import polynomial
from scipy import sparse
from scipy.sparse.linalg import norm as sparse_norm
from scipy.special import gammaln

from src.backend.errors import SectorError, SeriesConvergenceError, TemplateMismatchError
from src.backend.hgraph import HGraph, SpinPairing
from src.backend.qops import QuadOp, apply_monomial, dense_matrix, hamiltonian_generator, occupations, to_complex
from src.backend.utils import (
    AMPLITUDE_FLOOR,
    DEFAULT_CUTOFF,
    NORM_DEFICIT_WARNING,
    NORMALIZATION_TOLERANCE,
    SERIES_MAX_TERMS,
    SERIES_TOLERANCE,
    complex_record,
    parse_half_integer,
    to_label,
)
from src.typings import ModeIndex, ModePair, Occupation, SpinProjections

logger = logging.getLogger(__name__)

# Amplitudes below this (on a normalized state) never serve as the global-phase reference
PHASE_REFERENCE_FLOOR = 1e-12

UP, DOWN = 0.5, -0.5


def _half(value: Any, where: str) -> float:
    try:
        twice = Fraction(str(value)) * 2
    except (ValueError, ZeroDivisionError):
        raise SectorError(f"{where} must be a half-integer, but got {value!r}")
    if twice.denominator != 1:
        raise SectorError(f"{where} must be a half-integer, but got {value!r}")
    return twice.numerator / 2


def _fix_global_phase(amplitudes: Mapping[Any, complex]) -> dict[Any, complex]:
    """Rotates the global phase so the first sizeable amplitude (ascending key order) is real and positive."""
    for key in sorted(amplitudes):
        value = amplitudes[key]
        if abs(value) > PHASE_REFERENCE_FLOOR:
            rotation = abs(value) / value
            return {k: v * rotation for k, v in amplitudes.items()}
    return dict(amplitudes)


@dataclass(frozen=True, eq=False)
class FockVector:
    """Sparse state Σ amp(n)|n₁…n_N⟩ truncated at total photon number `cutoff`."""

    n_modes: int
    cutoff: int
    amplitudes: Mapping[Occupation, complex]
    norm_deficit: float = 0.0
    r: float | None = None

    @classmethod
    def from_amplitudes(
        cls, n_modes: int, cutoff: int, amplitudes: Mapping[Occupation, complex], r: float | None = None
    ) -> FockVector:
        kept: dict[Occupation, complex] = {}
        for occupation, value in amplitudes.items():
            if len(occupation) != n_modes:
                raise SectorError(f"Occupation {list(occupation)!r} does not have {n_modes} modes")
            if sum(occupation) > cutoff:
                continue
            if abs(value) > AMPLITUDE_FLOOR:
                kept[tuple(occupation)] = complex(value)
        norm_squared = sum(abs(value) ** 2 for value in kept.values())
        return cls(n_modes, cutoff, kept, 1.0 - norm_squared, r)

    @classmethod
    def vacuum(cls, n_modes: int, cutoff: int = DEFAULT_CUTOFF) -> FockVector:
        return cls(n_modes, cutoff, {(0,) * n_modes: 1.0 + 0j}, 0.0, 0.0)

    @property
    def norm_squared(self) -> float:
        return float(sum(abs(value) ** 2 for value in self.amplitudes.values()))

    def amplitude(self, occupation: Sequence[int]) -> complex:
        return self.amplitudes.get(tuple(occupation), 0j)

    def normalized_amplitudes(self) -> dict[Occupation, complex]:
        norm = math.sqrt(self.norm_squared)
        if norm == 0:
            raise SectorError("Cannot normalize an empty state")
        return {occupation: value / norm for occupation, value in self.amplitudes.items()}

    def to_dict(self, pairing: SpinPairing | None = None) -> dict[str, Any]:
        document: dict[str, Any] = {
            "modes": self.n_modes,
            "cutoff": self.cutoff,
            "r": self.r,
            "norm_deficit": self.norm_deficit,
            "amplitudes": [
                {"occ": list(occupation), **complex_record(self.amplitudes[occupation])}
                for occupation in sorted(self.amplitudes)
            ],
        }
        if pairing is not None:
            document["pairing"] = pairing.labels
        return document

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> FockVector:
        for key in ("modes", "cutoff", "amplitudes"):
            if key not in document:
                raise SectorError(f"State dump is missing the {key!r} key")
        n_modes = int(document["modes"])
        amplitudes: dict[Occupation, complex] = {}
        for position, record in enumerate(document["amplitudes"]):
            try:
                occupation = tuple(int(n) for n in record["occ"])
                value = complex(float(record["re"]), float(record["im"]))
            except (KeyError, TypeError) as e:
                raise SectorError(f"amplitudes[{position}] is not an {{occ, re, im}} record: {e!r}")
            if len(occupation) != n_modes:
                raise SectorError(f"amplitudes[{position}].occ = {list(occupation)!r} does not have {n_modes} entries")
            amplitudes[occupation] = value
        deficit = float(document.get("norm_deficit", 1.0 - sum(abs(v) ** 2 for v in amplitudes.values())))
        r = document.get("r")
        return cls(n_modes, int(document["cutoff"]), amplitudes, deficit, None if r is None else float(r))


@dataclass(frozen=True, eq=False)
class SpinSectorState:
    """Amplitudes over per-pair projections m, inside the sector with per-pair spin magnitudes `j_list`."""

    pairing: SpinPairing
    j_list: tuple[float, ...]
    amplitudes: Mapping[SpinProjections, complex] = field(default_factory=dict)
    selection_probability: float = 1.0

    def __post_init__(self) -> None:
        if len(self.j_list) != len(self.pairing):
            raise SectorError(f"j_list has {len(self.j_list)} entries but the pairing has {len(self.pairing)} pairs")
        for projections in self.amplitudes:
            if len(projections) != len(self.j_list):
                raise SectorError(f"m-tuple {list(projections)!r} does not have {len(self.j_list)} entries")
            for j, m in zip(self.j_list, projections):
                if abs(m) > j or not float(j - m).is_integer():
                    raise SectorError(f"m-tuple {list(projections)!r} is outside the sector j = {list(self.j_list)!r}")

    @property
    def n_spins(self) -> int:
        return len(self.j_list)

    @property
    def is_empty(self) -> bool:
        return not self.amplitudes

    @property
    def is_qubit_sector(self) -> bool:
        return all(j == 0.5 for j in self.j_list)

    @property
    def norm_squared(self) -> float:
        return float(sum(abs(value) ** 2 for value in self.amplitudes.values()))

    def require_normalized(self) -> None:
        if abs(self.norm_squared - 1.0) > NORMALIZATION_TOLERANCE:
            raise SectorError(f"Sector state must be normalized, but has squared norm {self.norm_squared!r}")

    def normalized(self) -> SpinSectorState:
        norm = math.sqrt(self.norm_squared)
        if norm == 0:
            raise SectorError("Cannot normalize an empty sector state")
        amplitudes = {m: value / norm for m, value in self.amplitudes.items()}
        return SpinSectorState(self.pairing, self.j_list, amplitudes, self.selection_probability)

    def with_fixed_phase(self) -> SpinSectorState:
        return SpinSectorState(
            self.pairing, self.j_list, _fix_global_phase(self.amplitudes), self.selection_probability
        )

    def amplitude(self, projections: Sequence[float]) -> complex:
        return self.amplitudes.get(tuple(float(m) for m in projections), 0j)

    def to_fock_amplitudes(self) -> dict[Occupation, complex]:
        """n_a = j + m and n_b = j - m for every pair; unpaired modes stay empty."""
        n_modes = max(self.pairing.modes) + 1
        result: dict[Occupation, complex] = {}
        for projections, value in self.amplitudes.items():
            occupation = [0] * n_modes
            for (mode_a, mode_b), j, m in zip(self.pairing, self.j_list, projections):
                occupation[mode_a] = round(j + m)
                occupation[mode_b] = round(j - m)
            result[tuple(occupation)] = value
        return result

    def to_dict(self) -> dict[str, Any]:
        return {
            "pairing": self.pairing.labels,
            "j_list": list(self.j_list),
            "selection_probability": self.selection_probability,
            "amplitudes": [
                {"m": list(projections), **complex_record(self.amplitudes[projections])}
                for projections in sorted(self.amplitudes)
            ],
        }

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> SpinSectorState:
        for key in ("pairing", "j_list", "amplitudes"):
            if key not in document:
                raise SectorError(f"Sector dump is missing the {key!r} key")
        pairing = SpinPairing.from_labels(document["pairing"])
        j_list = tuple(parse_half_integer(j) for j in document["j_list"])
        amplitudes: dict[SpinProjections, complex] = {}
        for position, record in enumerate(document["amplitudes"]):
            try:
                projections = tuple(_half(m, f"amplitudes[{position}].m entry") for m in record["m"])
                amplitudes[projections] = complex(float(record["re"]), float(record["im"]))
            except (KeyError, TypeError) as e:
                raise SectorError(f"amplitudes[{position}] is not an {{m, re, im}} record: {e!r}")
        return cls(pairing, j_list, amplitudes, float(document.get("selection_probability", 1.0)))


StateLike = Union[FockVector, SpinSectorState]


def fock_basis(n_modes: int, cutoff: int) -> list[Occupation]:
    return occupations(n_modes, cutoff)


def apply_operator(op: QuadOp, amplitudes: Mapping[Occupation, complex]) -> dict[Occupation, complex]:
    """op|ψ⟩ on a sparse amplitude map, without truncation (a quadratic op adds at most two photons)."""
    terms = op.as_approximate().terms
    result: dict[Occupation, complex] = {}
    for occupation, amplitude in amplitudes.items():
        for key, coefficient in terms.items():
            image = apply_monomial(key, occupation)
            if image is None:
                continue
            target, factor = image
            result[target] = result.get(target, 0j) + coefficient * factor * amplitude
    return {occupation: value for occupation, value in result.items() if value != 0}


def operator_matrix(op: QuadOp, n_modes: int, cutoff: int) -> sparse.csr_matrix:
    return dense_matrix(op, n_modes, cutoff)


def commutator_matrix(a: QuadOp, b: QuadOp, n_modes: int, cutoff: int) -> sparse.csr_matrix:
    """AB - BA built one photon pair above `cutoff` and restricted to the <= cutoff block."""
    working = cutoff + 2
    matrix_a = dense_matrix(a, n_modes, working)
    matrix_b = dense_matrix(b, n_modes, working)
    keep = [position for position, occupation in enumerate(fock_basis(n_modes, working)) if sum(occupation) <= cutoff]
    product = (matrix_a @ matrix_b - matrix_b @ matrix_a).tocsr()
    return product[keep][:, keep]


def _reachable_generator(graph: HGraph, max_total: int) -> tuple[list[Occupation], sparse.csr_matrix]:
    """Breadth-first search from the vacuum under K, inside the space with at most `max_total` photons."""
    terms = [(key, to_complex(value).real) for key, value in hamiltonian_generator(graph).terms.items()]
    vacuum: Occupation = (0,) * graph.n_modes
    index = {vacuum: 0}
    basis = [vacuum]
    queue = deque([vacuum])
    rows, cols, data = [], [], []
    while queue:
        occupation = queue.popleft()
        column = index[occupation]
        for key, weight in terms:
            image = apply_monomial(key, occupation)
            if image is None or sum(image[0]) > max_total:
                continue
            target, factor = image
            if target not in index:
                index[target] = len(basis)
                basis.append(target)
                queue.append(target)
            rows.append(index[target])
            cols.append(column)
            data.append(weight * factor)
    size = len(basis)
    return basis, sparse.csr_matrix((data, (rows, cols)), shape=(size, size), dtype=float)


def _series_action(matrix: sparse.csr_matrix, vector: np.ndarray, r: float) -> np.ndarray:
    """exp(rA)v as a product of Taylor series over substeps with r·‖A‖₁ <= 1 each."""
    norm_one = float(sparse_norm(matrix, 1)) if matrix.nnz else 0.0
    steps = max(1, math.ceil(r * norm_one))
    h = r / steps
    terms_used = 0
    for _ in range(steps):
        term = vector.copy()
        total = vector.copy()
        for k in range(1, SERIES_MAX_TERMS + 1):
            term = (h / k) * (matrix @ term)
            total = total + term
            if np.linalg.norm(term) < SERIES_TOLERANCE:
                terms_used += k
                break
        else:
            raise SeriesConvergenceError(
                f"Propagator series did not converge within {SERIES_MAX_TERMS} terms (step size {h!r})"
            )
        vector = total
    logger.info("Series evolution used %d substep(s) and %d terms", steps, terms_used)
    return vector


def _validate_evolution(r: float, cutoff: int) -> None:
    if isinstance(r, bool) or not isinstance(r, (int, float)) or not math.isfinite(r) or r < 0:
        raise ValueError(f"r must be a finite non-negative number, but got {r!r}")
    if isinstance(cutoff, bool) or not isinstance(cutoff, int) or cutoff < 2 or cutoff % 2:
        raise ValueError(f"cutoff must be an even integer >= 2, but got {cutoff!r}")


def evolve_vacuum(graph: HGraph, r: float, cutoff: int = DEFAULT_CUTOFF) -> FockVector:
    """exp(rK)|0⟩ truncated to at most `cutoff` photons; K acts in the space with one extra photon pair."""
    _validate_evolution(r, cutoff)
    basis, generator = _reachable_generator(graph, cutoff + 2)
    logger.info("Reachable basis for %d modes within %d photons: %d states", graph.n_modes, cutoff + 2, len(basis))

    vacuum = np.zeros(len(basis), dtype=float)
    vacuum[0] = 1.0
    vector = _series_action(generator, vacuum, float(r))

    amplitudes = {occupation: complex(vector[position]) for position, occupation in enumerate(basis)}
    state = FockVector.from_amplitudes(graph.n_modes, cutoff, amplitudes, float(r))
    if state.norm_deficit > NORM_DEFICIT_WARNING:
        logger.warning(
            "Cutoff %d is too small for r = %s: norm deficit %.3e exceeds %g",
            cutoff,
            r,
            state.norm_deficit,
            NORM_DEFICIT_WARNING,
        )
    return state


def _state_amplitudes(state: StateLike) -> dict[Occupation, complex]:
    if isinstance(state, SpinSectorState):
        if state.is_empty:
            raise SectorError("Cannot use an empty sector state")
        fock = state.to_fock_amplitudes()
        norm = math.sqrt(sum(abs(value) ** 2 for value in fock.values()))
        return {occupation: value / norm for occupation, value in fock.items()}
    return state.normalized_amplitudes()


def expectation_variance(op: QuadOp, state: StateLike) -> tuple[complex, float]:
    """⟨op⟩ and ⟨op†op⟩ - |⟨op⟩|² on the normalized state."""
    psi = _state_amplitudes(state)
    image = apply_operator(op, psi)
    mean = sum((psi[occupation].conjugate() * value for occupation, value in image.items() if occupation in psi), 0j)
    second_moment = sum(abs(value) ** 2 for value in image.values())
    return complex(mean), max(float(second_moment - abs(mean) ** 2), 0.0)


def casimir_postselect(state: FockVector, pairing: SpinPairing, j_list: Sequence[Any]) -> SpinSectorState:
    """Projects onto n_a + n_b = 2j_p for every pair, renormalizes and fixes the global phase."""
    pairing.validate_for(state.n_modes)
    if len(j_list) != len(pairing):
        raise SectorError(f"j_list has {len(j_list)} entries but the pairing has {len(pairing)} pairs")
    try:
        magnitudes = tuple(parse_half_integer(j) for j in j_list)
    except ValueError as e:
        raise SectorError(str(e))
    targets = [round(2 * j) for j in magnitudes]
    paired = set(pairing.modes)
    unpaired = [mode for mode in range(state.n_modes) if mode not in paired]

    selected: dict[SpinProjections, complex] = {}
    for occupation, value in state.amplitudes.items():
        if any(occupation[a] + occupation[b] != target for (a, b), target in zip(pairing, targets)):
            continue
        for mode in unpaired:
            if occupation[mode]:
                raise SectorError(
                    f"Mode {to_label(mode)} is not in the pairing but carries {occupation[mode]} photon(s) "
                    f"in the selected sector"
                )
        projections = tuple((occupation[a] - occupation[b]) / 2 for a, b in pairing)
        selected[projections] = value

    probability = float(sum(abs(value) ** 2 for value in selected.values()))
    if probability == 0:
        return SpinSectorState(pairing, magnitudes, {}, 0.0)
    norm = math.sqrt(probability)
    amplitudes = _fix_global_phase({projections: value / norm for projections, value in selected.items()})
    logger.info("Sector j = %s holds %d components, probability %.6g", list(magnitudes), len(amplitudes), probability)
    return SpinSectorState(pairing, magnitudes, amplitudes, probability)


def phase_shift(state: FockVector, modes: Iterable[ModeIndex], phase: float = math.pi) -> FockVector:
    """Applies exp(iφ Σ_k n_k) over `modes`; φ = π is applied as the exact sign (-1)^n."""
    shifted = list(modes)

    def factor(occupation: Occupation) -> complex:
        photons = sum(occupation[mode] for mode in shifted)
        if phase == math.pi:
            return -1.0 if photons % 2 else 1.0
        return cmath.exp(1j * phase * photons)

    amplitudes = {occupation: value * factor(occupation) for occupation, value in state.amplitudes.items()}
    return FockVector(state.n_modes, state.cutoff, amplitudes, state.norm_deficit, state.r)


def relabel_twin(state: FockVector, pairing: SpinPairing) -> tuple[FockVector, SpinPairing]:
    """Swaps every second pair and π-shifts the mode that becomes its first member, e.g. (2,6) -> (6,2) with mode 6 shifted."""
    relabeled = pairing.relabeled_twin()
    shifted = [a for position, (a, _) in enumerate(relabeled) if position % 2]
    return phase_shift(state, shifted), relabeled


@lru_cache(maxsize=4096)
def _rotation_amplitudes(n1: int, n2: int, theta: float, phi: float) -> tuple[complex, ...]:
    """⟨k, N-k|_b |n1, n2⟩_a for k = 0..N, with a₁† = c b₁† - s b₂† and a₂† = e^{-iφ}(s b₁† + c b₂†)."""
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    total = n1 + n2
    coefficients = polynomial.polymul(polynomial.polypow([-s, c], n1), polynomial.polypow([c, s], n2))
    coefficients = np.pad(coefficients, (0, total + 1 - len(coefficients)))[: total + 1]
    phase = cmath.exp(-1j * phi * n2)
    result = []
    for k, value in enumerate(coefficients):
        weight = math.exp(0.5 * (gammaln(k + 1) + gammaln(total - k + 1) - gammaln(n1 + 1) - gammaln(n2 + 1)))
        result.append(complex(value * weight * phase))
    return tuple(result)


def _validate_direction(theta: float, phi: float) -> None:
    if not 0 <= theta <= math.pi:
        raise ValueError(f"theta must lie in [0, π], but got {theta!r}")
    if not 0 <= phi < 2 * math.pi:
        raise ValueError(f"phi must lie in [0, 2π), but got {phi!r}")


MeasurementSetting = tuple[ModePair, float, float]


def measure_spins(
    state: StateLike, settings: Sequence[MeasurementSetting]
) -> dict[tuple[tuple[int, int], ...], float]:
    """Joint photon-count distribution after rotating each (disjoint) pair to its direction (θ, φ)."""
    amplitudes = _state_amplitudes(state)
    n_modes = len(next(iter(amplitudes)))
    claimed: dict[ModeIndex, int] = {}
    for position, ((a, b), theta, phi) in enumerate(settings):
        _validate_direction(theta, phi)
        for mode in (a, b):
            if mode >= n_modes:
                raise SectorError(f"Measured pair {[to_label(a), to_label(b)]!r} refers to mode outside 1..{n_modes}")
            if mode in claimed:
                raise SectorError(
                    f"Measured pair {[to_label(a), to_label(b)]!r} overlaps measured pair {claimed[mode] + 1} "
                    f"on mode {to_label(mode)}"
                )
            claimed[mode] = position

    for (a, b), theta, phi in settings:
        rotated: dict[Occupation, complex] = {}
        for occupation, value in amplitudes.items():
            n1, n2 = occupation[a], occupation[b]
            for k, factor in enumerate(_rotation_amplitudes(n1, n2, float(theta), float(phi))):
                if factor == 0:
                    continue
                target = list(occupation)
                target[a], target[b] = k, n1 + n2 - k
                key = tuple(target)
                rotated[key] = rotated.get(key, 0j) + factor * value
        amplitudes = rotated

    distribution: dict[tuple[tuple[int, int], ...], float] = {}
    for occupation, value in amplitudes.items():
        outcome = tuple((occupation[a], occupation[b]) for (a, b), _, _ in settings)
        distribution[outcome] = distribution.get(outcome, 0.0) + abs(value) ** 2
    return {outcome: distribution[outcome] for outcome in sorted(distribution) if distribution[outcome] > AMPLITUDE_FLOOR}


def measure_spin(state: StateLike, pair: ModePair, theta: float, phi: float) -> dict[tuple[int, int], float]:
    joint = measure_spins(state, [(pair, theta, phi)])
    return {outcome[0]: probability for outcome, probability in joint.items()}


def spin_statistics(distribution: Mapping[tuple[int, int], float]) -> dict[str, Any]:
    """N₊ = n_b1 + n_b2 (= 2J₀) and the projection (n_b1 - n_b2)/2 (= n̂·J) of a single-pair distribution."""
    n_plus: dict[int, float] = {}
    projection: dict[float, float] = {}
    for (n1, n2), probability in distribution.items():
        n_plus[n1 + n2] = n_plus.get(n1 + n2, 0.0) + probability
        projection[(n1 - n2) / 2] = projection.get((n1 - n2) / 2, 0.0) + probability
    return {
        "n_plus": dict(sorted(n_plus.items())),
        "projection": dict(sorted(projection.items())),
        "mean_projection": sum(m * p for m, p in projection.items()),
    }


def sample_counts(distribution: Mapping[Any, float], shots: int, seed: int | None = None) -> dict[Any, int]:
    if shots < 1:
        raise ValueError(f"shots must be a positive integer, but got {shots!r}")
    outcomes = list(distribution)
    probabilities = np.array([distribution[outcome] for outcome in outcomes], dtype=float)
    probabilities /= probabilities.sum()
    rng = np.random.default_rng(seed)
    draws = rng.choice(len(outcomes), size=shots, p=probabilities)
    counts = np.bincount(draws, minlength=len(outcomes))
    return {outcome: int(count) for outcome, count in zip(outcomes, counts) if count}


def two_mode_squeezed_amplitude(n: int, r: float) -> float:
    """Amplitude of |n, n⟩ in exp(r(a₁†a₂† - a₁a₂))|0⟩."""
    return math.tanh(r) ** n / math.cosh(r)


def sector_probability(j: float, r: float) -> float:
    """Probability of the (j, j) sector of two EPR pairs regrouped into two spins: (2j+1)tanh^{4j}r / cosh⁴r."""
    return (2 * j + 1) * math.tanh(r) ** (4 * j) / math.cosh(r) ** 4


SQUARE_TEMPLATE_EDGES = {(0, 1), (1, 2), (2, 3), (0, 3)}


@dataclass(frozen=True, eq=False)
class PerturbativeQubitState:
    """Lowest-order 4-qubit sector of a twin 4-mode graph, in the relabeled pairing (1,5),(6,2),(3,7),(8,4)."""

    a: int
    b: int
    amplitudes: Mapping[SpinProjections, sympy.Expr]
    pairing: SpinPairing

    def to_sector_state(self) -> SpinSectorState:
        numeric = {m: complex(sympy.N(value, 30)) for m, value in self.amplitudes.items() if value != 0}
        return SpinSectorState(self.pairing, (0.5,) * 4, numeric)


def _arrows(text: str) -> SpinProjections:
    return tuple(UP if arrow == "↑" else DOWN for arrow in text)


def perturbative_qubit_state(graph: HGraph) -> PerturbativeQubitState:
    if graph.n_modes != 8:
        raise TemplateMismatchError(f"Expected a graph on 8 modes, but got {graph.n_modes}")
    if not graph.is_twin():
        raise TemplateMismatchError("Graph is not two identical, uncoupled 4-mode blocks")
    block = graph.block(0, 4)
    for j in range(4):
        for k in range(j + 1, 4):
            if block[j][k] and (j, k) not in SQUARE_TEMPLATE_EDGES:
                raise TemplateMismatchError(
                    f"Edge {[to_label(j), to_label(k), block[j][k]]!r} is outside the 4-mode square template"
                )

    a = block[0][1] * block[2][3]
    b = block[1][2] * block[0][3]
    norm_squared = 2 * a**2 + 2 * b**2 + 2 * (a + b) ** 2
    if norm_squared == 0:
        raise TemplateMismatchError("Perturbative qubit sector is empty: a = G12·G34 and b = G23·G14 are both 0")

    scale = 1 / sympy.sqrt(sympy.Integer(norm_squared))
    amplitudes: dict[SpinProjections, sympy.Expr] = {}
    for arrows, weight in (
        ("↑↓↓↑", a),
        ("↓↑↑↓", a),
        ("↑↑↓↓", b),
        ("↓↓↑↑", b),
        ("↑↓↑↓", -(a + b)),
        ("↓↑↓↑", -(a + b)),
    ):
        amplitudes[_arrows(arrows)] = sympy.Integer(weight) * scale
    return PerturbativeQubitState(a, b, amplitudes, SpinPairing.twin(4).relabeled_twin())
