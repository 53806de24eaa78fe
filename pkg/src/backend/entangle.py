from __future__ import annotations

import cmath
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum
from itertools import combinations, product
from typing import Any

import numpy as np

from src.backend.errors import SectorError
from src.backend.focksim import SpinSectorState
from src.backend.hgraph import SpinPairing
from src.backend.utils import SCHMIDT_THRESHOLD, pair_label

logger = logging.getLogger(__name__)

MAX_CLASSIFIED_SPINS = 12


class EntanglementClass(Enum):
    FULLY_PRODUCT = "fully_product"
    BISEPARABLE = "biseparable"
    GENUINE_MULTIPARTITE = "genuine_multipartite"


@dataclass(frozen=True)
class SchmidtSpectrum:
    subset: tuple[int, ...]
    complement: tuple[int, ...]
    coefficients: tuple[float, ...]

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(value**2 for value in self.coefficients)

    @property
    def entropy(self) -> float:
        """-Σ λ² log₂ λ² in bits."""
        return float(-sum(p * math.log2(p) for p in self.probabilities if p > 1e-30))

    @property
    def rank(self) -> int:
        return sum(1 for value in self.coefficients if value > SCHMIDT_THRESHOLD)

    def to_dict(self) -> dict[str, Any]:
        return {
            "subset": [spin + 1 for spin in self.subset],
            "complement": [spin + 1 for spin in self.complement],
            "coefficients": list(self.coefficients),
            "entropy": self.entropy,
            "rank": self.rank,
        }


@dataclass(frozen=True)
class Classification:
    kind: EntanglementClass
    witness: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def witness_labels(self, pairing: SpinPairing) -> list[list[str]] | None:
        if self.witness is None:
            return None
        return [[pair_label(*pairing.pairs[spin]) for spin in side] for side in self.witness]


@dataclass(frozen=True)
class EntanglementReport:
    state_id: str
    pairing: SpinPairing
    bipartitions: tuple[SchmidtSpectrum, ...]
    classification: Classification | None
    single_spin_purities: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        document: dict[str, Any] = {
            "state_id": self.state_id,
            "pairing": self.pairing.labels,
            "bipartitions": [spectrum.to_dict() for spectrum in self.bipartitions],
            "single_spin_purities": list(self.single_spin_purities),
            "classification": None,
            "witness": None,
        }
        if self.classification is not None:
            document["classification"] = self.classification.kind.value
            if self.classification.witness is not None:
                document["witness"] = [[spin + 1 for spin in side] for side in self.classification.witness]
                document["witness_pairs"] = self.classification.witness_labels(self.pairing)
        return document


def state_tensor(state: SpinSectorState) -> np.ndarray:
    """Amplitudes as an array indexed by j - m per spin (m = +j first)."""
    state.require_normalized()
    shape = tuple(round(2 * j) + 1 for j in state.j_list)
    tensor = np.zeros(shape, dtype=complex)
    for projections, value in state.amplitudes.items():
        tensor[tuple(round(j - m) for j, m in zip(state.j_list, projections))] = value
    return tensor


def _validate_subset(state: SpinSectorState, subset: Iterable[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    chosen = tuple(sorted(set(subset)))
    if not chosen or len(chosen) >= state.n_spins:
        raise SectorError(f"Bipartition subset must be proper and non-empty, but got {list(chosen)!r}")
    if chosen[0] < 0 or chosen[-1] >= state.n_spins:
        raise SectorError(f"Bipartition subset {list(chosen)!r} refers to a spin outside 0..{state.n_spins - 1}")
    complement = tuple(spin for spin in range(state.n_spins) if spin not in chosen)
    return chosen, complement


def bipartition_spectrum(state: SpinSectorState, subset: Iterable[int]) -> SchmidtSpectrum:
    chosen, complement = _validate_subset(state, subset)
    tensor = state_tensor(state)
    left = int(np.prod([tensor.shape[spin] for spin in chosen]))
    matrix = np.transpose(tensor, chosen + complement).reshape(left, -1)
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    return SchmidtSpectrum(chosen, complement, tuple(float(value) for value in singular_values))


def single_spin_purity(state: SpinSectorState, spin: int) -> float:
    """Tr ρ² of one spin's reduced state."""
    return float(sum(p**2 for p in bipartition_spectrum(state, [spin]).probabilities))


def _bipartitions(n_spins: int) -> list[tuple[int, ...]]:
    """Subsets containing spin 0, smallest side first."""
    subsets = [
        (0, *rest)
        for size in range(n_spins - 1)
        for rest in combinations(range(1, n_spins), size)
    ]
    return sorted(subsets, key=lambda subset: (min(len(subset), n_spins - len(subset)), subset))


def classify(state: SpinSectorState) -> Classification:
    if not state.is_qubit_sector:
        raise SectorError(f"Classification supports all-qubit sectors only, but got j = {list(state.j_list)!r}")
    if state.n_spins > MAX_CLASSIFIED_SPINS:
        raise SectorError(f"Classification supports at most {MAX_CLASSIFIED_SPINS} spins, but got {state.n_spins}")
    if state.n_spins == 1:
        return Classification(EntanglementClass.FULLY_PRODUCT)

    if all(bipartition_spectrum(state, [spin]).rank == 1 for spin in range(state.n_spins)):
        return Classification(EntanglementClass.FULLY_PRODUCT)
    for subset in _bipartitions(state.n_spins):
        spectrum = bipartition_spectrum(state, subset)
        if spectrum.rank == 1:
            return Classification(EntanglementClass.BISEPARABLE, (spectrum.subset, spectrum.complement))
    return Classification(EntanglementClass.GENUINE_MULTIPARTITE)


def entanglement_report(state: SpinSectorState, state_id: str = "state") -> EntanglementReport:
    spectra = tuple(bipartition_spectrum(state, subset) for subset in _bipartitions(state.n_spins))
    classification = classify(state) if state.is_qubit_sector else None
    purities = tuple(single_spin_purity(state, spin) for spin in range(state.n_spins)) if state.n_spins > 1 else (1.0,)
    return EntanglementReport(state_id, state.pairing, spectra, classification, purities)


def fidelity(first: SpinSectorState, second: SpinSectorState) -> float:
    """|⟨first|second⟩|²."""
    if first.n_spins != second.n_spins or first.j_list != second.j_list:
        raise SectorError(
            f"Sector states differ in shape: j = {list(first.j_list)!r} and j = {list(second.j_list)!r}"
        )
    first.require_normalized()
    second.require_normalized()
    overlap = sum((value.conjugate() * second.amplitude(m) for m, value in first.amplitudes.items()), 0j)
    return min(abs(overlap) ** 2, 1.0)


def projective_collapse(state: SpinSectorState, spin: int, outcome: float) -> tuple[SpinSectorState, float]:
    """Projects `spin` onto J_z = outcome and returns the remaining spins' state with the outcome probability."""
    if not 0 <= spin < state.n_spins:
        raise SectorError(f"Spin index {spin} is outside 0..{state.n_spins - 1}")
    j = state.j_list[spin]
    if abs(outcome) > j or not float(j - outcome).is_integer():
        raise SectorError(f"Outcome m = {outcome!r} is not a projection of spin j = {j!r}")
    if state.n_spins == 1:
        raise SectorError("Cannot collapse the only spin of a state")

    pairing = SpinPairing(state.pairing.pairs[:spin] + state.pairing.pairs[spin + 1 :])
    j_list = state.j_list[:spin] + state.j_list[spin + 1 :]
    kept = {
        projections[:spin] + projections[spin + 1 :]: value
        for projections, value in state.amplitudes.items()
        if projections[spin] == outcome
    }
    probability = float(sum(abs(value) ** 2 for value in kept.values()) / state.norm_squared)
    if probability == 0:
        return SpinSectorState(pairing, j_list, {}, 0.0), 0.0
    norm = math.sqrt(probability * state.norm_squared)
    return SpinSectorState(pairing, j_list, {m: value / norm for m, value in kept.items()}, probability), probability


def _is_entangled(state: SpinSectorState) -> bool:
    return any(bipartition_spectrum(state, subset).rank > 1 for subset in _bipartitions(state.n_spins))


def collapse_table(state: SpinSectorState, first_spin: int = 0, first_outcome: float = 0.5) -> list[dict[str, Any]]:
    """Outcome-resolved table of two sequential z projections, the second over every remaining spin."""
    after_first, first_probability = projective_collapse(state, first_spin, first_outcome)
    rows: list[dict[str, Any]] = []
    if first_probability == 0:
        return rows
    remaining = [spin for spin in range(state.n_spins) if spin != first_spin]
    for position, second_spin in enumerate(remaining):
        j = after_first.j_list[position]
        for step in range(round(2 * j) + 1):
            outcome = j - step
            residual, probability = projective_collapse(after_first, position, outcome)
            rows.append(
                {
                    "first_spin": first_spin + 1,
                    "first_outcome": first_outcome,
                    "first_probability": first_probability,
                    "second_spin": second_spin + 1,
                    "second_outcome": outcome,
                    "probability": probability,
                    "entangled": probability > 0 and residual.n_spins > 1 and _is_entangled(residual),
                }
            )
    return rows


def residual_entanglement_probability(state: SpinSectorState, first_spin: int = 0, first_outcome: float = 0.5) -> float:
    """Probability that the spins left after two projections are entangled, averaged over the choice of second spin."""
    rows = collapse_table(state, first_spin, first_outcome)
    if not rows:
        return 0.0
    per_spin: dict[int, float] = {}
    for row in rows:
        per_spin.setdefault(row["second_spin"], 0.0)
        if row["entangled"]:
            per_spin[row["second_spin"]] += row["probability"]
    return sum(per_spin.values()) / len(per_spin)


def dicke_state(pairing: SpinPairing, n_up: int) -> SpinSectorState:
    """Equal superposition of all qubit configurations with `n_up` spins up."""
    n_spins = len(pairing)
    if not 0 <= n_up <= n_spins:
        raise SectorError(f"n_up must lie in 0..{n_spins}, but got {n_up}")
    configurations = [
        projections for projections in product((0.5, -0.5), repeat=n_spins) if projections.count(0.5) == n_up
    ]
    amplitude = 1 / math.sqrt(len(configurations))
    return SpinSectorState(pairing, (0.5,) * n_spins, {m: complex(amplitude) for m in configurations})


def apply_local_phases(state: SpinSectorState, angles: Sequence[float]) -> SpinSectorState:
    """Per-spin z rotations exp(-i φ_k J_z,k)."""
    if len(angles) != state.n_spins:
        raise SectorError(f"Expected {state.n_spins} angles, but got {len(angles)}")
    amplitudes = {
        m: value * cmath.exp(-1j * sum(angle * projection for angle, projection in zip(angles, m)))
        for m, value in state.amplitudes.items()
    }
    return SpinSectorState(state.pairing, state.j_list, amplitudes, state.selection_probability)
