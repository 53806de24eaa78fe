from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.backend.hgraph import HGraph
from src.backend.qops import LinearForm
from src.backend.utils import DEGENERACY_THRESHOLD, EIGEN_ZERO_THRESHOLD, to_label
from src.typings import FormKind, Quadrature

logger = logging.getLogger(__name__)

CONSTANT_TAG = "constant of the motion"


@dataclass(frozen=True)
class EigenmodeClassification:
    """How the eigen-quadratures Q′_i and P′_i of one eigenvalue behave under exp(rK)."""

    index: int
    eigenvalue: float
    rate: float
    squeezed_quadrature: Quadrature | None
    antisqueezed_quadrature: Quadrature | None

    @property
    def is_constant(self) -> bool:
        return self.squeezed_quadrature is None

    def to_dict(self) -> dict[str, Any]:
        if self.is_constant:
            return {"index": self.index + 1, "eigenvalue": self.eigenvalue, "rate": 0.0, "tag": CONSTANT_TAG}
        return {
            "index": self.index + 1,
            "eigenvalue": self.eigenvalue,
            "rate": self.rate,
            "squeezed_quadrature": f"{self.squeezed_quadrature}′",
            "antisqueezed_quadrature": f"{self.antisqueezed_quadrature}′",
        }


@dataclass(frozen=True, eq=False)
class EigenDecomp:
    """G = Mᵀ·diag(eigenvalues)·M with orthonormal rows in M, eigenvalues descending."""

    eigenvalues: tuple[float, ...]
    basis: np.ndarray
    rank: int
    classification: tuple[EigenmodeClassification, ...]

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return self.basis.T @ np.diag(self.eigenvalues) @ self.basis


@dataclass(frozen=True, eq=False)
class CvNullifier:
    form: LinearForm
    rate: float
    kind: FormKind
    quadrature: Quadrature
    eigen_index: int

    def __repr__(self) -> str:
        return f"CvNullifier({self.form!r}, rate={self.rate:.6g}, kind={self.kind})"


def _fix_sign(vector: np.ndarray) -> np.ndarray:
    for component in vector:
        if abs(component) > EIGEN_ZERO_THRESHOLD:
            return vector if component > 0 else -vector
    return vector


def _coordinate_basis(span: np.ndarray) -> list[np.ndarray]:
    """Orthonormal basis of the column span, built by Gram-Schmidt on projected unit vectors e_0, e_1, ..."""
    dimension = span.shape[1]
    projector = span @ span.T
    chosen: list[np.ndarray] = []
    for mode in range(span.shape[0]):
        candidate = projector[:, mode].copy()
        for vector in chosen:
            candidate -= (vector @ candidate) * vector
        norm = np.linalg.norm(candidate)
        if norm > 1e-8:
            chosen.append(candidate / norm)
        if len(chosen) == dimension:
            break
    return chosen


def diagonalize(graph: HGraph) -> EigenDecomp:
    try:
        values, vectors = np.linalg.eigh(graph.to_numpy().astype(float))
    except np.linalg.LinAlgError as e:
        raise ArithmeticError(f"Eigendecomposition of the {graph.n_modes}-mode graph did not converge: {e}")

    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    values = np.where(np.abs(values) < EIGEN_ZERO_THRESHOLD, 0.0, values)

    rows: list[np.ndarray] = []
    start = 0
    while start < len(values):
        stop = start + 1
        while stop < len(values) and abs(values[stop] - values[start]) < DEGENERACY_THRESHOLD:
            stop += 1
        if stop - start == 1:
            rows.append(vectors[:, start])
        else:
            rows.extend(_coordinate_basis(vectors[:, start:stop]))
        start = stop

    basis = np.array([_fix_sign(row) for row in rows])
    eigenvalues = tuple(float(value) for value in values)
    rank = sum(1 for value in eigenvalues if value != 0.0)

    classification = []
    for index, value in enumerate(eigenvalues):
        if value > 0:
            record = EigenmodeClassification(index, value, value, "P", "Q")
        elif value < 0:
            record = EigenmodeClassification(index, value, -value, "Q", "P")
        else:
            record = EigenmodeClassification(index, 0.0, 0.0, None, None)
        classification.append(record)

    logger.info("Diagonalized %d-mode graph: rank %d, spectrum %s", graph.n_modes, rank, eigenvalues)
    return EigenDecomp(eigenvalues, basis, rank, tuple(classification))


def cv_nullifiers(decomposition: EigenDecomp) -> list[CvNullifier]:
    """Squeezed rows (Q′ for λ < 0, P′ for λ > 0) and both rows of every zero mode, as forms in the original modes."""
    nullifiers: list[CvNullifier] = []
    for record, row in zip(decomposition.classification, decomposition.basis):
        coefficients = tuple(float(value) for value in row)
        if record.is_constant:
            nullifiers.append(CvNullifier(LinearForm.q_form(coefficients), 0.0, "constant", "Q", record.index))
            nullifiers.append(CvNullifier(LinearForm.p_form(coefficients), 0.0, "constant", "P", record.index))
        elif record.squeezed_quadrature == "Q":
            nullifiers.append(CvNullifier(LinearForm.q_form(coefficients), record.rate, "squeezed", "Q", record.index))
        else:
            nullifiers.append(CvNullifier(LinearForm.p_form(coefficients), record.rate, "squeezed", "P", record.index))
    return nullifiers


def evolve_form(form: LinearForm, r: float, decomposition: EigenDecomp) -> LinearForm:
    """Heisenberg picture: Q′_i -> e^{λ_i r} Q′_i and P′_i -> e^{-λ_i r} P′_i."""
    if form.n_modes != decomposition.n_modes:
        raise ValueError(f"Form acts on {form.n_modes} modes but the decomposition has {decomposition.n_modes}")
    q, p = form.to_numpy()
    rates = np.array(decomposition.eigenvalues) * r
    m = decomposition.basis
    q_evolved = m.T @ (np.exp(rates) * (m @ q))
    p_evolved = m.T @ (np.exp(-rates) * (m @ p))
    return LinearForm(tuple(float(v) for v in q_evolved), tuple(float(v) for v in p_evolved))


def squeezed_variance(rate: float, r: float) -> float:
    """Variance of a unit-norm squeezed form; ½ is the vacuum level."""
    return 0.5 * float(np.exp(-2 * rate * r))


def decomposition_report(decomposition: EigenDecomp) -> dict[str, Any]:
    return {
        "eigenvalues": list(decomposition.eigenvalues),
        "eigenvectors": [[float(value) for value in row] for row in decomposition.basis],
        "rank": decomposition.rank,
        "classification": [record.to_dict() for record in decomposition.classification],
        "nullifiers": [
            {
                "quadrature": nullifier.quadrature,
                "kind": nullifier.kind,
                "rate": nullifier.rate,
                "coefficients": {
                    f"{nullifier.quadrature}{to_label(mode)}": value
                    for mode, value in enumerate(nullifier.form.q if nullifier.quadrature == "Q" else nullifier.form.p)
                    if abs(value) > EIGEN_ZERO_THRESHOLD
                },
            }
            for nullifier in cv_nullifiers(decomposition)
        ],
    }
