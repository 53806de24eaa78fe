from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Union

import numpy as np
import sympy
from scipy import sparse
from sympy import QQ, QQ_I
from sympy.polys.domains.gaussiandomains import GaussianRational

from src.backend.errors import ApproximateOperatorError, OperatorDegreeError
from src.backend.hgraph import HGraph
from src.backend.utils import (
    APPROXIMATE_COEFFICIENT_FLOOR,
    parse_rational_string,
    rational_string,
    to_index,
    to_label,
)
from src.typings import ModeIndex, ModePair, MonomialKey, MonomialKind, SpinComponent

Coefficient = Union[GaussianRational, complex]

ZERO = QQ_I(0, 0)
ONE = QQ_I(1, 0)
HALF = QQ_I(QQ(1, 2), 0)
IMAG = QQ_I(0, 1)

UNIT_KEY: MonomialKey = ("unit", -1, -1)
KIND_ORDER: dict[MonomialKind, int] = {"mixed": 0, "create2": 1, "annih2": 2, "unit": 3}


def exact(value: Any) -> GaussianRational:
    """Converts ints, Fractions, sympy rationals and Gaussian-rational expressions to QQ_I elements."""
    if isinstance(value, GaussianRational):
        return value
    if isinstance(value, (float, complex, np.floating, np.complexfloating)):
        raise ApproximateOperatorError(f"Expected an exact coefficient, but got floating value {value!r}")
    return QQ_I.from_sympy(sympy.sympify(value))


def to_complex(value: Coefficient) -> complex:
    if isinstance(value, GaussianRational):
        return complex(float(value.x), float(value.y))
    return complex(value)


def conjugate(value: Coefficient) -> Coefficient:
    if isinstance(value, GaussianRational):
        return GaussianRational.new(value.x, -value.y)
    return value.conjugate()


def _is_zero(value: Coefficient) -> bool:
    if isinstance(value, GaussianRational):
        return not value
    return abs(value) <= APPROXIMATE_COEFFICIENT_FLOOR


def create2(i: ModeIndex, j: ModeIndex) -> MonomialKey:
    return ("create2", min(i, j), max(i, j))


def annih2(i: ModeIndex, j: ModeIndex) -> MonomialKey:
    return ("annih2", min(i, j), max(i, j))


def mixed(i: ModeIndex, j: ModeIndex) -> MonomialKey:
    return ("mixed", i, j)


def key_sort_index(key: MonomialKey) -> tuple[int, int, int]:
    return KIND_ORDER[key[0]], key[1], key[2]


def quadratic_basis(n_modes: int) -> list[MonomialKey]:
    """Mixed(i, j) for all i, j; Create2(i <= j); Annih2(i <= j); Unit."""
    keys: list[MonomialKey] = [mixed(i, j) for i in range(n_modes) for j in range(n_modes)]
    keys += [create2(i, j) for i in range(n_modes) for j in range(i, n_modes)]
    keys += [annih2(i, j) for i in range(n_modes) for j in range(i, n_modes)]
    keys.append(UNIT_KEY)
    return keys


class Ladder(NamedTuple):
    mode: ModeIndex
    dagger: bool

    def __repr__(self) -> str:
        return f"a{to_label(self.mode)}{'†' if self.dagger else ''}"


def create(mode: ModeIndex) -> Ladder:
    return Ladder(mode, True)


def annihilate(mode: ModeIndex) -> Ladder:
    return Ladder(mode, False)


RawTerm = tuple[Any, tuple[Ladder, ...]]


def ladders_of(key: MonomialKey) -> tuple[Ladder, ...]:
    kind, i, j = key
    if kind == "create2":
        return create(i), create(j)
    if kind == "mixed":
        return create(i), annihilate(j)
    if kind == "annih2":
        return annihilate(i), annihilate(j)
    return ()


def ladder_commutator(u: Ladder, v: Ladder) -> int:
    """[u, v] for single ladder operators: [a_i, a_j†] = δ_ij."""
    if u.mode != v.mode or u.dagger == v.dagger:
        return 0
    return -1 if u.dagger else 1


@dataclass(frozen=True, eq=False)
class QuadOp:
    """Normally-ordered quadratic boson operator: Σ coefficient · monomial over the canonical basis."""

    terms: Mapping[MonomialKey, Coefficient] = field(default_factory=dict)
    approximate: bool = False

    @classmethod
    def from_terms(cls, terms: Mapping[MonomialKey, Any], approximate: bool = False) -> QuadOp:
        canonical: dict[MonomialKey, Coefficient] = {}
        for key, value in terms.items():
            kind, i, j = key
            if kind in ("create2", "annih2") and i > j:
                raise ValueError(f"Monomial key {key!r} is not canonical: {kind} requires i <= j")
            coefficient = to_complex(value) if approximate else exact(value)
            if not _is_zero(coefficient):
                canonical[key] = coefficient
        return cls(canonical, approximate)

    @classmethod
    def zero(cls) -> QuadOp:
        return cls({})

    @classmethod
    def unit(cls) -> QuadOp:
        return cls({UNIT_KEY: ONE})

    @classmethod
    def monomial(cls, key: MonomialKey, coefficient: Any = 1) -> QuadOp:
        return cls.from_terms({key: coefficient})

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for key in sorted(self.terms, key=key_sort_index):
            coefficient = self.terms[key]
            text = str(coefficient) if isinstance(coefficient, GaussianRational) else f"{coefficient:.6g}"
            monomial = "𝟙" if key == UNIT_KEY else "".join(map(repr, ladders_of(key)))
            parts.append(f"({text})·{monomial}")
        return " + ".join(parts)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, QuadOp):
            return NotImplemented
        if self.approximate or other.approximate:
            keys = set(self.terms) | set(other.terms)
            return all(
                abs(to_complex(self.terms.get(key, 0j)) - to_complex(other.terms.get(key, 0j))) <= 1e-12
                for key in keys
            )
        return dict(self.terms) == dict(other.terms)

    def __add__(self, other: QuadOp) -> QuadOp:
        approximate = self.approximate or other.approximate
        merged: dict[MonomialKey, Any] = dict(self._coefficients(approximate))
        for key, value in other._coefficients(approximate).items():
            merged[key] = merged[key] + value if key in merged else value
        return QuadOp.from_terms(merged, approximate)

    def __neg__(self) -> QuadOp:
        return QuadOp({key: -value for key, value in self.terms.items()}, self.approximate)

    def __sub__(self, other: QuadOp) -> QuadOp:
        return self + (-other)

    def __mul__(self, scalar: Any) -> QuadOp:
        approximate = self.approximate or isinstance(scalar, (float, complex))
        factor = to_complex(scalar) if approximate else exact(scalar)
        return QuadOp.from_terms(
            {key: value * factor for key, value in self._coefficients(approximate).items()}, approximate
        )

    __rmul__ = __mul__

    def _coefficients(self, approximate: bool) -> dict[MonomialKey, Coefficient]:
        if approximate and not self.approximate:
            return {key: to_complex(value) for key, value in self.terms.items()}
        return dict(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, key: MonomialKey) -> Coefficient:
        return self.terms.get(key, 0j if self.approximate else ZERO)

    def dagger(self) -> QuadOp:
        adjoint: dict[MonomialKey, Coefficient] = {}
        for (kind, i, j), value in self.terms.items():
            if kind == "create2":
                key = annih2(i, j)
            elif kind == "annih2":
                key = create2(i, j)
            elif kind == "mixed":
                key = mixed(j, i)
            else:
                key = UNIT_KEY
            adjoint[key] = conjugate(value)
        return QuadOp(adjoint, self.approximate)

    def hermitian_part(self) -> QuadOp:
        return (self + self.dagger()) * (0.5 if self.approximate else HALF)

    @property
    def is_hermitian(self) -> bool:
        return self == self.dagger()

    def phase_flip(self, modes: Iterable[ModeIndex]) -> QuadOp:
        """Conjugation by a π phase shift on `modes` (a_k -> -a_k)."""
        flipped = set(modes)
        result: dict[MonomialKey, Coefficient] = {}
        for key, value in self.terms.items():
            odd = sum(ladder.mode in flipped for ladder in ladders_of(key)) % 2
            result[key] = -value if odd else value
        return QuadOp(result, self.approximate)

    def as_approximate(self) -> QuadOp:
        return QuadOp(self._coefficients(True), True)

    def require_exact(self, context: str) -> None:
        if self.approximate:
            raise ApproximateOperatorError(f"{context} requires an exact operator, but got an approximate one")

    def vector(self, basis: Sequence[MonomialKey]) -> list[Coefficient]:
        return [self.coefficient(key) for key in basis]

    def max_mode(self) -> int:
        return max((max(i, j) for kind, i, j in self.terms if kind != "unit"), default=-1)

    def to_records(self) -> list[dict[str, Any]]:
        records = []
        for key in sorted(self.terms, key=key_sort_index):
            kind, i, j = key
            value = self.terms[key]
            record: dict[str, Any] = {
                "kind": kind,
                "i": None if kind == "unit" else to_label(i),
                "j": None if kind == "unit" else to_label(j),
            }
            if isinstance(value, GaussianRational):
                record["re"] = rational_string(value.x)
                record["im"] = rational_string(value.y)
            else:
                record["re"] = value.real
                record["im"] = value.imag
            records.append(record)
        return records

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]]) -> QuadOp:
        terms: dict[MonomialKey, Any] = {}
        approximate = False
        for position, record in enumerate(records):
            kind = record.get("kind")
            if kind not in KIND_ORDER:
                raise ValueError(f"records[{position}] has unknown kind {kind!r}")
            key: MonomialKey = (
                UNIT_KEY if kind == "unit" else (kind, to_index(int(record["i"])), to_index(int(record["j"])))
            )
            re, im = record["re"], record["im"]
            if isinstance(re, str) and isinstance(im, str):
                terms[key] = QQ_I.from_sympy(
                    sympy.Rational(parse_rational_string(re)) + sympy.I * sympy.Rational(parse_rational_string(im))
                )
            else:
                approximate = True
                terms[key] = complex(float(re), float(im))
        return cls.from_terms(terms, approximate)


def normal_order(raw: Iterable[RawTerm], approximate: bool = False) -> QuadOp:
    """Rewrites a formal sum of products of at most two ladder operators into the canonical basis."""
    accumulated: dict[MonomialKey, Coefficient] = {}

    def add(key: MonomialKey, value: Coefficient) -> None:
        accumulated[key] = accumulated[key] + value if key in accumulated else value

    for coefficient, ladders in raw:
        value: Coefficient = to_complex(coefficient) if approximate else exact(coefficient)
        if len(ladders) == 0:
            add(UNIT_KEY, value)
            continue
        if len(ladders) != 2:
            raise OperatorDegreeError(
                f"Cannot normal-order monomial {''.join(map(repr, ladders)) or '1'!r} of degree {len(ladders)}; "
                f"only degree 0 and 2 are representable"
            )
        left, right = ladders
        if left.dagger and right.dagger:
            add(create2(left.mode, right.mode), value)
        elif not left.dagger and not right.dagger:
            add(annih2(left.mode, right.mode), value)
        elif left.dagger:
            add(mixed(left.mode, right.mode), value)
        else:
            add(mixed(right.mode, left.mode), value)
            if left.mode == right.mode:
                add(UNIT_KEY, value)

    return QuadOp.from_terms(accumulated, approximate)


def commutator(a: QuadOp, b: QuadOp) -> QuadOp:
    """normal_order(AB - BA), expanded monomial by monomial with [XY, ZW] = [Y,Z]XW + [Y,W]XZ + [X,Z]WY + [X,W]ZY."""
    approximate = a.approximate or b.approximate
    raw: list[RawTerm] = []
    for key_a, coefficient_a in a._coefficients(approximate).items():
        if key_a == UNIT_KEY:
            continue
        x, y = ladders_of(key_a)
        for key_b, coefficient_b in b._coefficients(approximate).items():
            if key_b == UNIT_KEY:
                continue
            z, w = ladders_of(key_b)
            weight = coefficient_a * coefficient_b
            for scalar, product in (
                (ladder_commutator(y, z), (x, w)),
                (ladder_commutator(y, w), (x, z)),
                (ladder_commutator(x, z), (w, y)),
                (ladder_commutator(x, w), (z, y)),
            ):
                if scalar:
                    raw.append((weight * scalar, product))
    return normal_order(raw, approximate)


def hamiltonian_generator(graph: HGraph) -> QuadOp:
    """K = Σ_{j<k} G_jk (a_j†a_k† - a_j a_k); the evolved state is exp(rK)|0⟩."""
    terms: dict[MonomialKey, Any] = {}
    for j, k, weight in graph.edges:
        terms[create2(j, k)] = weight
        terms[annih2(j, k)] = -weight
    return QuadOp.from_terms(terms)


def number(mode: ModeIndex) -> QuadOp:
    return QuadOp.monomial(mixed(mode, mode))


def schwinger_spin(pair: ModePair, component: SpinComponent) -> QuadOp:
    a, b = pair
    if a == b:
        raise ValueError(f"Schwinger spin needs two distinct modes, but got pair {[to_label(a), to_label(b)]!r}")
    if component == "x":
        return QuadOp.from_terms({mixed(a, b): HALF, mixed(b, a): HALF})
    if component == "y":
        # (1/2i)(a†b - b†a)
        return QuadOp.from_terms({mixed(a, b): -HALF * IMAG, mixed(b, a): HALF * IMAG})
    if component == "z":
        return QuadOp.from_terms({mixed(a, a): HALF, mixed(b, b): -HALF})
    if component == "zero":
        return QuadOp.from_terms({mixed(a, a): HALF, mixed(b, b): HALF})
    raise ValueError(f"Spin component must be one of 'x', 'y', 'z', 'zero', but got {component!r}")


def nullifies_vacuum(op: QuadOp) -> bool:
    return all(kind not in ("unit", "create2") for kind, _, _ in op.terms)


@dataclass(frozen=True, eq=False)
class LinearForm:
    """Σ_j q_j Q_j + p_j P_j with Q = (a + a†)/√2 and P = i(a† - a)/√2."""

    q: tuple[Any, ...]
    p: tuple[Any, ...]

    def __post_init__(self) -> None:
        if len(self.q) != len(self.p):
            raise ValueError(f"q and p coefficients must have equal length, but got {len(self.q)} and {len(self.p)}")

    @classmethod
    def zero(cls, n_modes: int) -> LinearForm:
        return cls((0,) * n_modes, (0,) * n_modes)

    @classmethod
    def q_form(cls, row: Sequence[Any]) -> LinearForm:
        return cls(tuple(row), (0,) * len(row))

    @classmethod
    def p_form(cls, row: Sequence[Any]) -> LinearForm:
        return cls((0,) * len(row), tuple(row))

    @property
    def n_modes(self) -> int:
        return len(self.q)

    @property
    def approximate(self) -> bool:
        return any(isinstance(value, (float, np.floating)) for value in (*self.q, *self.p))

    @property
    def is_zero(self) -> bool:
        return all(value == 0 for value in (*self.q, *self.p))

    def to_numpy(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([float(v) for v in self.q]), np.array([float(v) for v in self.p])

    def __repr__(self) -> str:
        parts = [
            f"{float(value):+.6g}·{name}{to_label(mode)}"
            for name, values in (("Q", self.q), ("P", self.p))
            for mode, value in enumerate(values)
            if value != 0
        ]
        return " ".join(parts) if parts else "0"

    def ladder_coefficients(self) -> list[tuple[Ladder, Coefficient]]:
        """Coefficients of a_j and a_j† in √2·f: (q_j - i p_j) and (q_j + i p_j)."""
        result: list[tuple[Ladder, Coefficient]] = []
        for mode, (q_value, p_value) in enumerate(zip(self.q, self.p)):
            if q_value == 0 and p_value == 0:
                continue
            if self.approximate:
                q_c, p_c = complex(float(q_value)), complex(float(p_value))
                result.append((annihilate(mode), q_c - 1j * p_c))
                result.append((create(mode), q_c + 1j * p_c))
            else:
                q_e, p_e = exact(q_value), exact(p_value)
                result.append((annihilate(mode), q_e - IMAG * p_e))
                result.append((create(mode), q_e + IMAG * p_e))
        return result


def quad_product(f1: LinearForm, f2: LinearForm) -> QuadOp:
    """normal_order((f1 f2 + f2 f1) / 2)."""
    if f1.n_modes != f2.n_modes:
        raise ValueError(f"Linear forms act on {f1.n_modes} and {f2.n_modes} modes")
    approximate = f1.approximate or f2.approximate
    quarter: Coefficient = 0.25 if approximate else HALF * HALF
    raw: list[RawTerm] = []
    for x, c_x in f1.ladder_coefficients():
        for y, c_y in f2.ladder_coefficients():
            weight = c_x * c_y * quarter
            raw.append((weight, (x, y)))
            raw.append((weight, (y, x)))
    return normal_order(raw, approximate)


def total_spin(pairs: Iterable[ModePair], component: SpinComponent) -> QuadOp:
    """Σ_p J_k(p) over the given pairs."""
    total = QuadOp.zero()
    for pair in pairs:
        total = total + schwinger_spin(pair, component)
    return total


def occupations(n_modes: int, max_total: int) -> list[tuple[int, ...]]:
    """All occupation tuples with Σn_i <= max_total, in lexicographic order."""
    if n_modes == 0:
        return [()]
    result = []
    for first in range(max_total + 1):
        result.extend((first, *rest) for rest in occupations(n_modes - 1, max_total - first))
    return result


def apply_monomial(key: MonomialKey, occupation: tuple[int, ...]) -> tuple[tuple[int, ...], float] | None:
    """Monomial acting on |occupation⟩: returns (new occupation, matrix element) or None if it vanishes."""
    state = list(occupation)
    factor = 1.0
    # rightmost ladder acts first
    for ladder in reversed(ladders_of(key)):
        if ladder.dagger:
            state[ladder.mode] += 1
            factor *= state[ladder.mode] ** 0.5
        else:
            if state[ladder.mode] == 0:
                return None
            factor *= state[ladder.mode] ** 0.5
            state[ladder.mode] -= 1
    return tuple(state), factor


def dense_matrix(op: QuadOp, n_modes: int, cutoff: int) -> Any:
    """Matrix of `op` on the Fock basis with total photon number <= cutoff (scipy CSR, truncated)."""
    basis = occupations(n_modes, cutoff)
    index = {occupation: position for position, occupation in enumerate(basis)}
    rows, cols, data = [], [], []
    terms = op._coefficients(True)
    for column, occupation in enumerate(basis):
        for key, value in terms.items():
            image = apply_monomial(key, occupation)
            if image is None or image[0] not in index:
                continue
            rows.append(index[image[0]])
            cols.append(column)
            data.append(value * image[1])
    return sparse.csr_matrix((data, (rows, cols)), shape=(len(basis), len(basis)), dtype=complex)
