import numpy as np

from tests import perform_test

from src.backend.focksim import casimir_postselect, evolve_vacuum, expectation_variance
from src.backend.hgraph import HGraph, SpinPairing, builtin, twin
from src.backend.nullifiers import (
    PRINTED_THREE_CHAIN,
    ad_kernel,
    asymptotic_candidates,
    asymptotic_spin_nullifiers,
    canonicalize_twin,
    combined_nullifier_span,
    commutator_oracle_error,
    exact_spin_nullifiers,
    find_nullifiers,
    format_expression,
    in_span,
    numeric_kernel_dimension,
    printed_constant,
    spin_coordinates,
    spin_span,
    verify_nullifier,
    verify_nullifiers,
)
from src.backend.qops import (
    IMAG,
    QuadOp,
    commutator,
    dense_matrix,
    exact,
    hamiltonian_generator,
    mixed,
    nullifies_vacuum,
    schwinger_spin,
)
from src.backend.utils import DEFAULT_R_GRID

DIRECT = SpinPairing.from_labels([(1, 3), (2, 4)])
CROSSED = SpinPairing.from_labels([(1, 4), (2, 3)])
EPR = HGraph.from_edges(2, [(0, 1, 1)])


def _expressions(graph: HGraph, pairing: SpinPairing) -> list[str]:
    return [nullifier.expression for nullifier in exact_spin_nullifiers(graph, pairing)]


def test_kernel() -> None:
    two_epr = builtin("two_epr")[0]

    perform_test(
        "two_epr has 16 quadratic constants of the motion besides the identity",
        lambda: ad_kernel(hamiltonian_generator(two_epr)).dimension,
        expected_response=16,
    )
    perform_test(
        "A single EPR pair has 4",
        lambda: ad_kernel(hamiltonian_generator(EPR)).dimension,
        expected_response=4,
    )
    perform_test(
        "A zero generator commutes with every quadratic operator",
        lambda: ad_kernel(QuadOp.zero(), 2).dimension,
        expected_response=10,
    )
    perform_test(
        "Kernel elements commute with the generator",
        lambda: all(commutator(hamiltonian_generator(two_epr), element).is_zero for element in ad_kernel(hamiltonian_generator(two_epr))),
        expected_response=True,
    )
    perform_test(
        "Kernel elements are linearly independent",
        lambda: ad_kernel(hamiltonian_generator(two_epr)).rank(),
        expected_response=16,
    )
    perform_test(
        "Kernel keeps the identity apart",
        lambda: ad_kernel(hamiltonian_generator(EPR)).trivial,
        expected_response=(QuadOp.unit(),),
    )

    for name in ("two_epr", "chain3x2"):
        graph = builtin(name)[0]
        perform_test(
            f"Fock-space kernel dimension of {name} matches the exact one",
            numeric_kernel_dimension,
            hamiltonian_generator(graph),
            graph.n_modes,
            expected_response=ad_kernel(hamiltonian_generator(graph)).dimension,
        )
    perform_test(
        "Fock-space commutator matches the symbolic one",
        lambda: commutator_oracle_error(hamiltonian_generator(builtin("two_epr")[0]), schwinger_spin((0, 2), "x"), 4) <= 1e-12,
        expected_response=True,
    )


def test_spin_span() -> None:
    perform_test("Spin span has 4 elements per pair plus the identity", lambda: len(spin_span(DIRECT)), expected_response=9)
    perform_test(
        "Spin labels are J0, Jz, Jx, Jy per pair",
        lambda: spin_span(DIRECT).labels[:4],
        expected_response=("J0(1,3)", "Jz(1,3)", "Jx(1,3)", "Jy(1,3)"),
    )
    perform_test(
        "Spin coordinates of a Jy element",
        lambda: spin_coordinates(schwinger_spin((1, 3), "y"), DIRECT),
        expected_response=[exact(value) for value in (0, 0, 0, 0, 0, 0, 0, 1, 0)],
    )
    perform_test(
        "a1†a3 alone carries Jx and Jy with a relative factor i",
        lambda: spin_coordinates(QuadOp.monomial(mixed(0, 2)), DIRECT)[2:4],  # type: ignore
        expected_response=[exact(1), IMAG],
    )
    perform_test(
        "Operators outside the span have no spin coordinates",
        lambda: spin_coordinates(QuadOp.monomial(mixed(0, 1)), DIRECT) is None,
        expected_response=True,
    )
    perform_test(
        "Expressions drop zero coordinates and fold signs",
        format_expression,
        [exact(1), exact(0), exact(-1), exact("1/2")],
        ["A", "B", "C", "D"],
        expected_response="A - C + 1/2·D",
    )
    span = spin_span(DIRECT)
    perform_test(
        "Jz, Jx and Jy elements are traceless on the truncated Fock space",
        lambda: [
            dense_matrix(element, 4, 4).diagonal().sum()
            for label, element in zip(span.labels, span.elements)
            if label[:2] in ("Jz", "Jx", "Jy")
        ],
        expected_response=[0] * 6,
        tolerance=1e-12,
    )


def test_two_epr() -> None:
    two_epr = builtin("two_epr")[0]
    nullifiers = exact_spin_nullifiers(two_epr, DIRECT)

    perform_test(
        "Pairing (1,3),(2,4) has 4 nullifiers",
        lambda: [nullifier.expression for nullifier in nullifiers],
        expected_response=[
            "J0(1,3) - J0(2,4)",
            "Jz(1,3) - Jz(2,4)",
            "Jx(1,3) - Jx(2,4)",
            "Jy(1,3) + Jy(2,4)",
        ],
    )
    perform_test(
        "Rows are in reduced row echelon form",
        lambda: [[int(value.x) for value in nullifier.coordinates] for nullifier in nullifiers],
        expected_response=[
            [1, 0, 0, 0, -1, 0, 0, 0],
            [0, 1, 0, 0, 0, -1, 0, 0],
            [0, 0, 1, 0, 0, 0, -1, 0],
            [0, 0, 0, 1, 0, 0, 0, 1],
        ],
    )
    perform_test("The crossed pairing also has 4", lambda: len(exact_spin_nullifiers(two_epr, CROSSED)), expected_response=4)
    perform_test(
        "Both pairings together span 6",
        lambda: len(combined_nullifier_span(two_epr, [DIRECT, CROSSED])),
        expected_response=6,
    )
    perform_test(
        "J0 nullifiers are shared between the pairings",
        lambda: in_span(nullifiers[0].operator, combined_nullifier_span(two_epr, [CROSSED]), 4),
        expected_response=True,
    )
    perform_test(
        "Squeezed-form products never land in the spin span",
        lambda: asymptotic_spin_nullifiers(two_epr, DIRECT),
        expected_response=(),
    )
    candidates = asymptotic_candidates(two_epr, DIRECT)
    perform_test("Four squeezed forms give ten products, squares included", lambda: len(candidates), expected_response=10)
    perform_test(
        "Squares of squeezed forms keep pair-creation terms outside the spin span",
        lambda: [candidate.in_span for candidate in candidates if candidate.forms[0] == candidate.forms[1]],
        expected_response=[False] * 4,
    )
    perform_test(
        "Nullifiers are Hermitian and nullify the evolved state",
        lambda: [
            row.variance < 1e-10 and abs(row.expectation) < 1e-10
            for table in verify_nullifiers([n.operator for n in nullifiers], two_epr, [0.05, 0.2], 10)
            for row in table
        ],
        expected_response=[True] * 8,
    )
    perform_test(
        "A single spin component is not a nullifier",
        lambda: [row.variance > 1e-4 for row in verify_nullifier(schwinger_spin((0, 2), "z"), two_epr, [0.1, 0.2], 10)],
        expected_response=[True, True],
    )
    perform_test(
        "Exact nullifiers stay in the spin span of a single EPR pair",
        lambda: _expressions(EPR, SpinPairing(((0, 1),))),
        expected_response=["Jz(1,2)"],
    )


def test_builtin_families() -> None:
    for name, n_modes in (("ghz3x2", 3), ("ghz4x2", 4)):
        graph, pairing = builtin(name)
        perform_test(
            f"{name} has the single total-Jy nullifier",
            _expressions,
            graph,
            pairing,
            expected_response=[" + ".join(f"Jy({k},{k + n_modes})" for k in range(1, n_modes + 1))],
        )

    expected_4 = [
        "J0(1,5) - J0(2,6) + J0(3,7) - J0(4,8)",
        "Jz(1,5) - Jz(2,6) + Jz(3,7) - Jz(4,8)",
        "Jx(1,5) - Jx(2,6) + Jx(3,7) - Jx(4,8)",
        "Jy(1,5) + Jy(2,6) + Jy(3,7) + Jy(4,8)",
    ]
    for name in ("chain4x2", "square4x2", "ring4x2"):
        perform_test(
            f"{name} has the four alternating total-spin nullifiers",
            _expressions,
            *builtin(name),
            expected_response=expected_4,
        )
    perform_test(
        "chain3x2 has four alternating nullifiers",
        _expressions,
        *builtin("chain3x2"),
        expected_response=[
            "J0(1,4) - J0(2,5) + J0(3,6)",
            "Jz(1,4) - Jz(2,5) + Jz(3,6)",
            "Jx(1,4) - Jx(2,5) + Jx(3,6)",
            "Jy(1,4) + Jy(2,5) + Jy(3,6)",
        ],
    )


def test_relabeling() -> None:
    graph, pairing = builtin("ring4x2")
    relabeled = canonicalize_twin(find_nullifiers(graph, pairing))

    perform_test(
        "Relabeling turns the alternating Jz and Jx signs into uniform total spins",
        lambda: [nullifier.expression for nullifier in relabeled.exact],
        expected_response=[
            "J0(1,5) - J0(6,2) + J0(3,7) - J0(8,4)",
            "Jz(1,5) + Jz(6,2) + Jz(3,7) + Jz(8,4)",
            "Jx(1,5) + Jx(6,2) + Jx(3,7) + Jx(8,4)",
            "Jy(1,5) + Jy(6,2) + Jy(3,7) + Jy(8,4)",
        ],
    )
    perform_test("Relabeled sets remember the frame", lambda: relabeled.relabeled, expected_response=True)
    perform_test(
        "Spin expressions list four coordinates per pair and the identity last",
        lambda: relabeled.spin_expression[1],
        expected_response=tuple(exact(value) for value in [0, 1, 0, 0] * 4 + [0]),
    )


def test_three_chain_constants() -> None:
    graph, _ = builtin("chain3x2")
    generator = hamiltonian_generator(graph)
    computed = [nullifier.operator for nullifier in exact_spin_nullifiers(*builtin("chain3x2"))]

    perform_test("Ten printed constants are on record", lambda: len(PRINTED_THREE_CHAIN), expected_response=10)
    perform_test(
        "Printed constants render their identity term",
        lambda: printed_constant(*PRINTED_THREE_CHAIN[0])[1],
        expected_response="J0(1,4) + J0(3,6) - J0(2,5) + 𝟙",
    )
    perform_test(
        "The printed Jz constant is in the computed span",
        lambda: in_span(printed_constant(*PRINTED_THREE_CHAIN[1])[0], computed, 6),
        expected_response=True,
    )
    perform_test(
        "The printed J0 constant commutes with the generator but carries the identity",
        lambda: (
            commutator(generator, printed_constant(*PRINTED_THREE_CHAIN[0])[0]).is_zero,
            in_span(printed_constant(*PRINTED_THREE_CHAIN[0])[0], computed, 6),
        ),
        expected_response=(True, False),
    )


def test_random_twins() -> None:
    rng = np.random.default_rng(7)
    for trial in range(3):
        edges = [(j, k, int(rng.choice([-1, 1]))) for j in range(3) for k in range(j + 1, 3) if rng.random() < 0.7]
        graph = twin(HGraph.from_edges(3, edges))
        generator = hamiltonian_generator(graph)
        nullifiers = exact_spin_nullifiers(graph, SpinPairing.twin(3))
        perform_test(
            f"Random twin graph {trial} has the twin-rotation nullifier",
            lambda: in_span(schwinger_spin((0, 3), "y") + schwinger_spin((1, 4), "y") + schwinger_spin((2, 5), "y"), [n.operator for n in nullifiers], 6),
            expected_response=True,
        )
        perform_test(
            f"Every nullifier of random twin graph {trial} commutes with K and annihilates the vacuum",
            lambda: all(commutator(generator, n.operator).is_zero and nullifies_vacuum(n.operator) for n in nullifiers),
            expected_response=True,
        )


def test_evolved_states() -> None:
    graph, pairing = builtin("ring4x2")
    operators = [nullifier.operator for nullifier in exact_spin_nullifiers(graph, pairing)]

    perform_test(
        "Exact nullifier variances vanish at every r of the grid",
        lambda: [
            max(row.variance for row in rows) < 1e-8
            for rows in zip(*verify_nullifiers(operators, graph, DEFAULT_R_GRID, 10))
        ],
        expected_response=[True] * len(DEFAULT_R_GRID),
    )

    qubits = casimir_postselect(evolve_vacuum(graph, 0.1, 10), pairing, [0.5] * 4)
    perform_test(
        "Exact nullifiers annihilate the post-selected qubit sector",
        lambda: [
            abs(mean) < 1e-8 and variance < 1e-8
            for mean, variance in (expectation_variance(operator, qubits) for operator in operators)
        ],
        expected_response=[True] * 4,
    )
