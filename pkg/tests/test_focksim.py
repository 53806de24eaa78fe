import math

import numpy as np
from scipy.sparse.linalg import expm_multiply

from tests import perform_test

from src.backend.errors import SectorError, TemplateMismatchError
from src.backend.focksim import (
    FockVector,
    SpinSectorState,
    casimir_postselect,
    evolve_vacuum,
    expectation_variance,
    measure_spin,
    operator_matrix,
    measure_spins,
    perturbative_qubit_state,
    phase_shift,
    relabel_twin,
    sample_counts,
    sector_probability,
    spin_statistics,
    two_mode_squeezed_amplitude,
)
from src.backend.hgraph import HGraph, SpinPairing, builtin
from src.backend.qops import hamiltonian_generator, number, occupations, schwinger_spin, total_spin

EPR = HGraph.from_edges(2, [(0, 1, 1)])
TWO_EPR_PAIRING = SpinPairing.from_labels([(1, 3), (2, 4)])


def test_evolution() -> None:
    state = evolve_vacuum(EPR, 0.1, 20)

    for n in range(4):
        perform_test(
            f"EPR amplitude of |{n},{n}⟩ is tanh^n r / cosh r",
            state.amplitude,
            (n, n),
            expected_response=two_mode_squeezed_amplitude(n, 0.1),
            tolerance=1e-12,
        )
    perform_test("EPR never populates unequal occupations", state.amplitude, (1, 0), expected_response=0j)
    perform_test("Cutoff 20 keeps the norm deficit tiny", lambda: state.norm_deficit < 1e-12, expected_response=True)
    perform_test(
        "r = 0 leaves the vacuum",
        lambda: dict(evolve_vacuum(builtin("ghz3x2")[0], 0.0, 4).amplitudes),
        expected_response={(0, 0, 0, 0, 0, 0): 1 + 0j},
    )
    perform_test(
        "two_epr at cutoff 10 and r = 0.1 loses less than 1e-8 of the norm",
        lambda: evolve_vacuum(builtin("two_epr")[0], 0.1, 10).norm_deficit < 1e-8,
        expected_response=True,
    )
    perform_test(
        "Rejects a negative r",
        evolve_vacuum,
        EPR,
        -0.1,
        10,
        expected_error=ValueError,
        expected_error_message="r must be a finite non-negative number, but got -0.1",
    )
    perform_test(
        "Rejects an odd cutoff",
        evolve_vacuum,
        EPR,
        0.1,
        7,
        expected_error=ValueError,
        expected_error_message="cutoff must be an even integer >= 2, but got 7",
    )

    mean_photons = math.sinh(0.1) ** 2
    perform_test(
        "⟨n1⟩ = sinh² r with zero variance of n1 - n2",
        lambda: (expectation_variance(number(0), state)[0], expectation_variance(number(0) - number(1), state)[1]),
        expected_response=(mean_photons, 0),
        tolerance=1e-10,
    )


def test_postselection() -> None:
    graph = builtin("two_epr")[0]
    state = evolve_vacuum(graph, 0.2, 12)

    for j in (0, 0.5, 1, 1.5):
        perform_test(
            f"Sector (j, j) = ({j}, {j}) has probability (2j+1)tanh^4j r / cosh^4 r",
            lambda: casimir_postselect(state, TWO_EPR_PAIRING, [j, j]).selection_probability,
            expected_response=sector_probability(j, 0.2),
            tolerance=1e-9,
        )
    perform_test(
        "Sectors with unequal spins are empty for two EPR pairs",
        lambda: casimir_postselect(state, TWO_EPR_PAIRING, ["1/2", 1]).is_empty,
        expected_response=True,
    )

    qubits = casimir_postselect(state, TWO_EPR_PAIRING, [0.5, 0.5])
    perform_test(
        "The (1/2, 1/2) sector is (|↑↑⟩ + |↓↓⟩)/√2",
        lambda: [qubits.amplitude(m) for m in ((0.5, 0.5), (0.5, -0.5), (-0.5, 0.5), (-0.5, -0.5))],
        expected_response=[1 / math.sqrt(2), 0, 0, 1 / math.sqrt(2)],
        tolerance=1e-12,
    )
    perform_test(
        "Sector states are normalized",
        lambda: qubits.norm_squared,
        expected_response=1,
        tolerance=1e-12,
    )
    perform_test(
        "Sector expectation of Jz(1,3) + Jz(2,4) has variance 1",
        lambda: expectation_variance(schwinger_spin((0, 2), "z") + schwinger_spin((1, 3), "z"), qubits),
        expected_response=(0, 1),
        tolerance=1e-12,
    )

    epr = evolve_vacuum(EPR, 0.1, 20)
    for n in (1, 2):
        perform_test(
            f"Single EPR pair selects j = {n} with probability tanh^2n r / cosh² r",
            lambda: casimir_postselect(epr, SpinPairing(((0, 1),)), [n]).selection_probability,
            expected_response=two_mode_squeezed_amplitude(n, 0.1) ** 2,
            tolerance=1e-12,
        )
    perform_test(
        "Single EPR pair has an empty j = 1/2 sector",
        lambda: casimir_postselect(epr, SpinPairing(((0, 1),)), [0.5]).selection_probability,
        expected_response=0.0,
    )

    perform_test(
        "Rejects a j_list of the wrong length",
        casimir_postselect,
        state,
        TWO_EPR_PAIRING,
        [0.5],
        expected_error=SectorError,
        expected_error_message="j_list has 1 entries but the pairing has 2 pairs",
    )
    perform_test(
        "Rejects non-half-integer spins",
        casimir_postselect,
        state,
        TWO_EPR_PAIRING,
        [0.5, 0.3],
        expected_error=SectorError,
        expected_error_message="Spin magnitude must be a non-negative half-integer, but got 0.3",
    )
    perform_test(
        "Rejects sectors with photons outside the pairing",
        casimir_postselect,
        state,
        SpinPairing(((0, 1),)),
        [1],
        expected_error=SectorError,
        expected_error_message="Mode 3 is not in the pairing but carries 1 photon(s) in the selected sector",
    )
    perform_test(
        "Rejects m values outside the sector",
        SpinSectorState,
        TWO_EPR_PAIRING,
        (0.5, 0.5),
        {(1.5, 0.5): 1},
        expected_error=SectorError,
        expected_error_message="m-tuple [1.5, 0.5] is outside the sector j = [0.5, 0.5]",
    )


def test_relabeling() -> None:
    pairing = SpinPairing.twin(4)
    photon_in_mode_6 = FockVector.from_amplitudes(8, 4, {(0, 0, 0, 0, 0, 1, 0, 0): 1})
    shifted, relabeled = relabel_twin(photon_in_mode_6, pairing)

    perform_test("Relabeling swaps pairs 2 and 4", lambda: relabeled.labels, expected_response=[[1, 5], [6, 2], [3, 7], [8, 4]])
    perform_test(
        "Relabeling π-shifts mode 6",
        shifted.amplitude,
        (0, 0, 0, 0, 0, 1, 0, 0),
        expected_response=-1 + 0j,
    )
    perform_test(
        "A π shift leaves even occupations alone",
        lambda: phase_shift(FockVector.from_amplitudes(2, 2, {(2, 0): 1}), [0]).amplitude((2, 0)),
        expected_response=1 + 0j,
    )


def test_measurement() -> None:
    single_photon = FockVector.from_amplitudes(2, 2, {(1, 0): 1})

    perform_test(
        "θ = 0 measures Jz directly",
        measure_spin,
        single_photon,
        (0, 1),
        0.0,
        0.0,
        expected_response={(1, 0): 1.0},
    )
    perform_test(
        "θ = π/2 splits a single photon evenly",
        lambda: list(measure_spin(single_photon, (0, 1), math.pi / 2, 0.0).values()),
        expected_response=[0.5, 0.5],
        tolerance=1e-12,
    )
    perform_test(
        "|1,1⟩ at θ = π/2 never splits one photon per port",
        lambda: sorted(measure_spin(FockVector.from_amplitudes(2, 2, {(1, 1): 1}), (0, 1), math.pi / 2, 0.0)),
        expected_response=[(0, 2), (2, 0)],
    )

    qubits = casimir_postselect(evolve_vacuum(builtin("two_epr")[0], 0.1, 10), TWO_EPR_PAIRING, [0.5, 0.5])
    perform_test(
        "z measurements on (|↑↑⟩ + |↓↓⟩)/√2 are perfectly correlated",
        lambda: sorted(measure_spins(qubits, [((0, 2), 0.0, 0.0), ((1, 3), 0.0, 0.0)])),
        expected_response=[((0, 1), (0, 1)), ((1, 0), (1, 0))],
    )
    perform_test(
        "Spin statistics report the mean projection",
        lambda: spin_statistics(measure_spin(qubits, (0, 2), 0.0, 0.0))["mean_projection"],
        expected_response=0,
        tolerance=1e-12,
    )
    perform_test(
        "Rejects overlapping measured pairs",
        measure_spins,
        qubits,
        [((0, 2), 0.0, 0.0), ((2, 1), 0.0, 0.0)],
        expected_error=SectorError,
        expected_error_message="Measured pair [3, 2] overlaps measured pair 1 on mode 3",
    )
    perform_test(
        "Rejects θ outside [0, π]",
        measure_spin,
        qubits,
        (0, 2),
        4.0,
        0.0,
        expected_error=ValueError,
        expected_error_message="theta must lie in [0, π], but got 4.0",
    )
    perform_test(
        "Sampled counts add up to the shot count",
        lambda: sum(sample_counts(measure_spin(qubits, (0, 2), math.pi / 2, 0.0), 1000, seed=7).values()),
        expected_response=1000,
    )
    perform_test(
        "Sampling is reproducible for a fixed seed",
        lambda: sample_counts({"a": 0.3, "b": 0.7}, 50, seed=3) == sample_counts({"a": 0.3, "b": 0.7}, 50, seed=3),
        expected_response=True,
    )


def test_perturbative_state() -> None:
    s = 1 / math.sqrt(12)
    perform_test(
        "ring4x2 gives amplitudes (1, 1, 1, 1, -2, -2)/√12",
        lambda: [
            perturbative_qubit_state(builtin("ring4x2")[0]).to_sector_state().amplitude(m)
            for m in (
                (0.5, -0.5, -0.5, 0.5),
                (-0.5, 0.5, 0.5, -0.5),
                (0.5, 0.5, -0.5, -0.5),
                (-0.5, -0.5, 0.5, 0.5),
                (0.5, -0.5, 0.5, -0.5),
                (-0.5, 0.5, -0.5, 0.5),
            )
        ],
        expected_response=[s, s, s, s, -2 * s, -2 * s],
        tolerance=1e-12,
    )
    perform_test(
        "square4x2 cancels the alternating configurations",
        lambda: sorted(perturbative_qubit_state(builtin("square4x2")[0]).to_sector_state().amplitudes),
        expected_response=[(-0.5, -0.5, 0.5, 0.5), (-0.5, 0.5, 0.5, -0.5), (0.5, -0.5, -0.5, 0.5), (0.5, 0.5, -0.5, -0.5)],
    )
    perform_test(
        "chain4x2 has b = 0",
        lambda: perturbative_qubit_state(builtin("chain4x2")[0]).b,
        expected_response=0,
    )
    perform_test(
        "Rejects graphs that are not on 8 modes",
        perturbative_qubit_state,
        builtin("chain3x2")[0],
        expected_error=TemplateMismatchError,
        expected_error_message="Expected a graph on 8 modes, but got 6",
    )
    perform_test(
        "Rejects coupled blocks",
        perturbative_qubit_state,
        HGraph.from_edges(8, [(0, 1, 1)]),
        expected_error=TemplateMismatchError,
        expected_error_message="Graph is not two identical, uncoupled 4-mode blocks",
    )
    perform_test(
        "Rejects diagonals of the square",
        perturbative_qubit_state,
        builtin("ghz4x2")[0],
        expected_error=TemplateMismatchError,
        expected_error_message="Edge [1, 3, 1] is outside the 4-mode square template",
    )
    perform_test(
        "Rejects an empty template",
        perturbative_qubit_state,
        HGraph.empty(8),
        expected_error=TemplateMismatchError,
        expected_error_message="Perturbative qubit sector is empty: a = G12·G34 and b = G23·G14 are both 0",
    )


def test_matrix_exponential_oracle() -> None:
    graph = builtin("chain3x2")[0]
    r, cutoff = 0.15, 4
    basis = occupations(graph.n_modes, cutoff + 2)
    vacuum = np.zeros(len(basis), dtype=complex)
    vacuum[0] = 1
    oracle = expm_multiply(r * operator_matrix(hamiltonian_generator(graph), graph.n_modes, cutoff + 2), vacuum)
    state = evolve_vacuum(graph, r, cutoff)
    kept = [position for position, occupation in enumerate(basis) if sum(occupation) <= cutoff]

    perform_test(
        "Series evolution matches scipy's expm_multiply on the truncated space",
        lambda: [state.amplitude(basis[position]) for position in kept],
        expected_response=[oracle[position] for position in kept],
        tolerance=1e-10,
    )


def test_rotated_projection() -> None:
    rng = np.random.default_rng(11)
    for trial in range(4):
        amplitudes = {
            occupation: complex(rng.normal(), rng.normal()) for occupation in occupations(2, 3)
        }
        state = FockVector.from_amplitudes(2, 4, amplitudes)
        theta, phi = float(rng.uniform(0, math.pi)), float(rng.uniform(0, 2 * math.pi))
        jx, jy, jz = (expectation_variance(schwinger_spin((0, 1), c), state)[0].real for c in ("x", "y", "z"))
        perform_test(
            f"Mean of (n_b1 - n_b2)/2 on random state {trial} is the spin projection along (θ, φ)",
            lambda: spin_statistics(measure_spin(state, (0, 1), theta, phi))["mean_projection"],
            expected_response=jz * math.cos(theta) + (jx * math.cos(phi) + jy * math.sin(phi)) * math.sin(theta),
            tolerance=1e-10,
        )


def test_conservation() -> None:
    two_epr = builtin("two_epr")[0]
    deficits = [evolve_vacuum(two_epr, 0.2, cutoff).norm_deficit for cutoff in (6, 8, 10, 12)]
    perform_test(
        "Norm deficit shrinks with every photon pair added to the cutoff",
        lambda: all(larger > smaller > 0 for larger, smaller in zip(deficits, deficits[1:])),
        expected_response=True,
    )

    square = evolve_vacuum(builtin("square4x2")[0], 0.1, 8)
    perform_test(
        "square4x2 only populates tuples with N1 + N3 = N2 + N4 in each block",
        lambda: all(
            n[0] + n[2] == n[1] + n[3] and n[4] + n[6] == n[5] + n[7] for n in square.amplitudes
        ) and len(square.amplitudes) > 1,
        expected_response=True,
    )

    for name in ("chain4x2", "square4x2", "ring4x2"):
        graph, pairing = builtin(name)
        shifted, relabeled = relabel_twin(evolve_vacuum(graph, 0.05, 10), pairing)
        qubits = casimir_postselect(shifted, relabeled, [0.5] * 4)
        perform_test(
            f"Post-selected {name} qubits have zero total spin with no spread",
            lambda: [expectation_variance(total_spin(relabeled, component), qubits) for component in ("x", "y", "z")],
            expected_response=[(0, 0)] * 3,
            tolerance=1e-8,
        )

    state = evolve_vacuum(two_epr, 0.2, 12)
    joint = measure_spins(state, [((0, 2), 1.0, 0.5), ((1, 3), 2.0, 4.0)])
    perform_test(
        "Rotated photon counts reproduce the (1/2, 1/2) sector probability",
        lambda: sum(
            probability
            for ((n1, n2), (n3, n4)), probability in joint.items()
            if n1 + n2 == 1 and n3 + n4 == 1
        ),
        expected_response=casimir_postselect(state, TWO_EPR_PAIRING, [0.5, 0.5]).selection_probability,
        tolerance=1e-8,
    )
