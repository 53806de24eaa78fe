from tests import perform_test

from src.backend.errors import HGraphParseError, HGraphValidationError
from src.backend.hgraph import BUILTIN_NAMES, HGraph, SpinPairing, builtin, parse_hgraph, serialize_hgraph, twin

TWO_EPR_DOCUMENT = '{"modes": 4, "edges": [[1, 2, 1], [3, 4, 1]], "pairing": [[1, 3], [2, 4]]}'


def test_parse() -> None:
    graph, pairing = parse_hgraph(TWO_EPR_DOCUMENT)

    perform_test("Parses the mode count", lambda: graph.n_modes, expected_response=4)
    perform_test("Parses edges as 0-based triples", lambda: graph.edges, expected_response=((0, 1, 1), (2, 3, 1)))
    perform_test("Mirrors every edge weight", lambda: graph.weights[1][0], expected_response=1)
    perform_test("Parses the pairing", lambda: pairing.labels, expected_response=[[1, 3], [2, 4]])  # type: ignore
    perform_test(
        "Pairing is optional",
        lambda: parse_hgraph('{"modes": 2, "edges": [[1, 2, -3]]}')[1] is None,
        expected_response=True,
    )
    perform_test(
        "Serializing then parsing gives the same graph and pairing",
        lambda: parse_hgraph(serialize_hgraph(graph, pairing)),
        expected_response=(graph, pairing),
    )
    perform_test(
        "Serialization is byte-stable",
        serialize_hgraph,
        graph,
        expected_response=serialize_hgraph(HGraph.from_edges(4, [(2, 3, 1), (0, 1, 1)])),
    )


def test_parse_errors() -> None:
    perform_test(
        "Rejects invalid JSON",
        parse_hgraph,
        '{"modes": 4',
        expected_error=HGraphParseError,
        expected_error_message="Graph document is not valid JSON: Expecting ',' delimiter (line 1, column 12)",
    )
    perform_test(
        "Rejects a non-object document",
        parse_hgraph,
        "[1, 2]",
        expected_error=HGraphParseError,
        expected_error_message="Graph document must be a JSON object, but got 'list'",
    )
    perform_test(
        "Rejects unknown keys",
        parse_hgraph,
        '{"modes": 2, "edges": [], "weights": []}',
        expected_error=HGraphParseError,
        expected_error_message="Unknown key 'weights' in graph document",
    )
    perform_test(
        "Rejects a document without edges",
        parse_hgraph,
        '{"modes": 2}',
        expected_error=HGraphParseError,
        expected_error_message="Graph document is missing the 'edges' key",
    )
    perform_test(
        "Rejects a non-integer mode count",
        parse_hgraph,
        '{"modes": 2.5, "edges": []}',
        expected_error=HGraphParseError,
        expected_error_message="'modes' must be an integer, but got 2.5",
    )
    perform_test(
        "Rejects a single-mode graph",
        parse_hgraph,
        '{"modes": 1, "edges": []}',
        expected_error=HGraphValidationError,
        expected_error_message="Graph must have at least 2 modes, but got 1",
    )
    perform_test(
        "Rejects a malformed edge",
        parse_hgraph,
        '{"modes": 2, "edges": [[1, 2]]}',
        expected_error=HGraphParseError,
        expected_error_message="edges[0] must be a list [i, j, w], but got [1, 2]",
    )
    perform_test(
        "Rejects a fractional weight",
        parse_hgraph,
        '{"modes": 2, "edges": [[1, 2, 0.5]]}',
        expected_error=HGraphParseError,
        expected_error_message="edges[0] entry must be an integer, but got 0.5",
    )
    perform_test(
        "Rejects an edge outside the graph",
        parse_hgraph,
        '{"modes": 3, "edges": [[1, 2, 1], [2, 4, 1]]}',
        expected_error=HGraphValidationError,
        expected_error_message="edges[1] = [2, 4, 1] refers to mode 4, outside 1..3",
    )
    perform_test(
        "Rejects a self-loop",
        parse_hgraph,
        '{"modes": 3, "edges": [[2, 2, 1]]}',
        expected_error=HGraphValidationError,
        expected_error_message="edges[0] = [2, 2, 1] is a self-loop on mode 2",
    )
    perform_test(
        "Rejects a duplicated edge in either orientation",
        parse_hgraph,
        '{"modes": 3, "edges": [[1, 2, 1], [2, 1, -1]]}',
        expected_error=HGraphValidationError,
        expected_error_message="edges[1] = [2, 1, -1] duplicates edges[0]",
    )
    perform_test(
        "Rejects a pairing outside the graph",
        parse_hgraph,
        '{"modes": 2, "edges": [], "pairing": [[1, 3]]}',
        expected_error=HGraphValidationError,
        expected_error_message="pairing[0] = [1, 3] refers to mode 3, outside 1..2",
    )
    perform_test(
        "Rejects a pairing that reuses a mode",
        parse_hgraph,
        '{"modes": 4, "edges": [], "pairing": [[1, 2], [2, 3]]}',
        expected_error=HGraphValidationError,
        expected_error_message="pairing[1] reuses mode 2 already in pairing[0]",
    )
    perform_test(
        "Rejects a pair of a mode with itself",
        parse_hgraph,
        '{"modes": 4, "edges": [], "pairing": [[3, 3]]}',
        expected_error=HGraphValidationError,
        expected_error_message="pairing[0] = [3, 3] pairs mode 3 with itself",
    )


def test_validation() -> None:
    perform_test(
        "Rejects an asymmetric weight matrix",
        HGraph,
        2,
        ((0, 1), (2, 0)),
        expected_error=HGraphValidationError,
        expected_error_message="Weights must be symmetric, but G[1,2] = 1 and G[2,1] = 2",
    )
    perform_test(
        "Rejects a nonzero diagonal",
        HGraph,
        2,
        ((1, 0), (0, 0)),
        expected_error=HGraphValidationError,
        expected_error_message="Diagonal weight G[1,1] must be 0, but got 1",
    )
    perform_test(
        "Rejects a non-square weight matrix",
        HGraph,
        2,
        ((0, 1),),
        expected_error=HGraphValidationError,
        expected_error_message="Weights must be a 2x2 matrix",
    )
    perform_test(
        "Rejects a pairing mode beyond the graph",
        SpinPairing.from_labels([(1, 5)]).validate_for,
        4,
        expected_error=HGraphValidationError,
        expected_error_message="pairing[0] = [1, 5] refers to mode 5, outside 1..4",
    )


def test_builtins() -> None:
    perform_test(
        "Every builtin is a twin graph",
        lambda: all(builtin(name)[0].is_twin() for name in BUILTIN_NAMES),
        expected_response=True,
    )
    perform_test(
        "Builtin pairings couple mode k with mode k + n",
        lambda: builtin("chain4x2")[1].labels,
        expected_response=[[1, 5], [2, 6], [3, 7], [4, 8]],
    )
    perform_test(
        "two_epr has edges 1-2 and 3-4",
        lambda: builtin("two_epr")[0].edges,
        expected_response=((0, 1, 1), (2, 3, 1)),
    )
    perform_test(
        "square4x2 carries the negative edge 1-4 in both copies",
        lambda: [edge for edge in builtin("square4x2")[0].edges if edge[2] < 0],
        expected_response=[(0, 3, -1), (4, 7, -1)],
    )
    perform_test(
        "ghz3x2 is not bipartite",
        lambda: builtin("ghz3x2")[0].is_bipartite,
        expected_response=False,
    )
    perform_test(
        "ring4x2 is bipartite",
        lambda: builtin("ring4x2")[0].is_bipartite,
        expected_response=True,
    )
    perform_test(
        "Rejects an unknown builtin",
        builtin,
        "star5x2",
        expected_error=HGraphValidationError,
        expected_error_message=(
            "Unknown builtin graph 'star5x2'; expected one of "
            "two_epr, chain3x2, ghz3x2, chain4x2, square4x2, ring4x2, ghz4x2"
        ),
    )


def test_pairing() -> None:
    pairing = SpinPairing.twin(4)

    perform_test(
        "Relabeling swaps every second pair",
        lambda: pairing.relabeled_twin().labels,
        expected_response=[[1, 5], [6, 2], [3, 7], [8, 4]],
    )
    perform_test("Pairing lists its modes in order", lambda: pairing.modes, expected_response=(0, 4, 1, 5, 2, 6, 3, 7))
    perform_test(
        "Coupling two copies breaks the twin structure",
        lambda: HGraph.from_edges(4, [(0, 1, 1), (2, 3, 1), (1, 2, 1)]).is_twin(),
        expected_response=False,
    )
    perform_test(
        "Twin doubles the base graph",
        lambda: twin(HGraph.from_edges(3, [(0, 2, -2)])).edges,
        expected_response=((0, 2, -2), (3, 5, -2)),
    )
