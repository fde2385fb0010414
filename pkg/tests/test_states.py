import json
import math

import numpy as np
import pytest

from oracles import rel_err
from symq.bitstring import BitString
from symq.combinat import MeasLattice
from symq.states import (
    MixedEnsemble,
    StateSpec,
    StateVector,
    UnsupportedFamily,
    analytic_projected_log,
    analytic_projected_q,
    build_state,
    dicke_vector,
    has_analytic_projection,
    is_symmetric_spec,
    load_custom_amplitudes,
)
from symq.projection import project_analytic, project_bruteforce


def amp(state, text):
    return state.amplitudes[int(text, 2)]


def test_all_families_normalised():
    specs = [
        StateSpec("dcs", 5, {"mu": "10101", "nu": "01010"}),
        StateSpec("basis", 5, {"kappa": "01100"}),
        StateSpec("superposition_basis", 4, {"kappa1": "0011", "kappa2": "1100"}),
        StateSpec("ghz", 5, {}),
        StateSpec("shifted_ghz", 5, {"nu": "11000"}),
        StateSpec("w", 5, {}),
        StateSpec("biseparable_a", 6, {"a": 0.7}),
        StateSpec("graph_pairs", 6, {}),
    ]
    for spec in specs:
        state = build_state(spec)
        norm = np.sum(np.abs(state.amplitudes) ** 2)
        assert abs(norm - 1.0) < 1e-12


def test_ghz_and_w_literals():
    ghz = build_state(StateSpec("ghz", 3, {}))
    assert abs(amp(ghz, "000") - 1 / math.sqrt(2)) < 1e-15
    assert abs(amp(ghz, "111") - 1 / math.sqrt(2)) < 1e-15
    assert np.count_nonzero(ghz.amplitudes) == 2

    w = build_state(StateSpec("w", 3, {}))
    for text in ("100", "010", "001"):
        assert abs(amp(w, text) - 1 / math.sqrt(3)) < 1e-15
    assert np.count_nonzero(w.amplitudes) == 3


def test_graph_pairs_is_tensor_cube():
    pair = np.zeros(4, dtype=complex)
    pair[0b00], pair[0b01], pair[0b10], pair[0b11] = 1, 1, 1, -1
    pair /= 2.0
    cube = np.kron(np.kron(pair, pair), pair)
    state = build_state(StateSpec("graph_pairs", 6, {}))
    assert np.max(np.abs(state.amplitudes - cube)) < 1e-15


def test_shifted_ghz_support():
    state = build_state(StateSpec("shifted_ghz", 8, {"nu": "11110000"}))
    assert abs(amp(state, "11110000") - 1 / math.sqrt(2)) < 1e-15
    assert abs(amp(state, "00001111") - 1 / math.sqrt(2)) < 1e-15


def test_mixed_families():
    uni = build_state(StateSpec("uniform_mixed", 3, {}))
    assert isinstance(uni, MixedEnsemble)
    assert len(uni.components) == 8
    assert abs(sum(w for w, _ in uni.components) - 1.0) < 1e-12

    dicke = build_state(StateSpec("dicke_uniform", 4, {}))
    assert len(dicke.components) == 5
    assert all(abs(w - 0.2) < 1e-15 for w, _ in dicke.components)
    v = dicke_vector(4, 2)
    assert np.count_nonzero(v.amplitudes) == 6
    assert abs(np.linalg.norm(v.amplitudes) - 1.0) < 1e-13


def test_spec_json_round_trip():
    spec = StateSpec("shifted_ghz", 8, {"nu": "11110000"})
    doc = json.loads(spec.to_json())
    assert doc == {"family": "shifted_ghz", "n": 8, "params": {"nu": "11110000"}}
    back = StateSpec.from_json(spec.to_json())
    assert back == spec


def test_spec_validation_errors():
    with pytest.raises(UnsupportedFamily):
        StateSpec("nonsense", 4, {})
    with pytest.raises(ValueError):
        build_state(StateSpec("biseparable_a", 5, {"a": 1.0}))
    with pytest.raises(ValueError):
        build_state(StateSpec("graph_pairs", 7, {}))
    with pytest.raises(ValueError):
        build_state(StateSpec("basis", 4, {"kappa": "011"}))
    with pytest.raises(ValueError):
        build_state(StateSpec("superposition_basis", 4,
                              {"kappa1": "0011", "kappa2": "0011"}))
    with pytest.raises(ValueError):
        StateVector(2, np.array([1.0, 1.0, 0.0, 0.0]))


def test_custom_loader(tmp_path):
    n = 3
    rng = np.random.default_rng(21)
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    amps /= np.linalg.norm(amps)
    path = tmp_path / "state.txt"
    np.savetxt(path, np.column_stack([amps.real, amps.imag]))
    state = load_custom_amplitudes(path, n)
    assert np.max(np.abs(state.amplitudes - amps)) < 1e-10
    spec = StateSpec("custom", n, {"path": str(path)})
    assert np.max(np.abs(build_state(spec).amplitudes - amps)) < 1e-10

    bad = tmp_path / "zero.txt"
    np.savetxt(bad, np.zeros((1 << n, 2)))
    with pytest.raises(ValueError):
        load_custom_amplitudes(bad, n)


def test_weight_params_beyond_word_size():
    spec = StateSpec("basis", 100, {"kappa_frac": 0.25})
    assert spec.weight_param("kappa", default_frac=None) == 25
    long_string = "1" * 30 + "0" * 70
    spec2 = StateSpec("shifted_ghz", 100, {"nu": long_string})
    assert spec2.weight_param("nu") == 30
    with pytest.raises(ValueError):
        StateSpec("basis", 100, {"kappa": "01"}).weight_param("kappa")


def test_symmetry_detection():
    assert is_symmetric_spec(StateSpec("ghz", 4, {}))
    assert is_symmetric_spec(StateSpec("dcs", 4, {"mu": "1111", "nu": "0000"}))
    assert not is_symmetric_spec(StateSpec("dcs", 4, {"mu": "1010", "nu": "0000"}))
    assert not is_symmetric_spec(StateSpec("graph_pairs", 4, {}))


def test_analytic_fiducial_matches_step_formula():
    from symq.combinat import r_mnk_exact

    n = 6
    spec = StateSpec("dcs", n, {})
    for m, nn, k in ((0, 0, 0), (2, 2, 2), (3, 1, 2), (6, 6, 0)):
        want = 3.0 ** (-(m + nn + k) / 2.0) * r_mnk_exact(n, m, nn, k)
        assert abs(analytic_projected_q(spec, m, nn, k) - want) < 1e-12 * want


def test_analytic_uniform_is_shell_count_over_2n():
    from symq.combinat import r_mnk_exact

    n = 6
    spec = StateSpec("uniform_mixed", n, {})
    for m, nn, k in ((1, 1, 2), (3, 3, 0), (4, 2, 4)):
        want = r_mnk_exact(n, m, nn, k) * 2.0 ** (-n)
        assert abs(analytic_projected_q(spec, m, nn, k) - want) < 1e-12 * want


def test_analytic_matches_bruteforce_all_closed_forms():
    specs = [
        StateSpec("dcs", 10, {}),
        StateSpec("dcs", 10, {"mu": "1" * 10, "nu": "1" * 10}),
        StateSpec("basis", 10, {"kappa": "0110100110"}),
        StateSpec("ghz", 10, {}),
        StateSpec("shifted_ghz", 10, {"nu": "1110010010"}),
        StateSpec("w", 10, {}),
        StateSpec("biseparable_a", 10, {"a": 0.5}),
        StateSpec("graph_pairs", 10, {}),
        StateSpec("uniform_mixed", 8, {}),
    ]
    for spec in specs:
        fast = project_analytic(spec)
        brute = project_bruteforce(build_state(spec), label=spec.label())
        assert rel_err(fast.values(), brute.values()) < 1e-9, spec.label()


def test_analytic_normalisation_large_n():
    for spec in (StateSpec("dcs", 100, {}),
                 StateSpec("ghz", 100, {}),
                 StateSpec("w", 100, {}),
                 StateSpec("basis", 100, {"kappa_frac": 0.3}),
                 StateSpec("shifted_ghz", 100, {"nu_frac": 0.5})):
        pq = project_analytic(spec)
        assert abs(pq.normalization() - 1.0) < 1e-9, spec.label()


def test_analytic_unsupported_families_signal():
    assert not has_analytic_projection(StateSpec("dicke_uniform", 6, {}))
    assert not has_analytic_projection(StateSpec("dcs", 6, {"mu": "101010"}))
    with pytest.raises(UnsupportedFamily):
        analytic_projected_log(StateSpec("dicke_uniform", 6, {}), [0], [0], [0])
    with pytest.raises(UnsupportedFamily):
        analytic_projected_q(StateSpec("dcs", 6, {"mu": "101010"}), 0, 0, 0)
    with pytest.raises(ValueError):
        analytic_projected_q(StateSpec("ghz", 6, {}), 1, 1, 1)


def test_analytic_ghz_exact_zeros():
    # odd h(alpha) with h(beta) = N/2 kills the interference term exactly
    n = 6
    spec = StateSpec("ghz", n, {})
    lattice = MeasLattice(n)
    logs = analytic_projected_log(spec, *np.asarray(lattice.triples).T.tolist())
    triples = np.asarray(lattice.triples)
    zero_mask = (triples[:, 1] == 3) & (triples[:, 0] % 2 == 1)
    assert np.all(np.isneginf(logs[zero_mask]))


def test_bitstring_param_requires_matching_length():
    spec = StateSpec("basis", 4, {"kappa": "0101"})
    assert spec.bitstring_param("kappa") == BitString.from_text("0101")
    with pytest.raises(ValueError):
        StateSpec("basis", 4, {"kappa": "010"}).bitstring_param("kappa")
