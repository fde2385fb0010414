import cmath
import json
import math

import numpy as np
import pytest

from oracles import dense_moment
from symq.gaussian import (
    GaussianModel,
    MultiGaussian,
    apply_collective,
    classify_localization,
    closed_moment_summary,
    delta_directions,
    eigen3,
    find_peaks,
    gaussian_density,
    ghz_two_gaussian,
    lambda_matrix,
    model_from_spec,
    moment_summary,
    t_matrix,
    w_fine_structure,
)
from symq.phase_space import SQRT3
from symq.projection import ProjectedQ, project_analytic, project_symmetric
from symq.states import StateSpec, StateVector, build_state

SWEEP = [8, 16, 32, 64, 128]


# ---------------------------------------------------------------------------
# moment summaries and the dispersion matrix
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("spec", [
    StateSpec("dcs", 8, {}),
    StateSpec("dcs", 8, {"mu": "10110010", "nu": "01101011"}),
    StateSpec("basis", 8, {"kappa": "01011010"}),
    StateSpec("ghz", 8, {}),
    StateSpec("shifted_ghz", 8, {"nu": "11110000"}),
    StateSpec("w", 8, {}),
    StateSpec("biseparable_a", 8, {"a": 0.5}),
    StateSpec("graph_pairs", 8, {}),
    StateSpec("uniform_mixed", 8, {}),
    StateSpec("dicke_uniform", 8, {}),
], ids=lambda s: s.label())
def test_closed_summary_matches_dense(spec):
    closed = closed_moment_summary(spec)
    dense = moment_summary(build_state(spec))
    assert np.max(np.abs(closed.mean_spin - dense.mean_spin)) < 1e-10
    assert np.max(np.abs(closed.correlation - dense.correlation)) < 1e-9


def test_product_state_correlation_trace():
    # Tr Gamma = 3N - sum of squared Bloch lengths
    n = 8
    pure = closed_moment_summary(StateSpec("dcs", n, {"mu": "10101010"}))
    assert abs(np.trace(pure.correlation) - 2 * n) < 1e-12
    mixed = closed_moment_summary(StateSpec("uniform_mixed", n, {}))
    assert abs(np.trace(mixed.correlation) - 3 * n) < 1e-12


def test_ghz_and_shifted_correlations():
    n = 8
    ghz = closed_moment_summary(StateSpec("ghz", n, {}))
    assert np.allclose(ghz.correlation, np.diag([n, n, n * n]))
    assert np.allclose(ghz.mean_spin, 0.0)
    sh = closed_moment_summary(StateSpec("shifted_ghz", n, {"nu": "11100000"}))
    assert np.allclose(sh.correlation, np.diag([n, n, (n - 6) ** 2]))


def test_fiducial_t_matrix_and_center():
    model = t_matrix(closed_moment_summary(StateSpec("dcs", 12, {})))
    want = np.full((3, 3), 1.0 / 9.0)
    np.fill_diagonal(want, 4.0 / 9.0)
    assert np.max(np.abs(model.dispersion - want)) < 1e-14
    assert np.max(np.abs(model.center - 1.0 / 3.0)) < 1e-14


def test_singlet_pairs_give_sphere():
    model = t_matrix(closed_moment_summary(StateSpec("biseparable_a", 8, {"a": -1.0})))
    assert np.max(np.abs(model.dispersion - np.eye(3) / 3.0)) < 1e-14
    assert np.max(np.abs(model.center - 0.5)) < 1e-14


def test_biseparable_t_matrix_formula():
    for a in (-1.0, 0.0, 0.5, 2.0):
        model = t_matrix(closed_moment_summary(
            StateSpec("biseparable_a", 8, {"a": a})))
        top = (3 + 3 * a * a + 2 * a) / (2 * a * a + 2) / 3.0
        assert np.allclose(model.dispersion, np.diag([top, top, 1 / 3]))


def test_w_t_matrix_large_n_limit():
    model = t_matrix(closed_moment_summary(StateSpec("w", 10**6, {})))
    want = np.array([[5.0, SQRT3, 0.0], [SQRT3, 5.0, 0.0], [0.0, 0.0, 2.0]]) / 6.0
    assert np.max(np.abs(model.dispersion - want)) < 1e-5


def test_basis_t_matrix_structure():
    n = 8
    model = t_matrix(closed_moment_summary(StateSpec("basis", n, {"kappa": "0" * n})))
    want = 0.5 * np.array([[1.0, 1 / SQRT3, 0.0],
                           [1 / SQRT3, 1.0, 0.0],
                           [0.0, 0.0, 2.0 / 3.0]])
    assert np.max(np.abs(model.dispersion - want)) < 1e-14


def test_lambda_matrix_layout():
    lam = lambda_matrix(4, (1.0, 2.0, 3.0))
    assert lam[0, 1] == SQRT3 * 3.0  # z couples the xy block
    assert lam[0, 2] == SQRT3 * 2.0
    assert lam[1, 2] == SQRT3 * 1.0
    assert np.allclose(np.diag(lam), 8.0)


def test_dispersion_determinant_nonnegative():
    for spec in (StateSpec("dcs", 6, {"mu": "110100", "nu": "010101"}),
                 StateSpec("w", 6, {}), StateSpec("ghz", 6, {}),
                 StateSpec("graph_pairs", 6, {}),
                 StateSpec("dicke_uniform", 6, {})):
        model = t_matrix(moment_summary(build_state(spec)))
        assert np.linalg.det(model.dispersion) >= -1e-12


# ---------------------------------------------------------------------------
# eigen3
# ---------------------------------------------------------------------------


def test_eigen3_fiducial_exact():
    model = t_matrix(closed_moment_summary(StateSpec("dcs", 10, {})))
    vals, vecs = eigen3(model.dispersion)
    assert abs(vals[0] - 2.0 / 3.0) < 1e-12
    assert abs(vals[1] - 1.0 / 3.0) < 1e-12
    assert abs(vals[2] - 1.0 / 3.0) < 1e-12
    assert np.max(np.abs(vecs[:, 0] - 1.0 / SQRT3)) < 1e-12


def test_eigen3_diagonal_input():
    vals, vecs = eigen3(np.diag([0.2, 0.9, 0.5]))
    assert np.allclose(vals, [0.9, 0.5, 0.2])
    assert np.allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]])


def test_eigen3_matches_lapack_on_random_matrices():
    rng = np.random.default_rng(23)
    for _ in range(50):
        m = rng.normal(size=(3, 3))
        t = (m + m.T) / 2.0
        vals, vecs = eigen3(t)
        ref = np.sort(np.linalg.eigvalsh(t))[::-1]
        assert np.max(np.abs(vals - ref)) < 1e-12 * max(1.0, np.abs(ref).max())
        assert np.max(np.abs(vecs.T @ vecs - np.eye(3))) < 1e-12
        assert np.max(np.abs(vecs @ np.diag(vals) @ vecs.T - t)) < 1e-11
        for i in range(3):
            first = vecs[np.nonzero(np.abs(vecs[:, i]) > 1e-12)[0][0], i]
            assert first > 0


def test_eigen3_basis_state_eigenvalues():
    # closed-form eigenvalues 1/2 +- (sqrt3/6)(1-2 gamma), 1/3
    n = 8
    for kappa, gamma in (("0" * 8, 0.0), ("11000000", 0.25), ("1" * 8, 1.0)):
        model = t_matrix(closed_moment_summary(
            StateSpec("basis", n, {"kappa": kappa})))
        vals, vecs = eigen3(model.dispersion)
        c = 1.0 - 2.0 * gamma
        expect = sorted([0.5 + SQRT3 / 6.0 * c, 0.5 - SQRT3 / 6.0 * c, 1 / 3.0],
                        reverse=True)
        assert np.max(np.abs(vals - expect)) < 1e-12
        # principal axes lie along (1,1,0), (1,-1,0), (0,0,1)
        for i in range(3):
            v = vecs[:, i]
            assert min(np.linalg.norm(v - u) for u in
                       (np.array([1, 1, 0]) / math.sqrt(2),
                        np.array([1, -1, 0]) / math.sqrt(2),
                        np.array([0, 0, 1.0]))) < 1e-9


def test_eigen3_rejects_asymmetric():
    with pytest.raises(ValueError):
        eigen3(np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))


# ---------------------------------------------------------------------------
# gaussian density
# ---------------------------------------------------------------------------


def test_density_value_formula():
    model = model_from_spec(StateSpec("dcs", 12, {}))
    n = 12
    t_inv = np.linalg.inv(model.dispersion)
    det = np.linalg.det(model.dispersion)
    rng = np.random.default_rng(29)
    for _ in range(5):
        x = rng.uniform(0.0, 1.0, size=3)
        dx = x - model.center
        want = 2.0 ** (n + 1) / ((math.pi * n) ** 1.5 * math.sqrt(det)) \
            * math.exp(-n * dx @ t_inv @ dx)
        assert abs(gaussian_density(model, x) - want) < 1e-12 * want


def test_density_total_mass_is_identity_resolution():
    # (N^3/2) * integral = 2^N follows from the closed Gaussian integral
    model = model_from_spec(StateSpec("uniform_mixed", 10, {}))
    n = 10
    det = np.linalg.det(model.dispersion)
    prefactor = 2.0 ** (n + 1) / ((math.pi * n) ** 1.5 * math.sqrt(det))
    integral = prefactor * (math.pi / n) ** 1.5 * math.sqrt(det)
    assert abs(n**3 / 2.0 * integral - 2.0**n) < 1e-9 * 2.0**n


def test_uniform_density_exponent():
    # log-density falls like 2 N dx^2 around (1/2,1/2,1/2)
    n = 10
    model = model_from_spec(StateSpec("uniform_mixed", n, {}))
    x1 = np.array([0.55, 0.5, 0.5])
    x2 = np.array([0.60, 0.5, 0.5])
    got = math.log(gaussian_density(model, x1) / gaussian_density(model, x2))
    want = 2.0 * n * (0.10**2 - 0.05**2)
    assert abs(got - want) < 1e-12


def test_degenerate_direction_handling():
    # product state with Bloch vector (1,1,-1)/sqrt3: flat direction (1,1,-1)
    theta = math.pi - math.atan(math.sqrt(2.0))
    amp = np.array([math.cos(theta / 2) * cmath.exp(-1j * math.pi / 8),
                    math.sin(theta / 2) * cmath.exp(1j * math.pi / 8)])
    n = 6
    vec = np.array([1.0 + 0j])
    for _ in range(n):
        vec = np.kron(vec, amp)
    model = t_matrix(moment_summary(StateVector(n, vec)))
    vals, _ = eigen3(model.dispersion)
    assert np.max(np.abs(vals - [2 / 3, 2 / 3, 0.0])) < 1e-12
    flats = delta_directions(model)
    assert len(flats) == 1
    assert np.max(np.abs(flats[0] - np.array([1, 1, -1]) / SQRT3)) < 1e-9
    # density vanishes off the z = x + y plane, stays finite on it
    off_plane = model.center + 0.05 * flats[0]
    on_plane = model.center + np.array([0.05, -0.05, 0.0]) / math.sqrt(2)
    assert gaussian_density(model, off_plane) == 0.0
    assert gaussian_density(model, on_plane) > 0.0


def test_density_multi_gaussian_weights():
    two = ghz_two_gaussian(10)
    x = np.array([0.5, 0.5, 0.5])
    total = gaussian_density(two, x)
    parts = sum(gaussian_density(c, x) for c in two.components)
    assert abs(total - parts) < 1e-12 * parts


def test_density_rejects_negative_dispersion():
    bad = GaussianModel(4, np.full(3, 0.5), np.diag([0.5, 0.5, -0.1]))
    with pytest.raises(ValueError):
        gaussian_density(bad, np.full(3, 0.5))


# ---------------------------------------------------------------------------
# GHZ two-Gaussian model and W fine structure
# ---------------------------------------------------------------------------


def test_ghz_two_gaussian_geometry():
    n = 18
    two = ghz_two_gaussian(n)
    centers = sorted(c.center[2] for c in two.components)
    assert abs(centers[0] - 0.5 * (1 - 1 / SQRT3)) < 1e-14
    assert abs(centers[1] - 0.5 * (1 + 1 / SQRT3)) < 1e-14
    assert all(abs(c.weight - 0.5) < 1e-15 for c in two.components)
    for comp in two.components:
        assert abs(comp.dispersion[2, 2] - 1 / 3.0) < 1e-14
        assert abs(abs(comp.dispersion[0, 1]) - SQRT3 / 6.0) < 1e-14


def test_ghz_two_gaussian_fourth_moment():
    from symq.moments import approx_moment_gaussian

    n = 50
    got = approx_moment_gaussian(ghz_two_gaussian(n), "z", 4)
    want = n**4 + 16.0 * n**2
    assert abs(got - want) < 1e-9 * want


def test_ghz_two_gaussian_xy_exchange_symmetry():
    two = ghz_two_gaussian(12)
    rng = np.random.default_rng(31)
    for _ in range(5):
        x = rng.uniform(0, 1, size=3)
        swapped = np.array([x[1], x[0], x[2]])
        assert abs(gaussian_density(two, x)
                   - gaussian_density(two, swapped)) < 1e-12


def test_w_fine_structure_positions():
    center, (xp, xm) = w_fine_structure(18)
    d = (SQRT3 - 1.0) / (2.0 * math.sqrt(18))
    assert np.allclose(xp, [0.5 + d, 0.5 - d, 2 - SQRT3])
    assert np.allclose(xm, [0.5 - d, 0.5 + d, 2 - SQRT3])
    assert np.allclose(center, [0.5, 0.5, (1 - 1 / SQRT3) / 2])
    # separation scales as N^(-1/2)
    seps = []
    for n in (16, 36, 64):
        _, (a, b) = w_fine_structure(n)
        seps.append(np.linalg.norm(a - b) * math.sqrt(n))
    assert np.allclose(seps, seps[0])
    with pytest.raises(ValueError):
        w_fine_structure(2)


# ---------------------------------------------------------------------------
# peaks
# ---------------------------------------------------------------------------


def test_find_peaks_fiducial_single_summit():
    pq = project_symmetric(StateSpec("dcs", 18, {}))
    peaks = find_peaks(pq)
    assert peaks[0].triple == (6, 6, 6)
    assert all(p.value < 0.5 * peaks[0].value for p in peaks[1:])


def test_find_peaks_w_and_ghz_structure():
    w_peaks = find_peaks(project_symmetric(StateSpec("w", 18, {})))
    assert {p.triple for p in w_peaks[:2]} == {(7, 5, 10), (10, 5, 7)}
    ghz_peaks = find_peaks(project_symmetric(StateSpec("ghz", 18, {})))
    z_coords = sorted(p.triple[1] for p in ghz_peaks[:2])
    assert abs(z_coords[0] / 18 - 0.5 * (1 - 1 / SQRT3)) <= 1 / 18 + 1e-12
    assert abs(z_coords[1] / 18 - 0.5 * (1 + 1 / SQRT3)) <= 1 / 18 + 1e-12


def test_find_peaks_plateau_reports_lexicographic_min():
    triples = np.array([(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)])
    logs = np.log(np.array([2.0, 2.0, 2.0, 1.0]))
    pq = ProjectedQ(1, triples, logs, source="analytic", state_label="synthetic")
    peaks = find_peaks(pq)
    assert len(peaks) == 1
    assert peaks[0].triple == (0, 0, 0)


# ---------------------------------------------------------------------------
# localization
# ---------------------------------------------------------------------------


def test_localization_product_families():
    for family, params in (("dcs", {}), ("basis", {"kappa_frac": 0.25}),
                           ("uniform_mixed", {})):
        rep = classify_localization(family, SWEEP, params)
        assert rep.localized, family
        assert all(4 / 3 - 1e-9 <= t <= 1.5 + 1e-9 for t in rep.trace_t)


def test_localization_pair_families():
    for family, params in (("biseparable_a", {"a": -1.0}),
                           ("biseparable_a", {"a": 0.5}),
                           ("graph_pairs", {})):
        rep = classify_localization(family, SWEEP, params)
        assert rep.localized, family
        assert max(rep.trace_t) - min(rep.trace_t) < 1e-9  # N-independent


def test_localization_ghz_delocalized_z_only():
    rep = classify_localization("ghz", SWEEP)
    assert rep.verdicts.count("delocalized") == 1
    assert not rep.localized
    # the growing eigenvalue is the first (sorted descending) = z direction
    assert rep.verdicts[0] == "delocalized"
    assert rep.eigenvalues[-1][0] > 20 * rep.eigenvalues[-1][1]


def test_localization_half_shifted_ghz():
    rep = classify_localization("shifted_ghz", SWEEP, {"nu_frac": 0.5})
    assert rep.localized
    for n in SWEEP:
        model = t_matrix(closed_moment_summary(
            StateSpec("shifted_ghz", n, {"nu_frac": 0.5})))
        assert np.allclose(model.dispersion, np.diag([0.5, 0.5, 1 / 3]))


def test_localization_dicke_not_localized():
    rep = classify_localization("dicke_uniform", SWEEP)
    assert not rep.localized
    assert rep.verdicts == ["delocalized"] * 3


def test_localization_report_serialises():
    rep = classify_localization("w", SWEEP)
    doc = json.loads(rep.to_json())
    assert doc["localized"] is True
    assert len(doc["eigenvalues"]) == len(SWEEP)
    assert len(doc["fit_exponents"]) == 3
    with pytest.raises(ValueError):
        classify_localization("w", [8, 16, 32])


def test_apply_collective_matches_dense_oracle():
    from oracles import collective_matrix

    n = 5
    rng = np.random.default_rng(37)
    psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    psi /= np.linalg.norm(psi)
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    got = apply_collective(psi, n, u)
    want = collective_matrix(n, u) @ psi
    assert np.max(np.abs(got - want)) < 1e-12


def test_moment_summary_methods():
    spec = StateSpec("w", 6, {})
    auto = moment_summary(spec)
    dense = moment_summary(spec, method="dense")
    assert np.allclose(auto.correlation, dense.correlation)
    with pytest.raises(ValueError):
        moment_summary(spec, method="nonsense")
    with pytest.raises(ValueError):
        moment_summary(StateSpec("superposition_basis", 4,
                                 {"kappa1": "0011", "kappa2": "1100"}),
                       method="closed")


def test_multigaussian_weight_validation():
    comp = GaussianModel(4, np.full(3, 0.5), np.eye(3) / 3.0, weight=0.4)
    with pytest.raises(ValueError):
        MultiGaussian([comp])


def test_summary_mean_moment_consistency():
    # second moments implied by Gamma match raw dense second moments
    spec = StateSpec("graph_pairs", 6, {})
    ms = closed_moment_summary(spec)
    state = build_state(spec)
    for i, unit in enumerate(((1, 0, 0), (0, 1, 0), (0, 0, 1))):
        raw2 = dense_moment(state, unit, 2, central=False)
        assert abs(ms.correlation[i, i] + ms.mean_spin[i] ** 2 - raw2) < 1e-9
