"""Exact and Gaussian-approximated moments of collective observables.

Two engines live here.  The first expands any product of up to four
collective operators into P-symbol polynomials in the shifted weight counts
E_i = N(1 - 2 x_i): per site the symbols of (I, sx, sy, sz) are proportional
to the four characters of the Klein group of sign patterns, so operator
words reduce to character algebra plus a distinct-site inclusion-exclusion.
The second produces exact moments of the named families: sums of independent
+-1 site variables for product states, per-pair spectra for pair products,
and the small closed forms of the entangled families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .bitstring import BitString
from .gaussian import (
    GaussianModel,
    MultiGaussian,
    apply_collective,
    direction_vector,
    eigen3,
    ghz_two_gaussian,
    model_from_spec,
)
from .phase_space import MAX_DENSE_QUBITS, SQRT3
from .states import MixedEnsemble, StateSpec, StateVector, build_state

MAX_SYMBOL_ORDER = 4   # P-symbol polynomials exist up to fourth order
MAX_EXACT_ORDER = 6

_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


class NonSphericalModel(ValueError):
    pass


def excitation_fraction(kappa: BitString) -> float:
    """Fraction of excited qubits h(kappa)/N of a computational string."""
    return kappa.weight() / kappa.n


# ---------------------------------------------------------------------------
# P-symbol polynomials of operator words
# ---------------------------------------------------------------------------


def _set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _site_matrix(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return u[0] * _SX + u[1] * _SY + u[2] * _SZ


def _char_vec(mat: np.ndarray) -> np.ndarray:
    """Site P-symbol of a 2x2 operator over the characters (1, ex, ey, ez).

    Scaled by 2 so that idle sites carry no factor: the 2^-N normalisation of
    the full symbol is tracked by the caller.
    """
    c0 = (mat[0, 0] + mat[1, 1]) / 2.0
    cx = (mat[0, 1] + mat[1, 0]) / 2.0
    cy = 1j * (mat[0, 1] - mat[1, 0]) / 2.0
    cz = (mat[0, 0] - mat[1, 1]) / 2.0
    return np.array([c0, SQRT3 * cx, SQRT3 * cy, SQRT3 * cz])


def _char_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise product of site functions; Klein group indices compose by XOR."""
    out = np.zeros(4, dtype=complex)
    for i in range(4):
        for j in range(4):
            out[i ^ j] += a[i] * b[j]
    return out


def _affine_poly(vec: np.ndarray, n_qubits: int) -> dict:
    """Sum over sites of a character function, as a polynomial in (Ex, Ey, Ez)."""
    poly = {}
    if vec[0] != 0:
        poly[(0, 0, 0)] = vec[0] * n_qubits
    for axis, coeff in enumerate(vec[1:]):
        if coeff != 0:
            key = tuple(1 if i == axis else 0 for i in range(3))
            poly[key] = poly.get(key, 0.0) + coeff
    return poly


def _poly_add(a: dict, b: dict, scale=1.0) -> dict:
    out = dict(a)
    for key, val in b.items():
        out[key] = out.get(key, 0.0) + scale * val
    return out


def _poly_mul(a: dict, b: dict) -> dict:
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            key = (ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2])
            out[key] = out.get(key, 0.0) + va * vb
    return out


def _distinct_site_sum(vecs: list[np.ndarray], n_qubits: int) -> dict:
    """Sum over pairwise-distinct site assignments of a product of site functions."""
    total: dict = {}
    for grouping in _set_partitions(list(range(len(vecs)))):
        coeff = 1.0
        poly = {(0, 0, 0): complex(1.0)}
        for group in grouping:
            coeff *= (-1.0) ** (len(group) - 1) * math.factorial(len(group) - 1)
            merged = reduce(_char_mul, (vecs[g] for g in group))
            poly = _poly_mul(poly, _affine_poly(merged, n_qubits))
        total = _poly_add(total, poly, scale=coeff)
    return total


def collective_p_poly(directions, n_qubits: int) -> dict:
    """P-symbol of the ordered product prod_i (S . u_i) as an E-polynomial.

    Keys are exponents of (Ex, Ey, Ez); the full symbol carries an additional
    2^-N factor.  Word length is limited to four.
    """
    if len(directions) > MAX_SYMBOL_ORDER:
        raise ValueError(f"P-symbols available up to order {MAX_SYMBOL_ORDER}")
    mats = [_site_matrix(u) for u in directions]
    total: dict = {}
    for part in _set_partitions(list(range(len(mats)))):
        vecs = []
        for block in part:
            m = np.eye(2, dtype=complex)
            for pos in sorted(block):
                m = m @ mats[pos]
            vecs.append(_char_vec(m))
        total = _poly_add(total, _distinct_site_sum(vecs, n_qubits))
    return total


def p_poly_eval(poly: dict, e_values) -> float:
    """Evaluate an E-polynomial (without the 2^-N factor) at concrete counts."""
    ex, ey, ez = (float(v) for v in e_values)
    acc = 0.0 + 0.0j
    for (px, py, pz), coeff in sorted(poly.items()):
        acc += coeff * ex**px * ey**py * ez**pz
    return float(acc.real)


# ---------------------------------------------------------------------------
# Gaussian moments of E-polynomials
# ---------------------------------------------------------------------------


def _isserlis(idx: tuple, cov: np.ndarray) -> float:
    if not idx:
        return 1.0
    if len(idx) % 2:
        return 0.0
    first, rest = idx[0], idx[1:]
    total = 0.0
    for i in range(len(rest)):
        total += cov[first, rest[i]] * _isserlis(rest[:i] + rest[i + 1:], cov)
    return total


def _gauss_raw_monomial(powers, mean: np.ndarray, cov: np.ndarray) -> float:
    variables = [0] * powers[0] + [1] * powers[1] + [2] * powers[2]
    npos = len(variables)
    total = 0.0
    for paired in range(1 << npos):
        idx = tuple(variables[i] for i in range(npos) if (paired >> i) & 1)
        if len(idx) % 2:
            continue
        rest = [variables[i] for i in range(npos) if not (paired >> i) & 1]
        mean_part = 1.0
        for v in rest:
            mean_part *= mean[v]
        total += mean_part * _isserlis(idx, cov)
    return total


def _gauss_poly_expectation(poly: dict, mean: np.ndarray, cov: np.ndarray) -> float:
    acc = 0.0 + 0.0j
    for powers, coeff in sorted(poly.items()):
        acc += coeff * _gauss_raw_monomial(powers, mean, cov)
    if abs(acc.imag) > 1e-9 * max(1.0, abs(acc.real)):
        raise ArithmeticError("P-symbol expectation came out complex")
    return float(acc.real)


def _model_components(model):
    if isinstance(model, MultiGaussian):
        return model.components
    return [model]


def approx_moment_gaussian(model, direction, order: int,
                           central: bool = False) -> float:
    """Moment of S.n under the Gaussian model of the projected density.

    The lattice average (N^3/2) * Int P(x) Q(x) d^3x collapses to the plain
    Gaussian expectation of the E-polynomial symbol, evaluated by moment
    identities rather than quadrature.  Orders 1..4.
    """
    if not 1 <= order <= MAX_SYMBOL_ORDER:
        raise ValueError(f"Gaussian moments available for orders 1..{MAX_SYMBOL_ORDER}")
    unit = direction_vector(direction)
    comps = _model_components(model)
    n_qubits = comps[0].n_qubits

    def raw(j: int) -> float:
        if j == 0:
            return 1.0
        poly = collective_p_poly([unit] * j, n_qubits)
        val = 0.0
        for comp in comps:
            mean_e = n_qubits * (1.0 - 2.0 * comp.center)
            cov_e = 2.0 * n_qubits * comp.dispersion
            val += comp.weight * _gauss_poly_expectation(poly, mean_e, cov_e)
        return val

    if not central:
        return raw(order)
    mu = raw(1)
    total = 0.0
    for j in range(order + 1):
        total += math.comb(order, j) * raw(j) * (-mu) ** (order - j)
    return total


# ---------------------------------------------------------------------------
# exact moments
# ---------------------------------------------------------------------------

_CENTRAL_FROM_CUMULANT = {
    2: lambda k: k[2],
    3: lambda k: k[3],
    4: lambda k: k[4] + 3.0 * k[2] ** 2,
    5: lambda k: k[5] + 10.0 * k[3] * k[2],
    6: lambda k: k[6] + 15.0 * k[4] * k[2] + 10.0 * k[3] ** 2 + 15.0 * k[2] ** 3,
}

_CUMULANT_FROM_CENTRAL = {
    2: lambda m: m[2],
    3: lambda m: m[3],
    4: lambda m: m[4] - 3.0 * m[2] ** 2,
    5: lambda m: m[5] - 10.0 * m[3] * m[2],
    6: lambda m: m[6] - 15.0 * m[4] * m[2] - 10.0 * m[3] ** 2 + 30.0 * m[2] ** 3,
}


def _central_to_cumulants(central: dict, max_order: int) -> dict:
    return {r: _CUMULANT_FROM_CENTRAL[r](central) for r in range(2, max_order + 1)}


def _cumulants_to_central(cum: dict, max_order: int) -> dict:
    return {r: _CENTRAL_FROM_CUMULANT[r](cum) for r in range(2, max_order + 1)}


def _raw_from_central(central: dict, mean: float, order: int) -> float:
    total = 0.0
    for j in range(order + 1):
        mu_j = 1.0 if j == 0 else (0.0 if j == 1 else central[j])
        total += math.comb(order, j) * mu_j * mean ** (order - j)
    return total


def _pm1_central(m: float, order: int) -> float:
    """Central moment of a +-1 variable with mean m."""
    return 0.5 * ((1.0 + m) * (1.0 - m) ** order
                  + (-1.0) ** order * (1.0 - m) * (1.0 + m) ** order)


def _independent_sum_moment(site_means, order: int, central: bool) -> float:
    """Moment of a sum of independent +-1 site variables with given means."""
    if order == 0:
        return 1.0
    means = np.asarray(site_means, dtype=float)
    mean_total = float(means.sum())
    if order == 1:
        return 0.0 if central else mean_total
    unique, counts = np.unique(means, return_counts=True)
    cum = {r: 0.0 for r in range(2, order + 1)}
    for m, cnt in zip(unique, counts):
        site_central = {r: _pm1_central(float(m), r) for r in range(2, order + 1)}
        site_cum = _central_to_cumulants(site_central, order)
        for r in site_cum:
            cum[r] += cnt * site_cum[r]
    central_moments = _cumulants_to_central(cum, order)
    if central:
        return central_moments[order]
    return _raw_from_central(central_moments, mean_total, order)


def _independent_block_moment(values: np.ndarray, probs: np.ndarray,
                              n_blocks: int, order: int, central: bool) -> float:
    """Moment of a sum of n_blocks iid discrete variables (pair spectra)."""
    mean_block = float(np.dot(probs, values))
    block_central = {
        r: float(np.dot(probs, (values - mean_block) ** r))
        for r in range(2, order + 1)
    }
    if order == 1:
        return 0.0 if central else n_blocks * mean_block
    block_cum = _central_to_cumulants(block_central, order)
    cum = {r: n_blocks * block_cum[r] for r in block_cum}
    central_moments = _cumulants_to_central(cum, order)
    if central:
        return central_moments[order]
    return _raw_from_central(central_moments, n_blocks * mean_block, order)


def _dcs_site_means(spec: StateSpec, unit: np.ndarray) -> np.ndarray:
    """Per-site means <n.sigma> of a displaced coherent product state."""
    n = spec.n
    mu_bits, nu_bits = spec.param_bits("mu"), spec.param_bits("nu")
    if mu_bits is not None or nu_bits is not None:
        bits = list(zip(mu_bits or [0] * n, nu_bits or [0] * n))
    else:
        from .gaussian import _dcs_weights

        hm, hn, hmn = _dcs_weights(spec)
        both = (hm + hn - hmn) // 2
        bits = [(1, 1)] * both + [(1, 0)] * (hm - both) \
            + [(0, 1)] * (hn - both) + [(0, 0)] * (n - hm - hn + both)
    out = np.empty(n)
    for i, (a, b) in enumerate(bits):
        out[i] = (unit[0] * (-1.0) ** a + unit[1] * (-1.0) ** (a + b)
                  + unit[2] * (-1.0) ** b) / SQRT3
    return out


def _pair_spectrum(pair_vec: np.ndarray, unit: np.ndarray):
    """Outcome values and probabilities of S.n restricted to one qubit pair."""
    h = np.kron(_site_matrix(unit), np.eye(2)) + np.kron(np.eye(2), _site_matrix(unit))
    vals, vecs = np.linalg.eigh(h)
    chi = np.asarray(pair_vec, dtype=complex)
    chi = chi / np.linalg.norm(chi)
    probs = np.abs(vecs.conj().T @ chi) ** 2
    return vals, probs


def _axis_of(unit: np.ndarray) -> str | None:
    for axis, vec in (("x", (1, 0, 0)), ("y", (0, 1, 0)), ("z", (0, 0, 1))):
        if np.allclose(unit, vec, atol=1e-12):
            return axis
    return None


def _ghz_transverse_moment(N: int, h_nu: int, axis: str, order: int) -> float:
    """Raw x/y moments of a (shifted) GHZ state, N >= 3, order <= 4.

    The generic values N and 3N^2-2N pick up wrap-around terms when the
    whole register can be flipped by exactly `order` single-qubit flips.
    """
    if order == 1:
        return 0.0
    if order == 2:
        return float(N)
    if order == 3:
        if N == 3 and axis == "x":
            return 6.0
        return 0.0
    if order == 4:
        base = 3.0 * N * N - 2.0 * N
        if N == 4:
            base += 24.0 if axis == "x" else 24.0 * (-1.0) ** h_nu
        return base
    raise ValueError("transverse GHZ closed form limited to order 4")


def closed_form_moment(spec: StateSpec, direction, order: int,
                       central: bool) -> float | None:
    """Exact moment from the family's closed form, or None when unavailable."""
    if order > MAX_EXACT_ORDER:
        raise ValueError(f"moment orders limited to {MAX_EXACT_ORDER}")
    unit = direction_vector(direction)
    N, fam = spec.n, spec.family
    if fam in ("dcs", "basis", "uniform_mixed"):
        if fam == "dcs":
            means = _dcs_site_means(spec, unit)
        elif fam == "basis":
            g = spec.weight_param("kappa", default_frac=None)
            means = np.array([unit[2]] * (N - g) + [-unit[2]] * g)
        else:
            means = np.zeros(N)
        return _independent_sum_moment(means, order, central)
    if fam in ("biseparable_a", "graph_pairs"):
        if N % 2:
            raise ValueError(f"{fam} needs an even number of qubits")
        if fam == "graph_pairs":
            pair = np.array([1.0, 1.0, 1.0, -1.0]) / 2.0
        else:
            a = float(spec.params.get("a", -1.0))
            pair = np.array([0.0, 1.0, a, 0.0])
        vals, probs = _pair_spectrum(pair, unit)
        return _independent_block_moment(vals, probs, N // 2, order, central)
    axis = _axis_of(unit)
    if axis is None:
        return None
    if fam in ("ghz", "shifted_ghz"):
        if N < 3:
            return None
        h = spec.weight_param("nu") if fam == "shifted_ghz" else 0
        if axis == "z":
            # spectrum is +-(N-2h) with equal weight; mean zero
            val = float(N - 2 * h)
            return 0.0 if order % 2 else val**order
        if order > 4:
            return None
        return _ghz_transverse_moment(N, h, axis, order)
    if fam == "w":
        if N < 2:
            return None
        if axis == "z":
            # eigenstate with eigenvalue N-2: central moments vanish
            return 0.0 if central else float(N - 2) ** order
        if order == 1 or order == 3:
            return 0.0
        if order == 2:
            return 3.0 * N - 2.0
        if order == 4:
            return 15.0 * N * N - 30.0 * N + 16.0
        return None
    return None


def _dense_moment(state, direction, order: int, central: bool,
                  mean: float | None = None) -> float:
    comps = state.components if isinstance(state, MixedEnsemble) else [(1.0, state)]
    n = state.n_qubits
    unit = direction_vector(direction)
    if central and mean is None:
        mean = _dense_moment(state, direction, 1, central=False)
    shift = mean if central else 0.0
    total = 0.0
    for w, vec in comps:
        psi = vec.amplitudes
        cur = psi
        for _ in range(order):
            cur = apply_collective(cur, n, unit) - shift * cur
        total += w * float(np.real(np.vdot(psi, cur)))
    return total


def exact_moment(state_or_spec, direction, order: int, central: bool = True,
                 method: str = "auto", dense_max: int = MAX_DENSE_QUBITS) -> float:
    """Exact moment <(S.n)^r> (optionally centered) of a state or family."""
    if not 1 <= order <= MAX_EXACT_ORDER:
        raise ValueError(f"order must be 1..{MAX_EXACT_ORDER}")
    if isinstance(state_or_spec, (StateVector, MixedEnsemble)):
        return _dense_moment(state_or_spec, direction, order, central)
    spec = state_or_spec
    if method in ("auto", "closed"):
        val = closed_form_moment(spec, direction, order, central)
        if val is not None:
            return val
        if method == "closed":
            raise ValueError(
                f"no closed-form moment for {spec.family!r} along {direction!r}")
    if spec.n > dense_max:
        raise ValueError(
            f"{spec.label()}: no closed form and N > {dense_max} for the dense path")
    return _dense_moment(build_state(spec), direction, order, central)


def exact_central_moment(state_or_spec, direction, order: int, **kw) -> float:
    """Central moment <(S.n - <S.n>)^r>, exact."""
    return exact_moment(state_or_spec, direction, order, central=True, **kw)


# ---------------------------------------------------------------------------
# reports and diagnostics
# ---------------------------------------------------------------------------


@dataclass
class MomentReport:
    family: str
    n_qubits: int
    direction: str
    order: int
    exact: float
    approx: float
    deviation: float
    deviation_is_absolute: bool
    normalization_power: int | None = None
    normalized_deviation: float | None = None
    cumulants: dict | None = None

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n": self.n_qubits,
            "direction": self.direction,
            "order": self.order,
            "exact": self.exact,
            "approx": self.approx,
            "deviation": self.deviation,
            "deviation_is_absolute": self.deviation_is_absolute,
            "normalization_power": self.normalization_power,
            "normalized_deviation": self.normalized_deviation,
            "cumulants": self.cumulants,
        }


def _deviation(approx: float, exact: float) -> tuple[float, bool]:
    if exact != 0.0:
        return (approx - exact) / exact, False
    return approx - exact, True


def gaussian_model_for(spec: StateSpec, model: str = "single"):
    """Gaussian model used on the approximate side of the comparisons."""
    if model == "single":
        return model_from_spec(spec)
    if model == "ghz_two":
        if spec.family not in ("ghz", "shifted_ghz"):
            raise ValueError("two-Gaussian model is specific to GHZ-type states")
        return ghz_two_gaussian(spec.n)
    raise ValueError(f"unknown model {model!r}")


def deviation_table(family: str, params: dict | None, directions, orders,
                    n_values, model: str = "single", central: bool = False,
                    normalization_power: int | None = None,
                    with_cumulants: bool = False) -> list[MomentReport]:
    """Exact-vs-Gaussian comparison rows for a family over directions and orders.

    The raw (uncentered) convention matches the closed-form comparisons of the
    localized/delocalized analysis; pass central=True for centered moments.
    """
    params = dict(params or {})
    rows = []
    for n in sorted(int(v) for v in n_values):
        spec = StateSpec(family, n, params)
        gm = gaussian_model_for(spec, model)
        for direction in directions:
            label = direction if isinstance(direction, str) else str(tuple(direction))
            for order in sorted(orders):
                ex = exact_moment(spec, direction, order, central=central)
                ap = approx_moment_gaussian(gm, direction, order, central=central)
                dev, absolute = _deviation(ap, ex)
                norm = None
                if normalization_power is not None and not absolute:
                    norm = dev * float(n) ** normalization_power
                cums = None
                if with_cumulants:
                    diag = cumulant_diagnostic(spec, direction)
                    cums = {"k2": diag.k2, "k3": diag.k3, "k4": diag.k4}
                rows.append(MomentReport(family, n, label, order, ex, ap, dev,
                                         absolute, normalization_power, norm, cums))
    return rows


def asymptotic_normalized_deviation(family: str, params: dict | None, direction,
                                    order: int, power: int, model: str = "single",
                                    central: bool = False, n_base: int = 500,
                                    levels: int = 3) -> float:
    """Limit of N^power * (approx - exact) / exact by Richardson extrapolation.

    Both sides are closed-form polynomials in N, so the sequence converges in
    integer powers of 1/N and a short doubling ladder pins the limit.
    """
    seq = []
    for lvl in range(levels):
        n = n_base * (1 << lvl)
        spec = StateSpec(family, n, dict(params or {}))
        ex = exact_moment(spec, direction, order, central=central, method="closed")
        ap = approx_moment_gaussian(gaussian_model_for(spec, model), direction,
                                    order, central=central)
        if ex == 0.0:
            raise ValueError("normalized deviation undefined for zero exact moment")
        seq.append(float(n) ** power * (ap - ex) / ex)
    # eliminate 1/N then 1/N^2 error terms
    for step in range(1, levels):
        factor = float(1 << step)
        seq = [(factor * b - a) / (factor - 1.0) for a, b in zip(seq, seq[1:])]
    return seq[0]


@dataclass
class CumulantDiagnostic:
    k2: float
    k3: float
    k4: float
    gaussian_ok: bool
    threshold: str = "|k4| < k2^2 / 2"


def cumulant_diagnostic(state_or_spec, direction) -> CumulantDiagnostic:
    """Cumulants of S.n up to fourth order and a Gaussian-validity flag."""
    mu2 = exact_moment(state_or_spec, direction, 2, central=True)
    mu3 = exact_moment(state_or_spec, direction, 3, central=True)
    mu4 = exact_moment(state_or_spec, direction, 4, central=True)
    k4 = mu4 - 3.0 * mu2 * mu2
    ok = abs(k4) < 0.5 * mu2 * mu2 + 1e-12
    return CumulantDiagnostic(mu2, mu3, k4, ok)


@dataclass
class SphericalCheck:
    r: float
    predicted_second_moment: float


def spherical_check(model: GaussianModel, spread_tol: float = 0.05) -> SphericalCheck:
    """Radius parameter of a spherical model and the implied <S_j^2>.

    A spherical density exp(-N r dx^2) has T = I/r; physical states obey
    r <= 3, with equality at paired singlets.
    """
    vals, _ = eigen3(model.dispersion)
    mean = float(vals.mean())
    if mean <= 0.0:
        raise NonSphericalModel("dispersion matrix is not positive")
    if (vals.max() - vals.min()) / mean > spread_tol:
        raise NonSphericalModel(f"eigenvalue spread {vals} exceeds {spread_tol:.0%}")
    if np.max(np.abs(model.center - 0.5)) > 1e-9:
        raise NonSphericalModel("spherical distributions are centered at (1/2,1/2,1/2)")
    r = 1.0 / mean
    if r > 3.0 + 1e-6:
        raise ValueError(f"radius parameter r = {r} exceeds the physical bound 3")
    n = model.n_qubits
    return SphericalCheck(r, 2.0 * n * (3.0 - r) / r)
