"""Macroscopic-limit analytics: collective moments, dispersion matrix, Gaussian models,
peak finding and localization classification."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .phase_space import MAX_DENSE_QUBITS, SQRT3
from .projection import ProjectedQ
from .states import MixedEnsemble, StateSpec, StateVector, build_state

AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}

JACOBI_TOL = 1e-13
ZERO_EIGEN_REL = 1e-10       # eigenvalue below this fraction of TrT counts as zero
DELOCALIZED_EPSILON = 0.1    # fitted-exponent margin below 1 for a verdict


def direction_vector(direction) -> np.ndarray:
    """Accept an axis name or a 3-vector; return the unit vector."""
    if isinstance(direction, str):
        if direction not in AXES:
            raise ValueError(f"unknown axis {direction!r}")
        return np.array(AXES[direction])
    v = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    return v / norm


@dataclass
class MomentSummary:
    """First and second collective moments: <S_i> and the covariance of S."""

    n_qubits: int
    mean_spin: np.ndarray
    correlation: np.ndarray

    def __post_init__(self) -> None:
        self.mean_spin = np.asarray(self.mean_spin, dtype=float).reshape(3)
        self.correlation = np.asarray(self.correlation, dtype=float).reshape(3, 3)
        if not np.allclose(self.correlation, self.correlation.T, atol=1e-9):
            raise ValueError("correlation matrix must be symmetric")


@dataclass
class GaussianModel:
    """Single Gaussian component in the unit measurement cube."""

    n_qubits: int
    center: np.ndarray
    dispersion: np.ndarray
    weight: float = 1.0

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        self.dispersion = np.asarray(self.dispersion, dtype=float).reshape(3, 3)
        if not 0.0 < self.weight <= 1.0:
            raise ValueError("component weight must be in (0, 1]")


@dataclass
class MultiGaussian:
    components: list[GaussianModel]

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("need at least one component")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"component weights sum to {total}, not 1")

    @property
    def n_qubits(self) -> int:
        return self.components[0].n_qubits


# ---------------------------------------------------------------------------
# moments: dense oracle and closed forms
# ---------------------------------------------------------------------------


def apply_collective(amps: np.ndarray, n_qubits: int, direction) -> np.ndarray:
    """(S . n) |psi> without materialising the 2^N x 2^N operator."""
    nx, ny, nz = direction_vector(direction) if isinstance(direction, str) \
        else np.asarray(direction, dtype=float)
    psi = np.asarray(amps, dtype=complex)
    out = np.zeros_like(psi)
    dim = psi.size
    for j in range(n_qubits):
        right = dim >> (j + 1)
        r = psi.reshape(-1, 2, right)
        term = np.zeros_like(r)
        if nx:
            term[:, 0, :] += nx * r[:, 1, :]
            term[:, 1, :] += nx * r[:, 0, :]
        if ny:
            term[:, 0, :] += -1j * ny * r[:, 1, :]
            term[:, 1, :] += 1j * ny * r[:, 0, :]
        if nz:
            term[:, 0, :] += nz * r[:, 0, :]
            term[:, 1, :] += -nz * r[:, 1, :]
        out += term.reshape(dim)
    return out


def _dense_summary(state) -> MomentSummary:
    comps = state.components if isinstance(state, MixedEnsemble) else [(1.0, state)]
    n = state.n_qubits
    mean = np.zeros(3)
    raw = np.zeros((3, 3))
    for w, vec in comps:
        psi = vec.amplitudes
        s_psi = [apply_collective(psi, n, ax) for ax in ("x", "y", "z")]
        for i in range(3):
            mean[i] += w * float(np.real(np.vdot(psi, s_psi[i])))
            for j in range(3):
                raw[i, j] += w * float(np.real(np.vdot(s_psi[i], s_psi[j])))
    gamma = 0.5 * (raw + raw.T) - np.outer(mean, mean)
    return MomentSummary(n, mean, gamma)


def _dcs_weights(spec: StateSpec) -> tuple[int, int, int]:
    """(h(mu), h(nu), h(mu+nu)) of a displaced coherent state."""
    n = spec.n
    hm, hn = spec.weight_param("mu"), spec.weight_param("nu")
    mu_bits, nu_bits = spec.param_bits("mu"), spec.param_bits("nu")
    if mu_bits is not None or nu_bits is not None:
        mu_bits = mu_bits or [0] * n
        nu_bits = nu_bits or [0] * n
        hmn = sum(a ^ b for a, b in zip(mu_bits, nu_bits))
    else:
        # weight-only parameterisation: displacements on disjoint supports
        hmn = hm + hn if hm + hn <= n else 2 * n - hm - hn
    return hm, hn, hmn


def closed_moment_summary(spec: StateSpec) -> MomentSummary:
    """Exact first/second collective moments from the family's closed form.

    Valid at any N (GHZ-type families need N >= 3, where double spin flips
    cannot wrap around the register).
    """
    N, fam = spec.n, spec.family
    if fam == "dcs":
        hm, hn, hmn = _dcs_weights(spec)
        mean = np.array([N - 2 * hm, N - 2 * hmn, N - 2 * hn]) / SQRT3
        gamma = np.full((3, 3), 0.0)
        np.fill_diagonal(gamma, 2.0 * N / 3.0)
        gamma[0, 1] = gamma[1, 0] = -(N - 2.0 * hn) / 3.0
        gamma[0, 2] = gamma[2, 0] = -(N - 2.0 * hmn) / 3.0
        gamma[1, 2] = gamma[2, 1] = -(N - 2.0 * hm) / 3.0
        return MomentSummary(N, mean, gamma)
    if fam == "basis":
        g = spec.weight_param("kappa", default_frac=None)
        return MomentSummary(N, [0.0, 0.0, N - 2.0 * g],
                             np.diag([float(N), float(N), 0.0]))
    if fam in ("ghz", "shifted_ghz"):
        if N < 3:
            raise ValueError("GHZ closed-form moments need N >= 3")
        h = spec.weight_param("nu") if fam == "shifted_ghz" else 0
        return MomentSummary(N, np.zeros(3),
                             np.diag([float(N), float(N), float((N - 2 * h) ** 2)]))
    if fam == "w":
        if N < 2:
            raise ValueError("w needs N >= 2")
        return MomentSummary(N, [0.0, 0.0, N - 2.0],
                             np.diag([3.0 * N - 2.0, 3.0 * N - 2.0, 0.0]))
    if fam == "biseparable_a":
        a = float(spec.params.get("a", -1.0))
        q = (1.0 + a) ** 2 / (1.0 + a * a)
        return MomentSummary(N, np.zeros(3), np.diag([N * q, N * q, 0.0]))
    if fam == "graph_pairs":
        gamma = np.array([[N, 0.0, N], [0.0, 2.0 * N, 0.0], [N, 0.0, N]], dtype=float)
        return MomentSummary(N, np.zeros(3), gamma)
    if fam == "uniform_mixed":
        return MomentSummary(N, np.zeros(3), np.diag([float(N)] * 3))
    if fam == "dicke_uniform":
        v = N * (N + 2.0) / 3.0
        return MomentSummary(N, np.zeros(3), np.diag([v, v, v]))
    raise ValueError(f"no closed-form moments for family {fam!r}")


def moment_summary(state_or_spec, method: str = "auto",
                   dense_max: int = MAX_DENSE_QUBITS) -> MomentSummary:
    """Collective moment summary of a state or family spec."""
    if isinstance(state_or_spec, (StateVector, MixedEnsemble)):
        return _dense_summary(state_or_spec)
    spec = state_or_spec
    if method not in ("auto", "closed", "dense"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "closed"):
        try:
            return closed_moment_summary(spec)
        except ValueError:
            if method == "closed":
                raise
    return _dense_summary(build_state(spec, max_qubits=dense_max))


# ---------------------------------------------------------------------------
# dispersion matrix and Gaussian models
# ---------------------------------------------------------------------------


def lambda_matrix(n_qubits: int, mean_spin) -> np.ndarray:
    """Symmetric matrix with 2N on the diagonal and sqrt(3)<S> off-diagonals."""
    sx, sy, sz = np.asarray(mean_spin, dtype=float)
    d = 2.0 * n_qubits
    return np.array([
        [d, SQRT3 * sz, SQRT3 * sy],
        [SQRT3 * sz, d, SQRT3 * sx],
        [SQRT3 * sy, SQRT3 * sx, d],
    ])


def t_matrix(ms: MomentSummary) -> GaussianModel:
    """Dispersion matrix T = (Gamma + Lambda) / (6N) and the center of the cloud."""
    N = ms.n_qubits
    t = (ms.correlation + lambda_matrix(N, ms.mean_spin)) / (6.0 * N)
    det = float(np.linalg.det(t))
    if det < -1e-12:
        raise ValueError(f"dispersion matrix has negative determinant {det}")
    center = 0.5 * (1.0 - ms.mean_spin / (N * SQRT3))
    return GaussianModel(N, center, t)


def eigen3(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.

    Returns eigenvalues sorted descending and the matching orthonormal
    eigenvectors as columns, each with its first nonzero component positive.
    """
    a = np.array(t, dtype=float)
    if a.shape != (3, 3) or not np.allclose(a, a.T, atol=1e-9):
        raise ValueError("input must be a symmetric 3x3 matrix")
    v = np.eye(3)
    scale = max(1.0, float(np.abs(a).max()))
    for _ in range(64):
        off = math.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off <= JACOBI_TOL * scale:
            break
        for p in range(2):
            for q in range(p + 1, 3):
                if abs(a[p, q]) <= 1e-300:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / a[p, q]
                tsign = 1.0 if theta >= 0 else -1.0
                tval = tsign / (abs(theta) + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + tval * tval)
                s = tval * c
                rot = np.eye(3)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = v[:, order]
    for i in range(3):
        col = vecs[:, i]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            vecs[:, i] = -col
    return vals, vecs


def delta_directions(model: GaussianModel) -> list[np.ndarray]:
    """Eigen-directions with (numerically) zero dispersion."""
    vals, vecs = eigen3(model.dispersion)
    thresh = ZERO_EIGEN_REL * max(float(np.trace(model.dispersion)), 1e-300)
    return [vecs[:, i] for i in range(3) if vals[i] < thresh]


def gaussian_density(model, x) -> float:
    """Density of a (multi-)Gaussian model at a point of the unit cube.

    Zero-dispersion directions are treated as exact delta factors: the point
    must lie on the supporting plane (else the density is 0), and the
    remaining directions carry a rank-reduced Gaussian.
    """
    if isinstance(model, MultiGaussian):
        return sum(gaussian_density(c, x) for c in model.components)
    xv = np.asarray(x, dtype=float).reshape(3)
    N = model.n_qubits
    vals, vecs = eigen3(model.dispersion)
    tr = float(np.trace(model.dispersion))
    thresh = ZERO_EIGEN_REL * max(tr, 1e-300)
    if vals[-1] < -thresh:
        raise ValueError(f"dispersion matrix not positive semidefinite: {vals}")
    dx = xv - model.center
    quad = 0.0
    log_norm = (N + 1) * math.log(2.0)
    q_dims = 0
    for i in range(3):
        proj = float(vecs[:, i] @ dx)
        if vals[i] < thresh:
            if abs(proj) > 1e-9:
                return 0.0
            continue
        q_dims += 1
        quad += proj * proj / vals[i]
        log_norm -= 0.5 * math.log(vals[i])
    log_norm -= 0.5 * q_dims * math.log(math.pi * N)
    return model.weight * math.exp(log_norm - N * quad)


def ghz_two_gaussian(n_qubits: int) -> MultiGaussian:
    """Two equally weighted lobes of the GHZ projection.

    Lobe s sits at z = (1 - s/sqrt(3))/2 (the cloud of the all-0 or all-1
    register) and carries the dispersion of that basis-state cloud.
    """
    comps = []
    for s in (+1.0, -1.0):
        center = np.array([0.5, 0.5, 0.5 * (1.0 - s / SQRT3)])
        t = np.array([
            [3.0, s * SQRT3, 0.0],
            [s * SQRT3, 3.0, 0.0],
            [0.0, 0.0, 2.0],
        ]) / 6.0
        comps.append(GaussianModel(n_qubits, center, t, weight=0.5))
    return MultiGaussian(comps)


def w_fine_structure(n_qubits: int) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Envelope center and the two narrow maxima of the W-state projection.

    The maxima sit at x,y = 1/2 +- (sqrt(3)-1)/(2 sqrt(N)) with z = 2-sqrt(3),
    so their separation shrinks like N^(-1/2) inside a fixed envelope.
    """
    if n_qubits < 4:
        raise ValueError("fine structure needs N >= 4")
    center = np.array([0.5, 0.5, 0.5 * (1.0 - 1.0 / SQRT3)])
    d = (SQRT3 - 1.0) / (2.0 * math.sqrt(n_qubits))
    zc = 2.0 - SQRT3
    x_plus = np.array([0.5 + d, 0.5 - d, zc])
    x_minus = np.array([0.5 - d, 0.5 + d, zc])
    return center, (x_plus, x_minus)


# ---------------------------------------------------------------------------
# peaks
# ---------------------------------------------------------------------------


@dataclass
class Peak:
    triple: tuple[int, int, int]
    log_value: float
    value: float
    position: np.ndarray  # scaled (x, y, z)


def find_peaks(pq: ProjectedQ) -> list[Peak]:
    """Lattice local maxima under the Chebyshev-2 neighborhood of valid triples.

    Equal-valued plateaus report one canonical point, the lexicographic
    minimum.  Result is sorted by value descending, ties broken by triple.
    """
    N = pq.n_qubits
    table: dict[tuple[int, int, int], float] = {
        (int(m), int(n), int(k)): float(lv)
        for (m, n, k), lv in zip(pq.triples, pq.log_values)
    }

    def neighbors(t):
        m, n, k = t
        for dm in range(-2, 3):
            for dn in range(-2, 3):
                for dk in range(-2, 3):
                    if dm == dn == dk == 0:
                        continue
                    cand = (m + dm, n + dn, k + dk)
                    if cand in table:
                        yield cand

    candidates = set()
    for t, v in table.items():
        if not math.isfinite(v):
            continue
        if all(v >= table[u] for u in neighbors(t)):
            candidates.add(t)

    peaks = []
    seen: set[tuple[int, int, int]] = set()
    for t in sorted(candidates):
        if t in seen:
            continue
        # flood-fill the equal-valued plateau among candidate points
        group = [t]
        stack = [t]
        seen.add(t)
        while stack:
            cur = stack.pop()
            for u in neighbors(cur):
                if u in candidates and u not in seen and table[u] == table[t]:
                    seen.add(u)
                    stack.append(u)
                    group.append(u)
        canon = min(group)
        m, n, k = canon
        logv = table[canon]
        peaks.append(Peak(canon, logv, math.exp(logv),
                          np.array([m / N, k / N, n / N])))
    peaks.sort(key=lambda p: (-p.log_value, p.triple))
    return peaks


# ---------------------------------------------------------------------------
# localization
# ---------------------------------------------------------------------------


@dataclass
class LocalizationReport:
    family: str
    params: dict
    n_values: list[int]
    eigenvalues: np.ndarray          # (len(n_values), 3), sorted descending per N
    trace_t: list[float]
    fit_exponents: list[float]       # least-squares slope of log lambda vs log N
    exponents: list[float]           # extrapolated terminal slope used for verdicts
    epsilon: float
    verdicts: list[str] = field(init=False)
    localized: bool = field(init=False)

    def __post_init__(self) -> None:
        self.verdicts = [
            "delocalized" if e >= 1.0 - self.epsilon else "localized"
            for e in self.exponents
        ]
        self.localized = all(v == "localized" for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": self.params,
            "n_values": list(self.n_values),
            "eigenvalues": np.asarray(self.eigenvalues).tolist(),
            "trace_t": list(self.trace_t),
            "fit_exponents": list(self.fit_exponents),
            "exponents": list(self.exponents),
            "epsilon": self.epsilon,
            "verdicts": list(self.verdicts),
            "localized": self.localized,
            "exponent_method": "least-squares fit recorded; verdicts use the "
                               "Richardson-extrapolated terminal log-log slope",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _terminal_slope(log_n: np.ndarray, log_lam: np.ndarray) -> float:
    """Asymptotic log-log slope: Richardson extrapolation of the last two
    local slopes, which cancels the O(1/N) bias that a plain fit keeps."""
    slopes = np.diff(log_lam) / np.diff(log_n)
    if slopes.size >= 2:
        return float(2.0 * slopes[-1] - slopes[-2])
    return float(slopes[-1])


def classify_localization(family: str, n_values, params: dict | None = None,
                          epsilon: float = DELOCALIZED_EPSILON) -> LocalizationReport:
    """Fit the N-scaling of the dispersion eigenvalues over an N sweep.

    A principal direction is delocalized when its eigenvalue grows like
    N^p with p >= 1 - epsilon; the state is localized when no direction is.
    """
    n_values = sorted(int(n) for n in n_values)
    if len(n_values) < 4:
        raise ValueError("need a sweep of at least 4 values of N")
    params = dict(params or {})
    lams = np.zeros((len(n_values), 3))
    traces = []
    for i, n in enumerate(n_values):
        spec = StateSpec(family, n, params)
        model = t_matrix(closed_moment_summary(spec))
        vals, _ = eigen3(model.dispersion)
        lams[i] = vals
        traces.append(float(np.trace(model.dispersion)))
    log_n = np.log(np.asarray(n_values, dtype=float))
    fit_exp, term_exp = [], []
    for j in range(3):
        lam_j = np.maximum(lams[:, j], 1e-300)
        log_lam = np.log(lam_j)
        fit_exp.append(float(np.polyfit(log_n, log_lam, 1)[0]))
        term_exp.append(_terminal_slope(log_n, log_lam))
    return LocalizationReport(family, params, n_values, lams, traces,
                              fit_exp, term_exp, epsilon)


def model_from_spec(spec: StateSpec, method: str = "auto") -> GaussianModel:
    """Single-Gaussian model of a family: exact moments -> T matrix."""
    return t_matrix(moment_summary(spec, method=method))
