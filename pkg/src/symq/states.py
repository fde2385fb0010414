"""State families as dense vectors (small N) and analytic projected-Q evaluators (large N)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .bitstring import BitString, weight_table
from .combinat import r_mnk_log_arrays
from .phase_space import (
    COS2_HALF,
    MAX_DENSE_QUBITS,
    POP_RATIO,
    PhasePoint,
    dcs_vector,
    fiducial_qubit,
)

LOG_L = math.log(POP_RATIO)        # log population ratio 2 - sqrt(3)
LOG_C2 = math.log(COS2_HALF)       # log cos^2(theta/2) = -log(1 + ratio)
LOG3 = math.log(3.0)
NORM_TOL = 1e-12

FAMILIES = (
    "dcs", "basis", "superposition_basis", "ghz", "shifted_ghz", "w",
    "biseparable_a", "graph_pairs", "uniform_mixed", "dicke_uniform", "custom",
)

# families whose projected distribution only depends on weight classes
SYMMETRIC_FAMILIES = ("ghz", "w", "uniform_mixed", "dicke_uniform", "dcs", "basis")


class UnsupportedFamily(ValueError):
    """No closed-form route for this state family; fall back to brute force."""


@dataclass
class StateVector:
    """Dense amplitude vector of a pure n-qubit state."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError("amplitude vector has wrong length")
        norm = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalised: |psi|^2 = {norm}")


@dataclass
class MixedEnsemble:
    """Weighted ensemble of pure states representing a mixed state."""

    n_qubits: int
    components: list[tuple[float, StateVector]]

    def __post_init__(self) -> None:
        if not self.components:
            raise ValueError("ensemble needs at least one component")
        total = sum(w for w, _ in self.components)
        if any(w <= 0 for w, _ in self.components):
            raise ValueError("ensemble weights must be positive")
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"ensemble weights sum to {total}, not 1")


@dataclass
class StateSpec:
    """Declarative description of a state family instance."""

    family: str
    n: int
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise UnsupportedFamily(f"unknown family {self.family!r}")
        if self.n < 1:
            raise ValueError("n must be positive")

    def bitstring_param(self, name: str, default_zero: bool = False) -> BitString:
        raw = self.params.get(name)
        if raw is None:
            if default_zero:
                return BitString.zeros(self.n)
            raise ValueError(f"family {self.family!r} needs parameter {name!r}")
        bs = BitString.from_text(str(raw))
        if bs.n != self.n:
            raise ValueError(f"parameter {name!r} must have length {self.n}")
        return bs

    def param_bits(self, name: str, default_zero: bool = False) -> list[int] | None:
        """Bit list of a 0/1 string parameter; works beyond the 64-bit cap."""
        raw = self.params.get(name)
        if raw is None:
            return [0] * self.n if default_zero else None
        text = str(raw)
        if len(text) != self.n or text.strip("01"):
            raise ValueError(f"parameter {name!r} must be a 0/1 string of length {self.n}")
        return [int(ch) for ch in text]

    def weight_param(self, name: str, default_frac: float | None = 0.0) -> int:
        """Hamming weight of a string-valued parameter.

        Large-N closed forms only need the weight, so `<name>_weight` and
        `<name>_frac` are accepted in place of an explicit string.
        """
        if name in self.params:
            return sum(self.param_bits(name))
        if f"{name}_weight" in self.params:
            h = int(self.params[f"{name}_weight"])
        elif f"{name}_frac" in self.params:
            h = int(round(float(self.params[f"{name}_frac"]) * self.n))
        elif default_frac is not None:
            h = int(round(default_frac * self.n))
        else:
            raise ValueError(f"family {self.family!r} needs parameter {name!r}")
        if not 0 <= h <= self.n:
            raise ValueError(f"weight of {name!r} out of range")
        return h

    def to_dict(self) -> dict:
        return {"family": self.family, "n": self.n, "params": dict(self.params)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "StateSpec":
        return cls(doc["family"], int(doc["n"]), dict(doc.get("params", {})))

    @classmethod
    def from_json(cls, text: str) -> "StateSpec":
        return cls.from_dict(json.loads(text))

    def label(self) -> str:
        if not self.params:
            return f"{self.family}(N={self.n})"
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family}({inner},N={self.n})"


def _kron_chain(factors) -> np.ndarray:
    vec = np.array([1.0 + 0.0j])
    for f in factors:
        vec = np.kron(vec, f)
    return vec


def _pair_state(pair_vec: np.ndarray, n_pairs: int) -> StateVector:
    pair_vec = pair_vec / np.linalg.norm(pair_vec)
    return StateVector(2 * n_pairs, _kron_chain([pair_vec] * n_pairs))


def _basis_vector(n: int, kappa: BitString) -> StateVector:
    amps = np.zeros(1 << n, dtype=complex)
    amps[kappa.bits] = 1.0
    return StateVector(n, amps)


def dicke_vector(n: int, excitations: int) -> StateVector:
    """Symmetric basis state with a fixed number of excited qubits."""
    if not 0 <= excitations <= n:
        raise ValueError("excitation count out of range")
    idx = np.nonzero(weight_table(n) == excitations)[0]
    amps = np.zeros(1 << n, dtype=complex)
    amps[idx] = 1.0 / math.sqrt(len(idx))
    return StateVector(n, amps)


def load_custom_amplitudes(path, n: int) -> StateVector:
    """Two-column (real, imag) text file of length 2^n, normalised on load."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape != (1 << n, 2):
        raise ValueError(f"custom state file must be {1 << n} rows of 're im'")
    amps = data[:, 0] + 1j * data[:, 1]
    norm = np.linalg.norm(amps)
    if norm < 1e-12:
        raise ValueError("custom state has zero norm")
    return StateVector(n, amps / norm)


def build_state(spec: StateSpec, max_qubits: int = MAX_DENSE_QUBITS):
    """Construct the dense StateVector or MixedEnsemble for a spec."""
    n = spec.n
    if n > max_qubits:
        raise ValueError(f"dense construction limited to {max_qubits} qubits")
    fam = spec.family
    if fam == "dcs":
        mu = spec.bitstring_param("mu", default_zero=True)
        nu = spec.bitstring_param("nu", default_zero=True)
        return StateVector(n, dcs_vector(PhasePoint(mu, nu)))
    if fam == "basis":
        return _basis_vector(n, spec.bitstring_param("kappa"))
    if fam == "superposition_basis":
        k1 = spec.bitstring_param("kappa1")
        k2 = spec.bitstring_param("kappa2")
        if k1 == k2:
            raise ValueError("superposition_basis needs two distinct strings")
        amps = np.zeros(1 << n, dtype=complex)
        amps[k1.bits] = amps[k2.bits] = 1.0 / math.sqrt(2.0)
        return StateVector(n, amps)
    if fam in ("ghz", "shifted_ghz"):
        if n < 2:
            raise ValueError("GHZ-type families need at least 2 qubits")
        nu = spec.bitstring_param("nu", default_zero=True) if fam == "shifted_ghz" \
            else BitString.zeros(n)
        amps = np.zeros(1 << n, dtype=complex)
        amps[nu.bits] = amps[nu.complement().bits] = 1.0 / math.sqrt(2.0)
        return StateVector(n, amps)
    if fam == "w":
        if n < 2:
            raise ValueError("w needs at least 2 qubits")
        amps = np.zeros(1 << n, dtype=complex)
        for j in range(n):
            amps[1 << j] = 1.0 / math.sqrt(n)
        return StateVector(n, amps)
    if fam in ("biseparable_a", "graph_pairs"):
        if n % 2:
            raise ValueError(f"{fam} needs an even number of qubits")
        if fam == "graph_pairs":
            pair = np.array([1.0, 1.0, 1.0, -1.0], dtype=complex) / 2.0
        else:
            a = float(spec.params.get("a", -1.0))
            pair = np.array([0.0, 1.0, a, 0.0], dtype=complex)
            if np.linalg.norm(pair) < 1e-12:
                raise ValueError("biseparable pair state has zero norm")
        return _pair_state(pair, n // 2)
    if fam == "uniform_mixed":
        w = 1.0 / (1 << n)
        comps = [(w, _basis_vector(n, BitString(n, i))) for i in range(1 << n)]
        return MixedEnsemble(n, comps)
    if fam == "dicke_uniform":
        w = 1.0 / (n + 1)
        return MixedEnsemble(n, [(w, dicke_vector(n, r)) for r in range(n + 1)])
    if fam == "custom":
        return load_custom_amplitudes(spec.params["path"], n)
    raise UnsupportedFamily(f"cannot build family {fam!r}")


def is_symmetric_spec(spec: StateSpec) -> bool:
    """Whether the projected distribution is a function of weight classes only."""
    if spec.family == "dcs":
        return spec.weight_param("mu") in (0, spec.n) \
            and spec.weight_param("nu") in (0, spec.n)
    return spec.family in ("ghz", "w", "uniform_mixed", "dicke_uniform", "basis")


# ---------------------------------------------------------------------------
# closed-form projected Q values (log domain, vectorised over triples)
# ---------------------------------------------------------------------------


def _log_binom(n, k):
    """Vectorised log C(n, k); -inf outside 0 <= k <= n."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    ok = (k >= 0) & (k <= n)
    kk = np.where(ok, k, 0.0)
    val = gammaln(n + 1) - gammaln(kk + 1) - gammaln(n - kk + 1)
    return np.where(ok, val, -np.inf)


def _ghz_bracket_log(m: np.ndarray, b: np.ndarray, n_qubits: int) -> np.ndarray:
    """log |xi^b + (-1)^m xi^(N-b)|^2 up to the common |xi| normalisation."""
    l1 = b * LOG_L
    l2 = (n_qubits - b) * LOG_L
    l3 = 0.5 * n_qubits * LOG_L
    top = np.maximum(l1, l2)
    sign = 1.0 - 2.0 * (np.asarray(m) % 2)
    cos = np.cos(0.25 * math.pi * (n_qubits - 2.0 * np.asarray(b, dtype=float)))
    bracket = np.exp(l1 - top) + np.exp(l2 - top) + 2.0 * sign * cos * np.exp(l3 - top)
    bracket = np.maximum(bracket, 0.0)
    with np.errstate(divide="ignore"):
        return top + np.log(bracket)


def _project_dcs_uniform(spec, m, n, k, log_r):
    h_mu, h_nu = spec.weight_param("mu"), spec.weight_param("nu")
    N = spec.n
    if h_mu not in (0, N) or h_nu not in (0, N):
        raise UnsupportedFamily("analytic dcs needs uniform displacement strings")
    me = N - m if h_mu == N else m
    ne = N - n if h_nu == N else n
    ke = N - k if h_mu != h_nu else k
    return log_r - 0.5 * LOG3 * (me + ne + ke)


def _project_ghz(spec, m, n, k, log_r):
    N = spec.n
    return log_r - math.log(2.0) + N * LOG_C2 + _ghz_bracket_log(m, n, N)


def _project_w(spec, m, n, k, log_r):
    N = spec.n
    radial = (N - m - k) ** 2 * POP_RATIO + (k - m) ** 2 / POP_RATIO
    with np.errstate(divide="ignore"):
        log_radial = np.log(radial.astype(float))
    return log_r + n * LOG_L + log_radial + N * LOG_C2 - math.log(N)


def _project_uniform(spec, m, n, k, log_r):
    return log_r - spec.n * math.log(2.0)


def _class_split_log(m, n, k, n_qubits):
    """log of the alpha-count C(n,t) C(N-n, m-t) shared by the sum formulas."""
    t = (m + n - k) // 2
    return _log_binom(n, t) + _log_binom(n_qubits - n, m - t)


def _project_basis(spec, m, n, k, log_r):
    N = spec.n
    g = spec.weight_param("kappa", default_frac=None)
    acc = np.full(np.shape(m), -np.inf, dtype=float)
    for j in range(0, g + 1):
        term = (
            _log_binom(g, j) + _log_binom(N - g, n - j)
            + (g + np.asarray(n) - 2.0 * j) * LOG_L
        )
        acc = np.logaddexp(acc, term)
    return _class_split_log(m, n, k, N) + N * LOG_C2 + acc


def _project_shifted_ghz(spec, m, n, k, log_r):
    N = spec.n
    h = spec.weight_param("nu")
    acc = np.full(np.shape(m), -np.inf, dtype=float)
    for j in range(0, h + 1):
        b = h + np.asarray(n) - 2 * j
        term = (
            _log_binom(h, j) + _log_binom(N - h, n - j)
            + _ghz_bracket_log(m, b, N)
        )
        acc = np.logaddexp(acc, term)
    return _class_split_log(m, n, k, N) + N * LOG_C2 - math.log(2.0) + acc


def pair_transfer_table(pair_vec: np.ndarray) -> np.ndarray:
    """Per-pair projected weights A[dm, dn, dk] of a two-qubit pure state."""
    pair_vec = np.asarray(pair_vec, dtype=complex)
    pair_vec = pair_vec / np.linalg.norm(pair_vec)
    table = np.zeros((3, 3, 3))
    pc = [0, 1, 1, 2]
    for a in range(4):
        for b in range(4):
            pt = PhasePoint(BitString(2, a), BitString(2, b))
            amp = np.vdot(dcs_vector(pt), pair_vec)
            table[pc[a], pc[b], pc[a ^ b]] += abs(amp) ** 2
    return table


def _pair_projected_dense(pair_vec: np.ndarray, n_pairs: int) -> np.ndarray:
    """Full projected distribution of a pair-product state by 3D convolution."""
    table = pair_transfer_table(pair_vec)
    size = 2 * n_pairs + 1
    cur = np.zeros((1, 1, 1))
    cur[0, 0, 0] = 1.0
    nz = [(i, j, l, table[i, j, l]) for i in range(3) for j in range(3)
          for l in range(3) if table[i, j, l] != 0.0]
    for _ in range(n_pairs):
        sm, sn, sk = cur.shape
        nxt = np.zeros((sm + 2, sn + 2, sk + 2))
        for i, j, l, val in nz:
            nxt[i:i + sm, j:j + sn, l:l + sk] += val * cur
        cur = nxt
    assert cur.shape == (size, size, size)
    return cur


def _project_pairs(spec, m, n, k, log_r):
    if spec.n % 2:
        raise ValueError(f"{spec.family} needs an even number of qubits")
    if spec.n > 128:
        raise UnsupportedFamily("pair-product convolution capped at 128 qubits")
    if spec.family == "graph_pairs":
        pair = np.array([1.0, 1.0, 1.0, -1.0]) / 2.0
    else:
        a = float(spec.params.get("a", -1.0))
        pair = np.array([0.0, 1.0, a, 0.0])
    dense = _pair_projected_dense(pair, spec.n // 2)
    with np.errstate(divide="ignore"):
        return np.log(dense[np.asarray(m), np.asarray(n), np.asarray(k)])


_ANALYTIC = {
    "dcs": _project_dcs_uniform,
    "basis": _project_basis,
    "ghz": _project_ghz,
    "shifted_ghz": _project_shifted_ghz,
    "w": _project_w,
    "uniform_mixed": _project_uniform,
    "biseparable_a": _project_pairs,
    "graph_pairs": _project_pairs,
}


def has_analytic_projection(spec: StateSpec) -> bool:
    if spec.family == "dcs":
        try:
            _ = _project_dcs_uniform(spec, np.array([0]), np.array([0]),
                                     np.array([0]), np.array([0.0]))
            return True
        except UnsupportedFamily:
            return False
    return spec.family in _ANALYTIC


def analytic_projected_log(spec: StateSpec, m, n, k) -> np.ndarray:
    """log of the projected density at valid triples, vectorised.

    Raises UnsupportedFamily when the family has no closed form; callers then
    fall back to the brute-force projection.
    """
    fn = _ANALYTIC.get(spec.family)
    if fn is None:
        raise UnsupportedFamily(f"no closed-form projection for {spec.family!r}")
    m = np.asarray(m, dtype=np.int64)
    n = np.asarray(n, dtype=np.int64)
    k = np.asarray(k, dtype=np.int64)
    log_r = r_mnk_log_arrays(spec.n, m, n, k)
    return fn(spec, m, n, k, log_r)


def analytic_projected_q(spec: StateSpec, m: int, n: int, k: int) -> float:
    """Projected density Q(m,n,k) * R_mnk for closed-form families."""
    from .combinat import is_valid_triple

    if not is_valid_triple(spec.n, m, n, k):
        raise ValueError(f"({m},{n},{k}) invalid for N={spec.n}")
    val = analytic_projected_log(
        spec, np.array([m]), np.array([n]), np.array([k])
    )[0]
    return float(np.exp(val))
