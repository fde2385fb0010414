"""Projection of Q-functions onto the (m, n, k) weight lattice and lattice averages."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitstring import weight_table
from .combinat import (
    EXACT_FACTOR_MAX_N,
    MeasLattice,
    is_valid_triple,
    r_mnk,
    r_mnk_exact,
    r_mnk_log_arrays,
    representative,
    triple_parts,
)
from .phase_space import MAX_GRID_QUBITS, PhasePoint, dcs_vector, iter_q_blocks
from .states import (
    MixedEnsemble,
    StateSpec,
    StateVector,
    UnsupportedFamily,
    analytic_projected_log,
    build_state,
    has_analytic_projection,
    is_symmetric_spec,
)

__all__ = [
    "MeasLattice", "ProjectedQ", "NotPermutationSymmetric",
    "r_mnk", "r_mnk_exact", "representative", "is_valid_triple", "triple_parts",
    "project_symmetric", "project_bruteforce", "expectation_from_projection",
    "write_pointcloud_xyz", "write_projection_csv", "EXACT_FACTOR_MAX_N",
]


class NotPermutationSymmetric(ValueError):
    """project_symmetric needs a permutation-symmetric family; use project_bruteforce."""


def _encode(n_qubits: int, m, n, k):
    base = n_qubits + 1
    return (np.asarray(m) * base + np.asarray(n)) * base + np.asarray(k)


@dataclass
class ProjectedQ:
    """Projected density on the weight lattice, stored as log values.

    Valid triples only; exact zeros are kept as -inf.  Iteration order is
    lexicographic in (m, n, k) which makes every downstream reduction and
    export deterministic.
    """

    n_qubits: int
    triples: np.ndarray
    log_values: np.ndarray
    source: str
    state_label: str

    def __post_init__(self) -> None:
        self.triples = np.asarray(self.triples, dtype=np.int64)
        self.log_values = np.asarray(self.log_values, dtype=float)
        self._index = _encode(self.n_qubits, *self.triples.T)

    def __len__(self) -> int:
        return len(self.log_values)

    def log_value(self, m: int, n: int, k: int) -> float:
        code = _encode(self.n_qubits, m, n, k)
        pos = np.searchsorted(self._index, code)
        if pos >= len(self._index) or self._index[pos] != code:
            raise KeyError(f"({m},{n},{k}) not on the lattice")
        return float(self.log_values[pos])

    def value(self, m: int, n: int, k: int) -> float:
        return math.exp(self.log_value(m, n, k))

    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    def total_log(self) -> float:
        finite = self.log_values[np.isfinite(self.log_values)]
        if finite.size == 0:
            return float("-inf")
        top = float(finite.max())
        return top + math.log(float(np.sum(np.exp(finite - top))))

    def normalization(self) -> float:
        """Total mass divided by 2^N; 1 for a trace-one state."""
        return math.exp(self.total_log() - self.n_qubits * math.log(2.0))

    def scaled_positions(self) -> np.ndarray:
        """Measurement-space coordinates (x, y, z) = (m, k, n) / N."""
        m, n, k = self.triples.T
        return np.stack([m, k, n], axis=1) / float(self.n_qubits)


def project_bruteforce(state, n_qubits: int | None = None,
                       max_qubits: int = MAX_GRID_QUBITS,
                       label: str = "") -> ProjectedQ:
    """Exact projection by streaming the brute-force grid into weight bins."""
    if isinstance(state, (StateVector, MixedEnsemble)):
        n_qubits = state.n_qubits
    if n_qubits is None:
        raise ValueError("n_qubits required for raw amplitude input")
    if n_qubits > max_qubits:
        raise ValueError(f"brute-force projection limited to {max_qubits} qubits")
    N = n_qubits
    dim = 1 << N
    pc = weight_table(N)
    alpha_idx = np.arange(dim, dtype=np.int64)
    m_of_alpha = pc[alpha_idx]
    dense = np.zeros((N + 1, N + 1, N + 1))
    for start, blk in iter_q_blocks(state, N):
        for b_local in range(blk.shape[0]):
            beta = start + b_local
            flat = m_of_alpha * (N + 1) + pc[alpha_idx ^ beta]
            binned = np.bincount(flat, weights=blk[b_local],
                                 minlength=(N + 1) * (N + 1))
            dense[:, pc[beta], :] += binned.reshape(N + 1, N + 1)
    lattice = MeasLattice(N)
    m, n, k = lattice.arrays()
    with np.errstate(divide="ignore"):
        logs = np.log(dense[m, n, k])
    return ProjectedQ(N, np.stack([m, n, k], axis=1), logs,
                      source="bruteforce", state_label=label)


def _representative_logs(spec: StateSpec, lattice: MeasLattice,
                         dense_max: int) -> np.ndarray:
    if spec.n > dense_max:
        raise ValueError(
            f"representative evaluation of {spec.family!r} needs N <= {dense_max}")
    state = build_state(spec)
    comps = state.components if isinstance(state, MixedEnsemble) \
        else [(1.0, state)]
    m, n, k = lattice.arrays()
    log_r = r_mnk_log_arrays(spec.n, m, n, k)
    logs = np.empty(len(lattice))
    for i, (mm, nn, kk) in enumerate(lattice):
        alpha, beta = representative(mm, nn, kk, spec.n)
        rep = dcs_vector(PhasePoint(alpha, beta))
        q = 0.0
        for w, vec in comps:
            q += w * abs(np.vdot(rep, vec.amplitudes)) ** 2
        logs[i] = math.log(q) if q > 0.0 else float("-inf")
    return logs + log_r


def project_symmetric(spec: StateSpec, dense_max: int = MAX_GRID_QUBITS) -> ProjectedQ:
    """Projected density of a permutation-symmetric family, one point per triple.

    Uses the closed form when one exists, otherwise evaluates the state
    against a single representative coherent state per weight class.
    """
    if not is_symmetric_spec(spec):
        raise NotPermutationSymmetric(
            f"{spec.label()} is not permutation symmetric; use project_bruteforce")
    lattice = MeasLattice(spec.n)
    m, n, k = lattice.arrays()
    if has_analytic_projection(spec):
        logs = analytic_projected_log(spec, m, n, k)
    else:
        logs = _representative_logs(spec, lattice, dense_max)
    return ProjectedQ(spec.n, np.stack([m, n, k], axis=1), logs,
                      source="analytic", state_label=spec.label())


def project_analytic(spec: StateSpec, label: str | None = None) -> ProjectedQ:
    """Projected density from the family's closed form (symmetric or not)."""
    if not has_analytic_projection(spec):
        raise UnsupportedFamily(f"no closed-form projection for {spec.family!r}")
    lattice = MeasLattice(spec.n)
    m, n, k = lattice.arrays()
    logs = analytic_projected_log(spec, m, n, k)
    return ProjectedQ(spec.n, np.stack([m, n, k], axis=1), logs,
                      source="analytic",
                      state_label=label if label is not None else spec.label())


def expectation_from_projection(pq: ProjectedQ, symbol) -> float:
    """Lattice average sum_(m,n,k) P(m,n,k) * Qtilde(m,n,k).

    `symbol` maps a triple to the P-symbol value of the observable (including
    its 2^-N normalisation).  The sum is rescaled internally so that large-N
    log-domain densities do not overflow.
    """
    finite = np.isfinite(pq.log_values)
    if not np.any(finite):
        return 0.0
    top = float(pq.log_values[finite].max())
    acc = 0.0
    for (m, n, k), logv in zip(pq.triples, pq.log_values):
        if not np.isfinite(logv):
            continue
        acc += symbol(int(m), int(n), int(k)) * math.exp(logv - top)
    return acc * math.exp(top)


def write_pointcloud_xyz(pq: ProjectedQ, path) -> None:
    """Plain point cloud rows "x y z value" in scaled coordinates."""
    N = pq.n_qubits
    with open(path, "w") as fh:
        for (m, n, k), logv in zip(pq.triples, pq.log_values):
            val = math.exp(logv) if np.isfinite(logv) else 0.0
            fh.write(f"{m / N:.17g} {k / N:.17g} {n / N:.17g} {val:.17g}\n")


def write_projection_csv(pq: ProjectedQ, path, log_values: bool = False) -> None:
    """Raw lattice export "m,n,k,value" (or log value) with 17 significant digits."""
    with open(path, "w") as fh:
        fh.write("m,n,k,log_value\n" if log_values else "m,n,k,value\n")
        for (m, n, k), logv in zip(pq.triples, pq.log_values):
            if log_values:
                fh.write(f"{m},{n},{k},{logv:.17g}\n")
            else:
                val = math.exp(logv) if np.isfinite(logv) else 0.0
                fh.write(f"{m},{n},{k},{val:.17g}\n")
