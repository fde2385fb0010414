"""Weight-triple lattice of the measurement space and the shell-count factor R_mnk."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .bitstring import BitString

EXACT_FACTOR_MAX_N = 20  # integer factorials stay exact and cheap up to here

NEG_INF = float("-inf")


def is_valid_triple(n_qubits: int, m: int, n: int, k: int) -> bool:
    """True when (m, n, k) = (h(alpha), h(beta), h(alpha+beta)) is realisable."""
    if not (0 <= m <= n_qubits and 0 <= n <= n_qubits and 0 <= k <= n_qubits):
        return False
    if (m + n + k) % 2:
        return False
    return abs(m - n) <= k <= min(m + n, 2 * n_qubits - m - n)


def triple_parts(m: int, n: int, k: int, n_qubits: int) -> tuple[int, int, int, int]:
    """Site-class sizes (both, alpha-only, beta-only, neither) of a triple."""
    t = (m + n - k) // 2
    a = (m - n + k) // 2
    b = (n - m + k) // 2
    z = n_qubits - (m + n + k) // 2
    return t, a, b, z


@dataclass
class MeasLattice:
    """All valid weight triples for N qubits, in lexicographic (m, n, k) order."""

    n_qubits: int
    triples: list[tuple[int, int, int]] = field(init=False)

    def __post_init__(self) -> None:
        N = self.n_qubits
        out = []
        for m in range(N + 1):
            for n in range(N + 1):
                k_min = abs(m - n)
                k_max = min(m + n, 2 * N - m - n)
                for k in range(k_min, k_max + 1, 2):
                    out.append((m, n, k))
        self.triples = out

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(self.triples)

    def __contains__(self, triple) -> bool:
        m, n, k = triple
        return is_valid_triple(self.n_qubits, m, n, k)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        arr = np.asarray(self.triples, dtype=np.int64)
        return arr[:, 0], arr[:, 1], arr[:, 2]


def r_mnk_exact(n_qubits: int, m: int, n: int, k: int) -> int:
    """Number of phase-space points with the given weight triple, exactly.

    N! / (t! a! b! z!) over the four site classes; zero for invalid triples.
    """
    if not is_valid_triple(n_qubits, m, n, k):
        return 0
    t, a, b, z = triple_parts(m, n, k, n_qubits)
    return math.comb(n_qubits, t) * math.comb(n_qubits - t, a) \
        * math.comb(n_qubits - t - a, b)


def r_mnk(n_qubits: int, m: int, n: int, k: int) -> float:
    """log R_mnk; exact-integer route for small N, log-gamma beyond."""
    if not is_valid_triple(n_qubits, m, n, k):
        return NEG_INF
    if n_qubits <= EXACT_FACTOR_MAX_N:
        return math.log(r_mnk_exact(n_qubits, m, n, k))
    t, a, b, z = triple_parts(m, n, k, n_qubits)
    return float(
        gammaln(n_qubits + 1)
        - gammaln(t + 1) - gammaln(a + 1) - gammaln(b + 1) - gammaln(z + 1)
    )


def r_mnk_log_arrays(n_qubits: int, m: np.ndarray, n: np.ndarray,
                     k: np.ndarray) -> np.ndarray:
    """Vectorised log R_mnk over arrays of valid triples."""
    m = np.asarray(m, dtype=np.int64)
    n = np.asarray(n, dtype=np.int64)
    k = np.asarray(k, dtype=np.int64)
    t = (m + n - k) // 2
    a = (m - n + k) // 2
    b = (n - m + k) // 2
    z = n_qubits - (m + n + k) // 2
    return (
        gammaln(n_qubits + 1)
        - gammaln(t + 1) - gammaln(a + 1) - gammaln(b + 1) - gammaln(z + 1)
    )


def representative(m: int, n: int, k: int, n_qubits: int) -> tuple[BitString, BitString]:
    """Canonical (alpha, beta) with weights (m, n, k).

    alpha occupies qubits 1..m; beta occupies qubits m-t+1..m-t+n, which
    overlaps alpha on exactly t = (m+n-k)/2 positions.
    """
    if not is_valid_triple(n_qubits, m, n, k):
        raise ValueError(f"({m},{n},{k}) invalid for N={n_qubits}")
    t = (m + n - k) // 2
    alpha_bits = ["1"] * m + ["0"] * (n_qubits - m)
    beta_bits = ["0"] * n_qubits
    for pos in range(m - t + 1, m - t + n + 1):
        beta_bits[pos - 1] = "1"
    return (
        BitString.from_text("".join(alpha_bits)),
        BitString.from_text("".join(beta_bits)),
    )
