"""Discrete coherent states, Q/P symbols, the brute-force Q-function and the mapping kernel.

The fiducial single-qubit state has Bloch vector (1,1,1)/sqrt(3); the set of
its displacements Z_alpha X_beta forms an informationally complete POVM whose
overlaps have a closed product form used throughout this module.
"""

from __future__ import annotations

import cmath
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bitstring import BitString, walsh_hadamard, weight_table

SQRT3 = math.sqrt(3.0)

# Single-qubit fiducial populations: cos^2(theta/2), sin^2(theta/2) with
# theta = arctan(sqrt 2), phi = pi/4.
COS2_HALF = (3.0 + SQRT3) / 6.0
SIN2_HALF = (3.0 - SQRT3) / 6.0
# Excited/ground population ratio tan^2(theta/2) = 2 - sqrt(3).
POP_RATIO = 2.0 - SQRT3

PHI = math.pi / 4.0
AMP0 = math.sqrt(COS2_HALF) * cmath.exp(-1j * PHI / 2)
AMP1 = math.sqrt(SIN2_HALF) * cmath.exp(1j * PHI / 2)

MAX_DENSE_QUBITS = 14
MAX_GRID_QUBITS = 12
MAX_KERNEL_QUBITS = 5


@dataclass(frozen=True)
class PhasePoint:
    """A point (alpha, beta) of the 2^N x 2^N discrete phase space."""

    alpha: BitString
    beta: BitString

    def __post_init__(self) -> None:
        if self.alpha.n != self.beta.n:
            raise ValueError("alpha and beta must have equal lengths")

    @property
    def n(self) -> int:
        return self.alpha.n


@dataclass
class QGrid:
    """Dense Q-function over the full phase space, values[alpha, beta]."""

    n_qubits: int
    values: np.ndarray

    def total(self) -> float:
        return float(self.values.sum())

    def value(self, point: PhasePoint) -> float:
        return float(self.values[point.alpha.bits, point.beta.bits])


def _amplitudes(state) -> np.ndarray:
    amps = getattr(state, "amplitudes", state)
    return np.asarray(amps, dtype=complex)


def _components(state):
    """Yield (weight, amplitude-vector) pairs for pure states or ensembles."""
    comps = getattr(state, "components", None)
    if comps is None:
        yield 1.0, _amplitudes(state)
    else:
        for w, vec in comps:
            yield float(w), _amplitudes(vec)


def fiducial_qubit() -> np.ndarray:
    return np.array([AMP0, AMP1], dtype=complex)


def fiducial_state(n_qubits: int) -> np.ndarray:
    """Product fiducial state on n qubits."""
    vec = np.array([1.0 + 0.0j])
    q = fiducial_qubit()
    for _ in range(n_qubits):
        vec = np.kron(vec, q)
    return vec


def fiducial_overlap(gamma: BitString, delta: BitString) -> complex:
    """<xi| Z_gamma X_delta |xi> in closed form.

    Equals 3^(-(h(g)+h(d)+h(g+d))/4) * i^((h(g)+h(d)-h(g+d))/2); the first
    exponent is half the weight of (g OR d), the power of i counts positions
    where both strings are set.
    """
    if gamma.n != delta.n:
        raise ValueError("gamma and delta must have equal lengths")
    support = (gamma.bits | delta.bits).bit_count()
    both = (gamma.bits & delta.bits).bit_count()
    return (1j**both) * 3.0 ** (-0.5 * support)


def dcs_vector(point: PhasePoint) -> np.ndarray:
    """Dense statevector of the discrete coherent state Z_alpha X_beta |xi>.

    The free global phase of the displacement is fixed to zero.
    """
    n = point.n
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense coherent state limited to {MAX_DENSE_QUBITS} qubits")
    vec = np.array([1.0 + 0.0j])
    for j in range(1, n + 1):
        q = fiducial_qubit()
        if point.beta.bit(j):
            q = q[::-1].copy()
        if point.alpha.bit(j):
            q = q * np.array([1.0, -1.0])
        vec = np.kron(vec, q)
    return vec


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SYMQ_THREADS", "1")))
    except ValueError:
        return 1


def _q_block(xi: np.ndarray, psi: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """Q values for a block of betas: out[b, alpha] = |<alpha,beta_b|psi>|^2."""
    kappa = np.arange(xi.size, dtype=np.int64)
    idx = betas[:, None] ^ kappa[None, :]
    g = np.conj(xi[idx]) * psi[None, :]
    amp = walsh_hadamard(g)
    return np.abs(amp) ** 2


def iter_q_blocks(state, n_qubits: int, block: int = 256):
    """Yield (beta_start, values[b, alpha]) blocks of the brute-force Q-function.

    Per beta the overlap against all alpha is a single sign transform of
    conj(xi[kappa ^ beta]) * psi[kappa], which is what makes the full grid
    O(N 4^N) instead of O(8^N).
    """
    dim = 1 << n_qubits
    xi = fiducial_state(n_qubits)
    comps = list(_components(state))
    for w, vec in comps:
        if vec.size != dim:
            raise ValueError("state dimension does not match n_qubits")

    starts = list(range(0, dim, block))

    def compute(start: int) -> np.ndarray:
        betas = np.arange(start, min(start + block, dim), dtype=np.int64)
        out = np.zeros((betas.size, dim))
        for w, vec in comps:
            out += w * _q_block(xi, vec, betas)
        return out

    workers = _worker_count()
    if workers == 1 or len(starts) == 1:
        for start in starts:
            yield start, compute(start)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # keep submission and consumption in deterministic start order
            futures = [pool.submit(compute, s) for s in starts]
            for start, fut in zip(starts, futures):
                yield start, fut.result()


def q_grid_bruteforce(state, n_qubits: int | None = None,
                      max_qubits: int = MAX_GRID_QUBITS) -> QGrid:
    """Dense Q-function grid of a pure state or mixed ensemble."""
    if n_qubits is None:
        first = next(_components(state))[1]
        n_qubits = first.size.bit_length() - 1
    if n_qubits > max_qubits:
        raise ValueError(f"brute-force grid limited to {max_qubits} qubits")
    dim = 1 << n_qubits
    values = np.zeros((dim, dim))
    for start, blk in iter_q_blocks(state, n_qubits):
        values[:, start:start + blk.shape[0]] = blk.T
    return QGrid(n_qubits=n_qubits, values=values)


def kernel_delta(point: PhasePoint, s: int,
                 max_qubits: int = MAX_KERNEL_QUBITS) -> np.ndarray:
    """Dense mapping kernel Delta^(s)(alpha, beta) for s in {-1, 0, 1}.

    trace[f Delta^(-1)] gives the Q-symbol of f, trace[f Delta^(+1)] the
    P-symbol.  Validation-grade only: cost is O(4^N) terms of 2^N entries.
    """
    if s not in (-1, 0, 1):
        raise ValueError("s must be -1, 0 or 1")
    n = point.n
    if n > max_qubits:
        raise ValueError(f"kernel construction limited to {max_qubits} qubits")
    if s == 0:
        warnings.warn(
            "s=0 kernel phase is not uniquely defined; using i^(gamma.delta)",
            stacklevel=2,
        )
    dim = 1 << n
    pref = 2.0 ** (-n * (s + 3) / 2)
    pc = weight_table(n)
    rows_base = np.arange(dim, dtype=np.int64)
    cols = np.arange(dim, dtype=np.int64)
    out = np.zeros((dim, dim), dtype=complex)
    a_bits, b_bits = point.alpha.bits, point.beta.bits
    for g in range(dim):
        for d in range(dim):
            ov = fiducial_overlap(BitString(n, g), BitString(n, d))
            if s == 1:
                if abs(ov) < 1e-300:
                    raise ArithmeticError("vanishing fiducial overlap")
                coeff = 1.0 / ov
            elif s == -1:
                coeff = ov * (-1.0) ** (pc[g & d] & 1)
            else:
                coeff = ov * (1j ** int(pc[g & d] & 1))
            coeff *= pref * (-1.0) ** ((pc[a_bits & d] + pc[b_bits & g]) & 1)
            rows = rows_base ^ d
            signs = 1.0 - 2.0 * (pc[g & rows] & 1)
            out[rows, cols] += coeff * signs
    return out


def _valid_exponents(m: int, n: int, k: int, n_qubits: int) -> tuple[int, int, int, int]:
    e1 = 2 * n_qubits - (m + n + k)
    e2 = m - n + k
    e3 = -m + n + k
    e4 = m + n - k
    if any(e < 0 or e % 2 for e in (e1, e2, e3, e4)):
        raise ValueError(f"({m},{n},{k}) is not a valid weight triple for N={n_qubits}")
    return e1 // 2, e2 // 2, e3 // 2, e4 // 2


def _brackets(direction) -> tuple[tuple[float, float], ...]:
    nx, ny, nz = (float(c) for c in direction)
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError("direction must be a unit vector")
    # each bracket is c*sinh(lam) + s*sqrt(3)*cosh(lam), stored as (c, s)
    return (
        (nx + ny + nz, 1.0),
        (nx + ny - nz, -1.0),
        (nx - ny - nz, 1.0),
        (nx - ny + nz, -1.0),
    )


def q_symbol_exp_collective(lam: float, direction, m: int, n: int, k: int,
                            n_qubits: int) -> float:
    """Q-symbol of exp(lam * S.n) at a weight triple (m, n, k).

    Product of four bracket factors; written with sinh/cosh so lam -> 0 is
    regular (no coth singularity).
    """
    exps = _valid_exponents(m, n, k, n_qubits)
    sh, ch = math.sinh(lam), math.cosh(lam)
    sign = (-1.0) ** m
    log_abs = -0.5 * n_qubits * math.log(3.0)
    for (c, s), e in zip(_brackets(direction), exps):
        if e == 0:
            continue
        b = c * sh + s * SQRT3 * ch
        if b == 0.0:
            return 0.0
        if b < 0.0 and e % 2:
            sign = -sign
        log_abs += e * math.log(abs(b))
    return sign * math.exp(log_abs)


def _poly_mul(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    return np.convolve(a, b)[: order + 1]


def _poly_pow(base: np.ndarray, e: int, order: int) -> np.ndarray:
    out = np.zeros(order + 1)
    out[0] = 1.0
    acc = base[: order + 1].copy()
    while e:
        if e & 1:
            out = _poly_mul(out, acc, order)
        e >>= 1
        if e:
            acc = _poly_mul(acc, acc, order)
    return out


def q_symbol_exp_series(direction, m: int, n: int, k: int, n_qubits: int,
                        order: int = 4) -> np.ndarray:
    """Taylor coefficients in lam of the Q-symbol of exp(lam * S.n).

    Coefficient r times r! is the Q-symbol of (S.n)^r; done by polynomial
    expansion rather than finite differences to avoid cancellation.
    """
    exps = _valid_exponents(m, n, k, n_qubits)
    sh = np.array([0.0, 1.0, 0.0, 1 / 6, 0.0, 1 / 120, 0.0, 1 / 5040])[: order + 1]
    ch = np.array([1.0, 0.0, 0.5, 0.0, 1 / 24, 0.0, 1 / 720, 0.0])[: order + 1]
    total = np.zeros(order + 1)
    total[0] = (-1.0) ** m * 3.0 ** (-0.5 * n_qubits)
    for (c, s), e in zip(_brackets(direction), exps):
        base = c * sh + s * SQRT3 * ch
        total = _poly_mul(total, _poly_pow(base, e, order), order)
    return total


def p_symbol_collective(power: int, x: float, n_qubits: int, axis: str = "x") -> float:
    """P-symbol of S_axis^power as a function of the matching weight fraction.

    x is m/N for axis "x", k/N for "y", n/N for "z".  Powers 1..4 only; the
    returned value includes the 2^-N normalisation of the P-symbols.
    """
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    if power not in (1, 2, 3, 4):
        raise ValueError("power must be between 1 and 4")
    N = n_qubits
    e = N * (1.0 - 2.0 * x)
    if power == 1:
        val = SQRT3 * e
    elif power == 2:
        val = 3.0 * e * e - 2.0 * N
    elif power == 3:
        val = 3.0 * SQRT3 * e**3 - 2.0 * SQRT3 * (3.0 * N - 2.0) * e
    else:
        val = 9.0 * e**4 - (36.0 * N - 48.0) * e * e + 12.0 * N * N - 32.0 * N
    return val * 2.0 ** (-N)


def export_qgrid_csv(grid: QGrid, path) -> None:
    """Write the dense grid as rows "alpha,beta,value" with bitstring literals."""
    n, dim = grid.n_qubits, 1 << grid.n_qubits
    with open(path, "w") as fh:
        fh.write("alpha,beta,value\n")
        for a in range(dim):
            for b in range(dim):
                fh.write(f"{a:0{n}b},{b:0{n}b},{grid.values[a, b]:.17g}\n")
