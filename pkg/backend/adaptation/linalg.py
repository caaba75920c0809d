"""
Matrix utilities for two-qubit blocks.
Builds block unitaries from gate lists, compares unitaries up to global
phase, synthesizes single-qubit u gates (ZYZ) and decomposes arbitrary
two-qubit unitaries into at most three CZ-type entanglers (KAK).
"""

import logging
import math
from collections.abc import Sequence
from typing import Literal

import numpy as np

from backend.adaptation.circuit_ir import Gate, gate_matrix

logger = logging.getLogger(__name__)

Entangler = Literal["cz", "cz_db"]
LocalPair = tuple[np.ndarray, np.ndarray]
Coefficients = tuple[float, float, float]

UNITARY_ATOL = 1e-9
KAK_ATOL = 1e-8
CLASSIFY_ATOL = 1e-10
IDENTITY_ATOL = 1e-12


class NonUnitaryError(ValueError):
    """Raised when a matrix that must be unitary is not."""


class ForeignQubitError(ValueError):
    """Raised when a gate touches a qubit outside the block."""


I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
SWAP4 = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
CZ4 = np.diag([1, 1, 1, -1]).astype(complex)

# Magic basis: E^dag (A kron B) E is real orthogonal for A, B in SU(2)
MAGIC = np.array(
    [[1, 1j, 0, 0], [0, 0, 1j, 1], [0, 0, 1j, -1], [1, -1j, 0, 0]], dtype=complex
) / math.sqrt(2)
MAGIC_DAG = MAGIC.conj().T


def is_unitary(m: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= atol)


def pauli_exp(pauli: np.ndarray, angle: float) -> np.ndarray:
    """exp(i·angle·P) for a Pauli (or Pauli product) P."""
    eye = np.eye(pauli.shape[0], dtype=complex)
    return math.cos(angle) * eye + 1j * math.sin(angle) * pauli


def interaction(x: float, y: float, z: float) -> np.ndarray:
    """exp(i(x·XX + y·YY + z·ZZ))."""
    return (
        pauli_exp(np.kron(X, X), x)
        @ pauli_exp(np.kron(Y, Y), y)
        @ pauli_exp(np.kron(Z, Z), z)
    )


def embed(g: Gate, qubits: Sequence[int]) -> np.ndarray:
    """Embeds a gate into the space of `qubits` (qubits[0] most significant)."""
    pos = {q: i for i, q in enumerate(qubits)}
    if any(q not in pos for q in g.qubits):
        raise ForeignQubitError(f"{g.name}{g.qubits} is not on qubits {tuple(qubits)}")
    m = gate_matrix(g)
    if len(qubits) == 1:
        return m
    if g.arity == 1:
        return np.kron(m, I2) if pos[g.qubits[0]] == 0 else np.kron(I2, m)
    if pos[g.qubits[0]] == 0:
        return m
    return SWAP4 @ m @ SWAP4


def block_unitary(
    gates: Sequence[Gate], qubits: Sequence[int] | None = None
) -> np.ndarray:
    """
    Product of embedded gate matrices in circuit order.
    When qubits is omitted the pair is taken from the first two-qubit gate
    (or the sorted qubits seen); an empty list yields the 4x4 identity.
    """
    if qubits is None:
        qubits = _infer_qubits(gates)
    dim = 2 ** len(qubits)
    out = np.eye(dim, dtype=complex)
    for g in gates:
        out = embed(g, qubits) @ out
    return out


def _infer_qubits(gates: Sequence[Gate]) -> tuple[int, ...]:
    for g in gates:
        if g.arity == 2:
            return g.qubits
    seen = sorted({q for g in gates for q in g.qubits})
    if len(seen) == 1:
        return (seen[0],)
    if len(seen) == 2:
        return tuple(seen)
    if not seen:
        return (0, 1)
    raise ForeignQubitError(f"gates span more than two qubits: {seen}")


def equal_up_to_global_phase(u: np.ndarray, v: np.ndarray, tol: float) -> bool:
    """
    True iff min over φ of ||u - e^{iφ} v||_max <= tol.
    The phase is fixed by aligning the largest-magnitude entry of v.
    """
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    idx = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[idx]) < 1e-300:
        return bool(np.max(np.abs(u)) <= tol)
    ratio = u[idx] / v[idx]
    if abs(ratio) == 0:
        return bool(np.max(np.abs(u - v)) <= tol)
    phase = ratio / abs(ratio)
    return bool(np.max(np.abs(u - phase * v)) <= tol)


def _wrap(angle: float) -> float:
    """Wraps an angle into (-π, π]."""
    wrapped = math.remainder(angle, 2 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def zyz_angles(u: np.ndarray) -> tuple[float, float, float, float]:
    """
    Returns (θ, φ, λ, α) with u = e^{iα}·u(θ, φ, λ).
    φ and λ are wrapped into (-π, π].
    """
    if u.shape != (2, 2) or not is_unitary(u):
        raise NonUnitaryError("zyz_angles needs a 2x2 unitary")
    a, b = abs(u[0, 0]), abs(u[1, 0])
    theta = 2 * math.atan2(b, a)
    if a >= b:
        alpha = float(np.angle(u[0, 0]))
        total = float(np.angle(u[1, 1])) - alpha
        phi = float(np.angle(u[1, 0])) - alpha
        lam = total - phi
    else:
        p = float(np.angle(u[1, 0]))
        q = float(np.angle(-u[0, 1]))
        r = float(np.angle(u[1, 1]))
        alpha = p + q - r
        phi = p - alpha
        lam = q - alpha
    return theta, _wrap(phi), _wrap(lam), _wrap(alpha)


def synthesize_u(m: np.ndarray, qubit: int) -> Gate | None:
    """Single u gate equal to m up to phase, or None when m is the identity."""
    if equal_up_to_global_phase(m, I2, IDENTITY_ATOL):
        return None
    theta, phi, lam, _ = zyz_angles(m)
    return Gate(name="u", qubits=(qubit,), params=(theta, phi, lam))


# --- KAK ---


def kron_factor_4x4_to_2x2s(
    matrix: np.ndarray, atol: float = KAK_ATOL
) -> tuple[complex, np.ndarray, np.ndarray]:
    """
    Splits matrix = g·kron(f1, f2) with unit-determinant f1, f2.
    Raises ArithmeticError when the matrix is not a tensor product.
    """
    a, b = max(
        ((i, j) for i in range(4) for j in range(4)), key=lambda t: abs(matrix[t])
    )
    f1 = np.zeros((2, 2), dtype=complex)
    f2 = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            f1[(a >> 1) ^ i, (b >> 1) ^ j] = matrix[a ^ (i << 1), b ^ (j << 1)]
            f2[(a & 1) ^ i, (b & 1) ^ j] = matrix[a ^ i, b ^ j]

    with np.errstate(divide="ignore", invalid="ignore"):
        f1 /= np.sqrt(np.linalg.det(f1)) or 1
        f2 /= np.sqrt(np.linalg.det(f2)) or 1

    g = matrix[a, b] / (f1[a >> 1, b >> 1] * f2[a & 1, b & 1])
    if np.real(g) < 0:
        f1 *= -1
        g = -g

    if not np.allclose(matrix, g * np.kron(f1, f2), atol=atol):
        raise ArithmeticError("matrix is not a 2x2 kronecker product")
    return complex(g), f1, f2


_FLIPPERS = (1j * X, 1j * Y, 1j * Z)
# swappers[k] exchanges the two axes other than k
_SWAPPERS = (
    np.array([[1, -1j], [1j, -1]], dtype=complex) * 1j * math.sqrt(0.5),
    np.array([[1, 1], [1, -1]], dtype=complex) * 1j * math.sqrt(0.5),
    np.array([[0, 1 - 1j], [1 + 1j, 0]], dtype=complex) * 1j * math.sqrt(0.5),
)


def canonicalize_interaction(
    x: float, y: float, z: float, atol: float = 1e-9
) -> tuple[complex, LocalPair, Coefficients, LocalPair]:
    """
    Moves (x, y, z) into the Weyl chamber π/4 >= x >= y >= |z|.

    Returns (phase, (l0, l1), (x', y', z'), (r0, r1)) such that
    interaction(x, y, z) = phase·kron(l0, l1)·interaction(x', y', z')·kron(r0, r1).
    """
    phase = [complex(1)]
    left = [I2.copy(), I2.copy()]
    right = [I2.copy(), I2.copy()]
    v = [x, y, z]

    # shifting a strength by π/2 multiplies by i·σσ
    def shift(k: int, step: int) -> None:
        v[k] += step * math.pi / 2
        phase[0] *= 1j**step
        flip = np.linalg.matrix_power(_FLIPPERS[k], step % 4)
        right[0] = flip @ right[0]
        right[1] = flip @ right[1]

    def negate(k1: int, k2: int) -> None:
        v[k1] *= -1
        v[k2] *= -1
        phase[0] *= -1
        s = _FLIPPERS[3 - k1 - k2]
        left[1] = left[1] @ s
        right[1] = s @ right[1]

    def swap(k1: int, k2: int) -> None:
        v[k1], v[k2] = v[k2], v[k1]
        s = _SWAPPERS[3 - k1 - k2]
        left[0] = left[0] @ s
        left[1] = left[1] @ s
        right[0] = s @ right[0]
        right[1] = s @ right[1]

    def canonical_shift(k: int) -> None:
        while v[k] <= -math.pi / 4:
            shift(k, +1)
        while v[k] > math.pi / 4:
            shift(k, -1)

    def sort() -> None:
        if abs(v[0]) < abs(v[1]):
            swap(0, 1)
        if abs(v[1]) < abs(v[2]):
            swap(1, 2)
        if abs(v[0]) < abs(v[1]):
            swap(0, 1)

    canonical_shift(0)
    canonical_shift(1)
    canonical_shift(2)
    sort()

    if v[0] < 0:
        negate(0, 2)
    if v[1] < 0:
        negate(1, 2)
    canonical_shift(2)

    if v[0] > math.pi / 4 - atol and v[2] < 0:
        shift(0, -1)
        negate(0, 2)

    return phase[0], (left[0], left[1]), (v[0], v[1], v[2]), (right[0], right[1])


def _diagonalizing_orthogonal(m2: np.ndarray) -> np.ndarray:
    """
    Real orthogonal P with P^T m2 P diagonal, for symmetric unitary m2.
    Re(m2) and Im(m2) commute, so a generic real combination shares their
    eigenvectors; the best of several seeded draws is kept.
    """
    rng = np.random.default_rng(0)
    best, best_err = None, math.inf
    for _ in range(100):
        a, b = rng.standard_normal(2)
        _, p = np.linalg.eigh(a * m2.real + b * m2.imag)
        d = p.T @ m2 @ p
        err = float(np.max(np.abs(d - np.diag(np.diag(d)))))
        if err < best_err:
            best, best_err = p, err
        if err < 1e-13:
            break
    if best is None or best_err > KAK_ATOL:
        raise ArithmeticError(f"failed to diagonalize in magic basis ({best_err:.2e})")
    return best


def weyl_decompose(
    u: np.ndarray,
) -> tuple[LocalPair, Coefficients, LocalPair]:
    """
    Returns ((a0, a1), (x, y, z), (b0, b1)) with
    u ∝ kron(a0, a1)·interaction(x, y, z)·kron(b0, b1)
    and (x, y, z) canonical (π/4 >= x >= y >= |z|).
    """
    if u.shape != (4, 4) or not is_unitary(u):
        raise NonUnitaryError("KAK decomposition needs a 4x4 unitary")
    us = u / np.linalg.det(u) ** 0.25
    up = MAGIC_DAG @ us @ MAGIC
    m2 = up.T @ up
    p = _diagonalizing_orthogonal(m2)
    if np.linalg.det(p) < 0:
        p[:, -1] *= -1
    d = np.angle(np.diag(p.T @ m2 @ p)) / 2
    d[3] = -(d[0] + d[1] + d[2])
    o1 = up @ p @ np.diag(np.exp(-1j * d))

    k1 = MAGIC @ o1 @ MAGIC_DAG
    k2 = MAGIC @ p.T @ MAGIC_DAG
    _, a0, a1 = kron_factor_4x4_to_2x2s(k1)
    _, b0, b1 = kron_factor_4x4_to_2x2s(k2)

    x = (d[0] + d[2]) / 2
    y = (d[1] + d[2]) / 2
    z = (d[0] + d[1]) / 2
    _, (l0, l1), coeffs, (r0, r1) = canonicalize_interaction(x, y, z)
    return (a0 @ l0, a1 @ l1), coeffs, (r0 @ b0, r1 @ b1)


def _core_layers(x: float, y: float, z: float, count: int) -> list[LocalPair]:
    """
    Single-qubit layers (q0, q1) in time order such that interleaving them
    with CZ gives interaction(x, y, z) up to phase.
    """
    if count == 0:
        return [(I2, I2)]
    if count == 1:
        # exp(iπ/4 XX) ∝ (H⊗H)(e^{iπ/4 Z}⊗e^{iπ/4 Z}) CZ (H⊗H)
        s = pauli_exp(Z, math.pi / 4)
        return [(H, H), (H @ s, H @ s)]
    if count == 2:
        # YY -> ZZ under e^{iπ/4 X}; exp(i(aXX + bZZ)) = CX (e^{iaX}⊗e^{ibZ}) CX
        q = pauli_exp(X, math.pi / 4)
        qd = q.conj().T
        return [
            (q, H @ q),
            (pauli_exp(X, x), H @ pauli_exp(Z, y) @ H),
            (qd, qd @ H),
        ]
    r = pauli_exp(Z, -math.pi / 4)
    rd = r.conj().T
    return [
        (rd, H @ rd @ H),
        (pauli_exp(X, -y), H @ pauli_exp(Z, math.pi / 4) @ H),
        (
            pauli_exp(X, x) @ pauli_exp(Z, -math.pi / 4) @ r,
            H @ pauli_exp(Z, z) @ pauli_exp(X, -math.pi / 4) @ H @ r @ H,
        ),
        (I2, H),
    ]


def entangler_count(coeffs: Coefficients) -> int:
    """Number of CZ-type gates needed for canonical interaction coefficients."""
    x, y, z = coeffs
    if abs(x) <= CLASSIFY_ATOL:
        return 0
    if abs(x - math.pi / 4) <= CLASSIFY_ATOL and abs(y) <= CLASSIFY_ATOL and abs(z) <= CLASSIFY_ATOL:
        return 1
    if abs(z) <= CLASSIFY_ATOL:
        return 2
    return 3


def kak_decompose(
    u: np.ndarray, two_qubit_name: Entangler = "cz", qubits: tuple[int, int] = (0, 1)
) -> list[Gate]:
    """
    Decomposes a 4x4 unitary into u gates and at most three entanglers.
    Layers alternate single-qubit / entangler; identity u gates are dropped.
    """
    if two_qubit_name not in ("cz", "cz_db"):
        raise ValueError(f"unsupported entangler {two_qubit_name!r}")
    (a0, a1), coeffs, (b0, b1) = weyl_decompose(u)
    count = entangler_count(coeffs)
    x, y, z = coeffs
    if count == 1:
        x, y, z = math.pi / 4, 0.0, 0.0
    elif count == 2:
        z = 0.0

    layers = [list(pair) for pair in _core_layers(x, y, z, count)]
    layers[0][0] = layers[0][0] @ b0
    layers[0][1] = layers[0][1] @ b1
    layers[-1][0] = a0 @ layers[-1][0]
    layers[-1][1] = a1 @ layers[-1][1]

    out: list[Gate] = []
    for i, (m0, m1) in enumerate(layers):
        if i:
            out.append(Gate(name=two_qubit_name, qubits=tuple(qubits)))
        for m, q in ((m0, qubits[0]), (m1, qubits[1])):
            gate = synthesize_u(m, q)
            if gate is not None:
                out.append(gate)

    if not equal_up_to_global_phase(block_unitary(out, qubits), u, KAK_ATOL):
        raise ArithmeticError("KAK reconstruction exceeded tolerance")
    logger.debug("KAK: %d x %s, coefficients %s", count, two_qubit_name, coeffs)
    return out
