"""Dense linear algebra and basis bookkeeping for three two-level atoms.

Each atom has a ground level ``0`` and a Rydberg level ``r``. Three-atom
basis states are labelled by strings such as ``"r0r"`` (atom 1 is the
leftmost symbol) and map to indices through ``4*a1 + 2*a2 + a3`` with
``0 -> 0`` and ``r -> 1``.

The four-dimensional chain subspace spanned by ``000, r00, rr0, rrr`` is
where the effective dynamics lives; its members are called zeta_1..zeta_4.
"""

from __future__ import annotations

import itertools

import numpy as np

LEVELS = ("0", "r")

#: All eight labels in index order.
LABELS: tuple[str, ...] = tuple("".join(p) for p in itertools.product(LEVELS, repeat=3))

#: Chain subspace labels, in zeta order.
CHAIN_LABELS: tuple[str, ...] = ("000", "r00", "rr0", "rrr")

#: Labels ordered by excitation number, used for CSV columns.
POPULATION_ORDER: tuple[str, ...] = ("000", "r00", "0r0", "00r", "rr0", "r0r", "0rr", "rrr")

# single-atom operators, basis (|0>, |r>)
KET0 = np.array([1.0, 0.0], dtype=complex)
KETR = np.array([0.0, 1.0], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)
RAISE = np.outer(KETR, KET0.conj())  # |r><0|
LOWER = np.outer(KET0, KETR.conj())  # |0><r|
PROJ_R = np.outer(KETR, KETR.conj())
PROJ_0 = np.outer(KET0, KET0.conj())


def label_to_index(label: str) -> int:
    """Return the basis index of a three-atom label like ``"rr0"``."""
    if len(label) != 3 or any(c not in LEVELS for c in label):
        raise ValueError(f"invalid basis label {label!r}")
    a1, a2, a3 = (LEVELS.index(c) for c in label)
    return 4 * a1 + 2 * a2 + a3


def index_to_label(index: int) -> str:
    if not 0 <= index < 8:
        raise ValueError(f"basis index out of range: {index}")
    return LABELS[index]


CHAIN_INDICES: tuple[int, ...] = tuple(label_to_index(s) for s in CHAIN_LABELS)


def tensor3(a, b, c) -> np.ndarray:
    """Kronecker product ``a (x) b (x) c`` in atom order 1, 2, 3.

    All operands must be single-atom objects of the same kind: either
    2x2 operators (giving an 8x8 operator) or length-2 vectors (giving an
    8-vector).
    """
    ops = [np.asarray(x, dtype=complex) for x in (a, b, c)]
    shapes = {x.shape for x in ops}
    if shapes not in ({(2, 2)}, {(2,)}):
        raise ValueError(f"tensor3 expects three 2x2 operators or three 2-vectors, got {[x.shape for x in ops]}")
    return np.kron(np.kron(ops[0], ops[1]), ops[2])


def single_atom_operator(op, atom: int) -> np.ndarray:
    """Embed a 2x2 operator acting on ``atom`` (1, 2 or 3) into 8 dimensions."""
    if atom not in (1, 2, 3):
        raise ValueError(f"atom must be 1, 2 or 3, got {atom}")
    factors = [IDENTITY2, IDENTITY2, IDENTITY2]
    factors[atom - 1] = op
    return tensor3(*factors)


def dagger(m) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(np.asarray(m)).T


def overlap(a, b) -> complex:
    """Inner product <a|b>, conjugating ``a``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def basis_state(label: str) -> np.ndarray:
    """Three-atom basis ket for ``label`` as an 8-vector."""
    psi = np.zeros(8, dtype=complex)
    psi[label_to_index(label)] = 1.0
    return psi


def state_from_amplitudes(amplitudes: dict[str, complex], dim: int = 8) -> np.ndarray:
    """Build a normalized state from ``{label: amplitude}``.

    With ``dim=4`` the labels must belong to the chain subspace and the
    result is expressed in the zeta basis.
    """
    if dim == 8:
        psi = np.zeros(8, dtype=complex)
        for label, amp in amplitudes.items():
            psi[label_to_index(label)] += amp
    elif dim == 4:
        psi = np.zeros(4, dtype=complex)
        for label, amp in amplitudes.items():
            if label not in CHAIN_LABELS:
                raise ValueError(f"{label!r} is outside the chain subspace")
            psi[CHAIN_LABELS.index(label)] += amp
    else:
        raise ValueError(f"dim must be 4 or 8, got {dim}")
    return normalize(psi)


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return psi / norm


def ghz_state(dim: int = 8) -> np.ndarray:
    """(|000> + |rrr>)/sqrt(2)."""
    return state_from_amplitudes({"000": 1.0, "rrr": 1.0}, dim)


def klm_state(dim: int = 8) -> np.ndarray:
    """(|000> + |r00> + |rr0> + |rrr>)/2."""
    return state_from_amplitudes({s: 1.0 for s in CHAIN_LABELS}, dim)


def embed_chain(x) -> np.ndarray:
    """Embed a chain-subspace vector (4,) or operator (4, 4) into 8 dimensions."""
    x = np.asarray(x, dtype=complex)
    idx = np.array(CHAIN_INDICES)
    if x.shape == (4,):
        out = np.zeros(8, dtype=complex)
        out[idx] = x
    elif x.shape == (4, 4):
        out = np.zeros((8, 8), dtype=complex)
        out[np.ix_(idx, idx)] = x
    else:
        raise ValueError(f"expected shape (4,) or (4, 4), got {x.shape}")
    return out


def restrict_chain(x) -> np.ndarray:
    """Inverse of :func:`embed_chain` (drops everything outside the chain)."""
    x = np.asarray(x)
    idx = np.array(CHAIN_INDICES)
    if x.shape == (8,):
        return x[idx]
    if x.shape == (8, 8):
        return x[np.ix_(idx, idx)]
    raise ValueError(f"expected shape (8,) or (8, 8), got {x.shape}")


def chain_projector() -> np.ndarray:
    return embed_chain(np.eye(4))


def is_hermitian(m, atol: float = 1e-12) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) < atol)


def is_unitary(u, atol: float = 1e-12) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u @ dagger(u) - np.eye(u.shape[0]))) < atol)


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def populations(state) -> np.ndarray:
    """Basis populations of a ket (1-D) or density matrix (2-D)."""
    state = np.asarray(state)
    if state.ndim == 1:
        return np.abs(state) ** 2
    return np.real(np.diag(state))
