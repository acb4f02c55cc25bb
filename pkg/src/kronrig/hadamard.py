"""Sign-matrix generators: Walsh products and the two Paley constructions.

These provide structured test inputs whose entries are all +-1 and whose
rows are mutually orthogonal over the integers (H @ H.T == n*I).  The
constructions are carried out over Z and then reduced into the requested
field, so a characteristic-2 field is rejected up front: the two signs
would collapse there.
"""

import numpy as np

from .field import PrimeField, validate_prime
from .matrix import ExactMatrix, kron_list

__all__ = [
    "walsh",
    "walsh_factors",
    "paley_type_one",
    "paley_type_two",
    "normalize_signs",
    "is_hadamard",
]


def _require_sign_field(field):
    if isinstance(field, PrimeField) and field.p == 2:
        raise ValueError("sign matrices degenerate modulo 2; use an odd "
                         "characteristic or the rationals")


def _require_odd_prime(q):
    validate_prime(q)
    if q == 2:
        raise ValueError("modulus for the character table must be odd")


def _character_table(q):
    """chi(a) for a in 0..q-1: 0 at zero, +-1 by quadratic residuosity."""
    tab = np.zeros(q, dtype=np.int64)
    for a in range(1, q):
        tab[a] = 1 if pow(a, (q - 1) // 2, q) == 1 else -1
    return tab


def _jacobsthal(q):
    # entry (i, j) holds chi(j - i)
    idx = (np.arange(q)[None, :] - np.arange(q)[:, None]) % q
    return _character_table(q)[idx]


def walsh_factors(field, k):
    """k copies of the 2x2 sign block, for callers that keep the product
    in factored form."""
    _require_sign_field(field)
    if k < 1:
        raise ValueError(f"need at least one factor, got k={k}")
    block = ExactMatrix.from_dense(field, [[1, 1], [1, -1]])
    return [block] * k


def walsh(field, k):
    """Order 2^k iterated Kronecker power of the 2x2 sign block."""
    _require_sign_field(field)
    if k < 0:
        raise ValueError(f"exponent must be nonnegative, got {k}")
    if k == 0:
        return ExactMatrix.identity(field, 1)
    return kron_list(walsh_factors(field, k))


def paley_type_one(field, q):
    """Order q+1 sign matrix from a prime q = 3 (mod 4).

    With S the skew core built from the character table, I + S has
    (I + S)(I + S).T = (q + 1) I because S S.T = q I.
    """
    _require_sign_field(field)
    _require_odd_prime(q)
    if q % 4 != 3:
        raise ValueError(f"type one needs q = 3 (mod 4), got {q}")
    n = q + 1
    h = np.zeros((n, n), dtype=np.int64)
    h[0, 1:] = 1
    h[1:, 0] = -1
    h[1:, 1:] = _jacobsthal(q)
    h += np.eye(n, dtype=np.int64)
    return ExactMatrix.from_dense(field, h)


def paley_type_two(field, q):
    """Order 2(q+1) sign matrix from a prime q = 1 (mod 4).

    The symmetric core C (with C @ C.T = q I) is expanded entrywise into
    2x2 sign blocks; the two block choices anticommute, which kills the
    cross terms in H @ H.T.
    """
    _require_sign_field(field)
    _require_odd_prime(q)
    if q % 4 != 1:
        raise ValueError(f"type two needs q = 1 (mod 4), got {q}")
    m = q + 1
    c = np.zeros((m, m), dtype=np.int64)
    c[0, 1:] = 1
    c[1:, 0] = 1
    c[1:, 1:] = _jacobsthal(q)
    off_diag = np.array([[1, 1], [1, -1]], dtype=np.int64)
    on_diag = np.array([[1, -1], [-1, -1]], dtype=np.int64)
    h = np.kron(c, off_diag) + np.kron(np.eye(m, dtype=np.int64), on_diag)
    return ExactMatrix.from_dense(field, h)


def normalize_signs(h):
    """Rescale rows, then columns, so the first row and column are ones.

    Sign flips preserve orthogonality; entries must be invertible.
    """
    if not h.is_square:
        raise ValueError(f"expected a square matrix, got {h.shape}")
    f = h.field
    n = h.rows
    arr = h.to_dense()
    rows = [[f.div(arr[i, j], arr[i, 0]) for j in range(n)] for i in range(n)]
    top = rows[0]
    data = [[f.div(rows[i][j], top[j]) for j in range(n)] for i in range(n)]
    return ExactMatrix.from_dense(f, data)


def is_hadamard(h):
    """True when every entry is +-1 and H @ H.T equals n times identity."""
    if not h.is_square:
        return False
    f = h.field
    one, minus = f.one, f.neg(f.one)
    arr = h.to_dense()
    for i in range(h.rows):
        for j in range(h.cols):
            if arr[i, j] != one and arr[i, j] != minus:
                return False
    target = ExactMatrix.identity(f, h.rows).scale(h.rows)
    return (h @ h.T) == target
