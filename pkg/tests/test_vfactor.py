"""Peeling factorization: reconstruction identities and slot structure."""

import numpy as np
import pytest

from kronrig.field import PrimeField, QQ
from kronrig.matrix import ExactMatrix, MonomialMatrix, kron_list, random_dense, transposition
from kronrig.vfactor import (
    DIAG,
    Factor,
    PERM,
    VCOL,
    VROW,
    chain_product,
    embed_monomial,
    factor_step,
    lift_vector,
    pad_factorization,
    slot_kinds,
    solve_linear,
    v_factorization,
    v_matrix,
)

F2, F3, F5 = PrimeField(2), PrimeField(3), PrimeField(5)
FIELDS = [F2, F3, F5, QQ]


def assemble_step(field, d, p1, y, core, lam, x, p2):
    mid_vals = list(core.to_dense()[i][i] for i in range(0)) or None
    mid = ExactMatrix.zeros(field, d, d, dense=True).to_dense().copy()
    cd = core.to_dense()
    for i in range(d - 1):
        for j in range(d - 1):
            mid[i][j] = cd[i][j]
    mid[d - 1][d - 1] = lam
    mid_m = ExactMatrix.from_dense(field, mid)
    return (p1.to_matrix() @ v_matrix(field, y).T @ mid_m
            @ v_matrix(field, x) @ p2.to_matrix())


def random_singular(field, d, rng):
    r = int(rng.integers(0, d))
    if r == 0:
        return ExactMatrix.zeros(field, d, d)
    return random_dense(field, d, r, rng) @ random_dense(field, r, d, rng)


def test_v_matrix_shape():
    g = v_matrix(F5, [2, 3, 4])
    assert g.to_dense().tolist() == [[1, 0, 2], [0, 1, 3], [0, 0, 4]]
    assert g.row_col_nnz() == (2, 3)
    assert v_matrix(F5, [1]).to_dense().tolist() == [[1]]


def test_solve_linear():
    a = [[1, 2], [3, 4]]
    x = solve_linear(F5, a, [1, 0])
    assert x is not None
    m = ExactMatrix.from_dense(F5, a)
    got = m @ ExactMatrix.from_dense(F5, [[x[0]], [x[1]]])
    assert got.to_dense().ravel().tolist() == [1, 0]
    # inconsistent system
    assert solve_linear(F5, [[1, 1], [2, 2]], [0, 1]) is None
    # underdetermined: free variables pinned to zero
    x = solve_linear(QQ, [[1, 1, 1]], [3])
    assert x == [3, 0, 0]


def test_factor_step_identity_frozen():
    for d in (1, 2, 4):
        p1, y, core, lam, x, p2 = factor_step(ExactMatrix.identity(F5, d))
        e_last = tuple([0] * (d - 1) + [1])
        assert p1.is_diagonal and all(v == 1 for v in p1.scales)
        assert p2.is_diagonal and all(v == 1 for v in p2.scales)
        assert y == e_last and x == e_last
        assert lam == 1
        assert core == ExactMatrix.identity(F5, d - 1) if d > 1 else core.rows == 0


def test_factor_step_reconstructs():
    rng = np.random.default_rng(101)
    for field in FIELDS:
        for d in (1, 2, 3, 4, 5):
            for case in range(4):
                a = random_dense(field, d, d, rng) if case % 2 == 0 else \
                    random_singular(field, d, rng)
                p1, y, core, lam, x, p2 = factor_step(a)
                assert assemble_step(field, d, p1, y, core, lam, x, p2) == a
                if a.exact_rank() == d:
                    assert lam == field.one
                    assert core.exact_rank() == d - 1
                    assert p1.is_diagonal          # left side stays untouched
                else:
                    assert lam == field.zero
                    assert x[-1] == field.zero and y[-1] == field.zero


def test_lift_conjugation_identity():
    # diag(G(x), I) equals the coordinate swap conjugate of G of the lift
    rng = np.random.default_rng(7)
    for field in [F5, QQ]:
        for d, m in [(4, 2), (5, 3), (5, 5), (3, 1)]:
            x = [field.rand(rng) for _ in range(m)]
            small = v_matrix(field, x)
            big = ExactMatrix.zeros(field, d, d, dense=True).to_dense().copy()
            sd = small.to_dense()
            for i in range(m):
                for j in range(m):
                    big[i][j] = sd[i][j]
            for i in range(m, d):
                big[i][i] = field.one
            direct = ExactMatrix.from_dense(field, big)
            pi = transposition(field, d, m - 1, d - 1).to_matrix()
            lifted = v_matrix(field, lift_vector(field, x, d))
            assert pi @ lifted @ pi == direct


def test_chain_reconstructs_and_slots():
    rng = np.random.default_rng(33)
    for field in FIELDS:
        for d in (1, 2, 3, 4, 5):
            for case in range(3):
                a = random_dense(field, d, d, rng) if case != 1 else \
                    random_singular(field, d, rng)
                chain = v_factorization(a)
                assert len(chain) == 4 * d - 3
                assert [f.kind for f in chain] == slot_kinds(d)
                assert chain_product(chain) == a
                for f in chain:
                    assert f.size == d
                    if f.kind == PERM:
                        assert all(v == field.one for v in f.mono.scales)
                    elif f.kind == DIAG:
                        assert f.mono.is_diagonal
                    elif f.kind == VCOL:
                        assert f.matrix().row_col_nnz()[0] <= 2
                    elif f.kind == VROW:
                        assert f.matrix().row_col_nnz()[1] <= 2


def test_chain_on_identity_multiplies_out():
    for d in (2, 3, 6):
        chain = v_factorization(ExactMatrix.identity(F3, d))
        assert chain_product(chain) == ExactMatrix.identity(F3, d)


def test_chain_deterministic():
    rng = np.random.default_rng(55)
    a = random_dense(F5, 4, 4, rng)
    c1 = v_factorization(a)
    c2 = v_factorization(a)
    for f, g in zip(c1, c2):
        assert f.kind == g.kind
        if f.vec is not None:
            assert f.vec == g.vec
        if f.mono is not None:
            assert (f.mono.sigma == g.mono.sigma).all()
            assert (f.mono.scales == g.mono.scales).all()


def test_padding_preserves_product_and_layout():
    rng = np.random.default_rng(77)
    for field in [F3, QQ]:
        for d, target in [(2, 4), (3, 5), (1, 3), (4, 4)]:
            a = random_dense(field, d, d, rng)
            chain = pad_factorization(v_factorization(a), target)
            assert len(chain) == 4 * target - 3
            assert chain_product(chain) == a
            assert [f.kind for f in chain] == slot_kinds(target)
            assert all(f.size == d for f in chain)
    with pytest.raises(ValueError):
        pad_factorization(v_factorization(ExactMatrix.identity(F3, 3)), 2)


def test_embed_monomial():
    p = MonomialMatrix(F5, [1, 0], [2, 3])
    e = embed_monomial(p, 4)
    assert e.sigma.tolist() == [1, 0, 2, 3]
    assert e.scales.tolist() == [2, 3, 1, 1]


def test_per_factor_sizes_mix_in_kron():
    # chains of different orders, padded to a common slot count, can be
    # combined slot by slot with Kronecker products
    rng = np.random.default_rng(91)
    a = random_dense(F5, 2, 2, rng)
    b = random_dense(F5, 3, 3, rng)
    ca = pad_factorization(v_factorization(a), 3)
    cb = v_factorization(b)
    layers = [fa.matrix().kron(fb.matrix()) for fa, fb in zip(ca, cb)]
    prod = layers[0]
    for lay in layers[1:]:
        prod = prod @ lay
    assert prod == a.kron(b)
