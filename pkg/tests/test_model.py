"""Weight-file grammar, the lifted binary-quadratic instance, dual points,
and instance persistence."""

import io

import numpy as np
import pytest

from dnn_approx.model import (
    BestApproxInstance,
    DualPoint,
    biq_from_triplets,
    build_ex_biq,
    load_biq,
    load_instance,
    make_custom_instance,
    make_random_biq,
    primal_from_dual,
    save_instance,
    write_biq,
)


class TestWeightFileGrammar:
    """Sparse weight files: header, triplets, comments, and diagnostics."""

    def test_off_diagonal_weight(self):
        """'2 1 / 1 2 5'  =>  Q12 = Q21 = -5 and zero linear term"""
        data = load_biq(io.StringIO("2 1\n1 2 5\n"))
        assert data.n == 2
        np.testing.assert_allclose(data.Q, [[0.0, -5.0], [-5.0, 0.0]])
        np.testing.assert_allclose(data.c, [0.0, 0.0])

    def test_diagonal_weight(self):
        """'1 1 / 1 1 3'  =>  zero Q and linear term (-3)"""
        data = load_biq(io.StringIO("1 1\n1 1 3\n"))
        np.testing.assert_allclose(data.Q, [[0.0]])
        np.testing.assert_allclose(data.c, [-3.0])

    def test_comments_and_blank_lines(self):
        text = "# title\n\n2 1\n# body\n1 2 4\n\n"
        data = load_biq(io.StringIO(text))
        np.testing.assert_allclose(data.Q[0, 1], -4.0)

    def test_reads_from_path(self, tmp_path):
        p = tmp_path / "w.sparse"
        p.write_text("2 1\n1 2 5\n")
        assert load_biq(p).n == 2

    def test_empty_triplets_give_zero_data(self):
        data = biq_from_triplets(3, [])
        np.testing.assert_allclose(data.Q, np.zeros((3, 3)))
        np.testing.assert_allclose(data.c, np.zeros(3))

    @pytest.mark.parametrize(
        "text, message",
        [
            ("2\n", r"line 1: header must be 'n nnz'"),
            ("0 1\n1 1 1\n", r"line 1: invalid header values"),
            ("2 1\n1 2\n", r"line 2: expected 'i j w' triplet"),
            ("2 1\n2 1 5\n", r"line 2: indices \(2,1\) outside 1 <= i <= j <= 2"),
            ("2 1\n1 3 5\n", r"line 2: indices \(1,3\) outside 1 <= i <= j <= 2"),
            (
                "2 2\n1 2 5\n1 2 7\n",
                r"line 3: duplicate entry \(1,2\), first at line 2",
            ),
            ("", r"empty weight file"),
            ("2 2\n1 2 5\n", r"header announced 2 triplets, found 1"),
        ],
    )
    def test_malformed_input(self, text, message):
        with pytest.raises(ValueError, match=message):
            load_biq(io.StringIO(text))

    def test_write_read_roundtrip(self, tmp_path):
        """integer weights are written without a decimal point"""
        p = tmp_path / "out.sparse"
        write_biq(p, 3, [(1, 2, 5.0), (2, 3, -1.5)])
        assert p.read_text() == "3 2\n1 2 5\n2 3 -1.5\n"
        data = load_biq(p)
        np.testing.assert_allclose(data.Q[0, 1], -5.0)
        np.testing.assert_allclose(data.Q[1, 2], 1.5)

    def test_random_triplets_deterministic(self):
        a = make_random_biq(12, density=0.3, seed=9)
        b = make_random_biq(12, density=0.3, seed=9)
        assert a == b
        assert all(1 <= i <= j <= 12 for i, j, _ in a)
        assert all(w != 0.0 and w == int(w) for _, _, w in a)


class TestLiftedInstance:
    """Transcription of minimization data into the matrix-nearness form."""

    def test_dimensions_small(self):
        inst = build_ex_biq(biq_from_triplets(2, []), name="n2")
        assert inst.n == 3
        assert inst.eq.m == 3
        assert inst.ineq.m == 3

    @pytest.mark.parametrize("n, m_eq, m_ineq", [(50, 51, 3675), (100, 101, 14850)])
    def test_dimensions_benchmark_sizes(self, n, m_eq, m_ineq):
        inst = build_ex_biq(biq_from_triplets(n, []), name=f"n{n}")
        assert inst.n == n + 1
        assert inst.eq.m == m_eq
        assert inst.ineq.m == m_ineq

    def test_too_small_raises(self):
        with pytest.raises(ValueError, match="at least two binary variables"):
            build_ex_biq(biq_from_triplets(1, []))

    def test_target_matrix(self, biq2_instance):
        """weight 5 on the pair (1,2)  =>  target has 2.5 on the Y12 slot"""
        expect = np.zeros((3, 3))
        expect[0, 1] = expect[1, 0] = 2.5
        np.testing.assert_allclose(biq2_instance.G, expect)

    def test_equality_rows(self, biq2_instance):
        """diag(Y) = x rows and the unit corner entry, with b = (0, 0, 1)"""
        x = np.array(
            [[0.7, 0.2, 0.4], [0.2, 0.6, 0.1], [0.4, 0.1, 0.9]]
        )
        ax = biq2_instance.eq.forward(x)
        np.testing.assert_allclose(ax, [0.7 - 0.4, 0.6 - 0.1, 0.9], atol=1e-14)
        np.testing.assert_allclose(biq2_instance.b, [0.0, 0.0, 1.0])

    def test_inequality_rows(self, biq2_instance):
        """rows evaluate to (x1 - Y12, x2 - Y12, Y12 - x1 - x2) with
        d = (0, 0, -1)"""
        x = np.array(
            [[0.7, 0.2, 0.4], [0.2, 0.6, 0.1], [0.4, 0.1, 0.9]]
        )
        bx = biq2_instance.ineq.forward(x)
        np.testing.assert_allclose(
            bx, [0.4 - 0.2, 0.1 - 0.2, 0.2 - 0.4 - 0.1], atol=1e-14
        )
        np.testing.assert_allclose(biq2_instance.d, [0.0, 0.0, -1.0])

    def test_inequality_count_formula(self):
        for n in (2, 3, 5, 8):
            inst = build_ex_biq(biq_from_triplets(n, []))
            assert inst.ineq.m == 3 * n * (n - 1) // 2

    @pytest.mark.parametrize("seed", range(4))
    def test_binary_points_are_feasible(self, seed):
        """any lifted binary assignment satisfies all constraints"""
        n = 5
        inst = build_ex_biq(
            biq_from_triplets(n, make_random_biq(n, density=0.6, seed=seed))
        )
        rng = np.random.default_rng(seed)
        xvec = rng.integers(0, 2, size=n).astype(float)
        lifted = np.zeros((n + 1, n + 1))
        lifted[:n, :n] = np.outer(xvec, xvec)
        lifted[:n, n] = lifted[n, :n] = xvec
        lifted[n, n] = 1.0
        np.testing.assert_allclose(inst.eq.forward(lifted), inst.b, atol=1e-12)
        assert np.all(inst.ineq.forward(lifted) >= inst.d - 1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_adjoint_identity(self, seed, small_biq_instance):
        """<A(X), y> = <X, A*(y)> for both constraint families"""
        inst = small_biq_instance
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((inst.n, inst.n))
        x = 0.5 * (m + m.T)
        for op in (inst.eq, inst.ineq):
            y = rng.standard_normal(op.m)
            lhs = float(op.forward(x) @ y)
            rhs = float(np.tensordot(x, op.adjoint(y)))
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_gram_apply_matches_composition(self, small_biq_instance):
        inst = small_biq_instance
        rng = np.random.default_rng(0)
        y = rng.standard_normal(inst.ineq.m)
        np.testing.assert_allclose(
            inst.ineq.gram_apply(y),
            inst.ineq.forward(inst.ineq.adjoint(y)),
            atol=1e-12,
        )

    def test_lipschitz_bound_dominates(self, small_biq_instance):
        inst = small_biq_instance
        dense = inst.ineq.row_matrix().toarray()
        lam = np.linalg.eigvalsh(dense @ dense.T).max()
        assert inst.lipschitz_bbt() >= lam * (1.0 - 1e-9)


class TestDualPoint:
    """Dual iterates and the primal reconstruction."""

    def test_zero_dual_gives_target(self, biq2_instance):
        w = DualPoint.zeros(biq2_instance)
        np.testing.assert_allclose(
            primal_from_dual(biq2_instance, w), biq2_instance.G
        )

    def test_first_equality_direction(self, biq2_instance):
        """y = e1  =>  X - G is the first equality row matrix"""
        w = DualPoint.zeros(biq2_instance)
        w.y[0] = 1.0
        a1 = np.zeros((3, 3))
        a1[0, 0] = 1.0
        a1[0, 2] = a1[2, 0] = -0.5
        np.testing.assert_allclose(
            primal_from_dual(biq2_instance, w) - biq2_instance.G, a1, atol=1e-14
        )

    def test_includes_all_blocks(self, biq2_instance):
        rng = np.random.default_rng(1)
        w = DualPoint.zeros(biq2_instance)
        w.y[:] = rng.standard_normal(3)
        w.z[:] = rng.standard_normal(3)
        s = rng.standard_normal((3, 3))
        w.S[:] = 0.5 * (s + s.T)
        zz = rng.standard_normal((3, 3))
        w.Z[:] = 0.5 * (zz + zz.T)
        expect = (
            biq2_instance.G
            + biq2_instance.eq.adjoint(w.y)
            + biq2_instance.ineq.adjoint(w.z)
            + w.S
            + w.Z
        )
        np.testing.assert_allclose(
            primal_from_dual(biq2_instance, w), expect, atol=1e-13
        )

    def test_copy_is_independent(self, biq2_instance):
        w = DualPoint.zeros(biq2_instance)
        v = w.copy()
        v.y[0] = 5.0
        assert w.y[0] == 0.0


class TestCustomInstance:
    """Direct construction from dense constraint rows."""

    def test_equality_only(self, tiny_instance):
        assert tiny_instance.ineq.m == 0
        assert tiny_instance.eq.m == 1
        assert tiny_instance.lambda_max_bbt == 0.0

    def test_with_inequalities(self, cross_instance):
        assert cross_instance.ineq.m == 1
        x = np.array([[1.0, 0.25], [0.25, 1.0]])
        np.testing.assert_allclose(cross_instance.ineq.forward(x), [0.25])

    def test_asymmetric_row_rejected(self):
        with pytest.raises(ValueError, match="must be symmetric"):
            make_custom_instance(
                np.eye(2), [np.array([[0.0, 1.0], [0.0, 0.0]])], [0.0]
            )


class TestPersistence:
    """Round trips through the compressed archive format."""

    def test_roundtrip(self, tmp_path, small_biq_instance):
        path = tmp_path / "inst.npz"
        save_instance(path, small_biq_instance)
        back = load_instance(path)
        assert isinstance(back, BestApproxInstance)
        assert back.name == small_biq_instance.name
        np.testing.assert_allclose(back.G, small_biq_instance.G)
        np.testing.assert_allclose(back.b, small_biq_instance.b)
        np.testing.assert_allclose(back.d, small_biq_instance.d)
        np.testing.assert_allclose(
            back.eq.row_matrix().toarray(),
            small_biq_instance.eq.row_matrix().toarray(),
        )
        np.testing.assert_allclose(
            back.ineq.row_matrix().toarray(),
            small_biq_instance.ineq.row_matrix().toarray(),
        )

    def test_roundtrip_preserves_solves(self, tmp_path, biq2_instance):
        """the reloaded instance produces identical constraint images"""
        path = tmp_path / "b2.npz"
        save_instance(path, biq2_instance)
        back = load_instance(path)
        rng = np.random.default_rng(2)
        m = rng.standard_normal((3, 3))
        x = 0.5 * (m + m.T)
        np.testing.assert_allclose(
            back.ineq.forward(x), biq2_instance.ineq.forward(x)
        )
