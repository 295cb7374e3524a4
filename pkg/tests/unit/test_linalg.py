"""Unit tests for the constrained block inverse."""

import numpy as np
import pytest

from tests.helpers import random_inertia, random_spd


def random_case(rng, massless_allowed=True):
    """Random (m, a) with q ≤ 8, c ≤ 4 and up to two massless coordinates pinned by a."""
    q = int(rng.integers(2, 9))
    c = int(rng.integers(1, min(4, q) + 1))
    massless = int(rng.integers(0, min(2, c) + 1)) if massless_allowed else 0
    return random_inertia(rng, q, massless), rng.standard_normal((c, q))


def relative(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1.0)


class TestBuildBlockInverse:
    """Tests for build_block_inverse."""

    def test_identities_hold_on_random_systems(self, rng):
        """Every defining identity holds within 1e-10 on 1000 random systems."""
        from contact_hybrid.core.linalg import block_identity_residuals, build_block_inverse

        for _ in range(1000):
            m, a = random_case(rng)
            bi = build_block_inverse(m, a)
            residuals = block_identity_residuals(bi, m, a)
            worst = max(residuals, key=residuals.get)
            assert residuals[worst] < 1e-10, (worst, residuals[worst], m.shape, a.shape)

    def test_massive_blocks_match_explicit_formulas(self, rng):
        """With invertible m the blocks equal the M⁻¹ expressions."""
        from contact_hybrid.core.linalg import build_block_inverse

        for _ in range(200):
            m, a = random_case(rng, massless_allowed=False)
            if np.linalg.cond(a) > 1e3:
                continue
            bi = build_block_inverse(m, a)
            m_inv = np.linalg.inv(m)
            schur = np.linalg.inv(a @ m_inv @ a.T)
            assert relative(bi.adag_t, m_inv @ a.T @ schur) < 1e-8
            assert relative(bi.mdag, m_inv - m_inv @ a.T @ schur @ a @ m_inv) < 1e-8
            assert relative(bi.lambda_mat, -schur) < 1e-8

    def test_lambda_is_negative_semidefinite(self, rng):
        """Λ has no positive eigenvalue."""
        from contact_hybrid.core.linalg import build_block_inverse

        m, a = random_spd(rng, 5), rng.standard_normal((3, 5))
        bi = build_block_inverse(m, a)
        assert np.max(np.linalg.eigvalsh(bi.lambda_mat)) < 0

    def test_massless_coordinate_pinned_by_constraint(self):
        """A zero-inertia coordinate is fine when a constraint fixes it."""
        from contact_hybrid.core.linalg import build_block_inverse

        m = np.diag([2.0, 0.0])
        a = np.array([[0.0, 1.0]])
        bi = build_block_inverse(m, a)
        assert bi.mdag == pytest.approx(np.diag([0.5, 0.0]))
        assert bi.adag @ a.T == pytest.approx(np.eye(1))

    def test_unconstrained_massless_coordinate_is_singular(self):
        """A free zero-inertia coordinate makes the block matrix singular."""
        from contact_hybrid.core.linalg import build_block_inverse
        from contact_hybrid.errors import SingularBlockMatrixError

        with pytest.raises(SingularBlockMatrixError):
            build_block_inverse(np.diag([1.0, 0.0]), np.array([[1.0, 0.0]]))

    def test_dependent_rows_are_rejected(self):
        """Repeated constraint rows raise RankDeficientConstraintsError."""
        from contact_hybrid.core.linalg import build_block_inverse
        from contact_hybrid.errors import RankDeficientConstraintsError

        a = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]])
        with pytest.raises(RankDeficientConstraintsError) as exc_info:
            build_block_inverse(np.eye(3), a)
        assert exc_info.value.rank == 1
        assert exc_info.value.rows == 2

    def test_no_constraints_gives_plain_inverse(self, rng):
        """With zero rows M† is M⁻¹."""
        from contact_hybrid.core.linalg import build_block_inverse

        m = random_spd(rng, 4)
        bi = build_block_inverse(m, np.zeros((0, 4)))
        assert bi.n_constraints == 0
        assert relative(bi.mdag, np.linalg.inv(m)) < 1e-12

    def test_rows_default_to_row_order(self):
        """Rows record constraint indices in row order."""
        from contact_hybrid.core.linalg import build_block_inverse

        bi = build_block_inverse(np.eye(3), np.eye(3)[:2], rows=(4, 7))
        assert bi.rows == (4, 7)
        assert bi.position(7) == 1
        assert build_block_inverse(np.eye(3), np.eye(3)[:2]).rows == (0, 1)


class TestExtendBlockInverse:
    """Tests for extend_block_inverse."""

    def test_extension_matches_rebuild(self, rng):
        """Extending a 2×5 base by one row equals building the 3×5 inverse directly."""
        from contact_hybrid.core.linalg import build_block_inverse, extend_block_inverse

        m, a, a_k = random_spd(rng, 5), rng.standard_normal((2, 5)), rng.standard_normal(5)
        extended = extend_block_inverse(build_block_inverse(m, a), a_k)
        rebuilt = build_block_inverse(m, np.vstack([a, a_k]))
        for name in ("mdag", "adag_t", "adag", "lambda_mat"):
            assert relative(getattr(extended, name), getattr(rebuilt, name)) < 1e-10, name

    def test_extension_matches_rebuild_on_random_systems(self, rng):
        """Extension equals rebuild across random, possibly singular, well-conditioned systems."""
        from contact_hybrid.core.linalg import (
            block_matrix,
            build_block_inverse,
            extend_block_inverse,
        )

        compared = 0
        for _ in range(1000):
            m, a = random_case(rng)
            if a.shape[0] == a.shape[1]:
                continue
            a_k = rng.standard_normal(a.shape[1])
            stacked = np.vstack([a, a_k])
            if np.linalg.cond(block_matrix(m, stacked)) > 1e5:
                continue
            extended = extend_block_inverse(build_block_inverse(m, a), a_k)
            rebuilt = build_block_inverse(m, stacked)
            for name in ("mdag", "adag_t", "lambda_mat"):
                assert relative(getattr(extended, name), getattr(rebuilt, name)) < 1e-10, name
            compared += 1
        assert compared > 300

    def test_row_in_span_is_degenerate(self, rng):
        """A row already in the span of the base rows raises DegenerateExtensionError."""
        from contact_hybrid.core.linalg import build_block_inverse, extend_block_inverse
        from contact_hybrid.errors import DegenerateExtensionError

        m, a = random_spd(rng, 4), rng.standard_normal((2, 4))
        with pytest.raises(DegenerateExtensionError):
            extend_block_inverse(build_block_inverse(m, a), a[0] - 2.0 * a[1])

    def test_extension_records_index(self):
        """The appended row carries the given constraint index."""
        from contact_hybrid.core.linalg import build_block_inverse, extend_block_inverse

        base = build_block_inverse(np.eye(3), np.eye(3)[:1], rows=(2,))
        extended = extend_block_inverse(base, np.array([0.0, 1.0, 0.0]), index=0)
        assert extended.rows == (2, 0)
        assert extended.position(0) == 1


class TestConstraintRank:
    """Tests for constraint_rank."""

    def test_full_and_deficient(self):
        """Rank counts independent rows."""
        from contact_hybrid.core.linalg import constraint_rank

        assert constraint_rank(np.eye(3)) == 3
        assert constraint_rank(np.array([[1.0, 1.0], [2.0, 2.0]])) == 1
        assert constraint_rank(np.zeros((0, 3))) == 0


class TestCheckReducedEquivalence:
    """Tests for check_reduced_equivalence."""

    def test_never_inconsistent_on_random_systems(self, rng):
        """Block and reduced invertibility agree on random systems, singular m included."""
        from contact_hybrid.core.linalg import check_reduced_equivalence

        for _ in range(1000):
            m, a = random_case(rng)
            assert check_reduced_equivalence(m, a) is True

    def test_free_massless_coordinate(self):
        """Both tests report a singular system when a massless coordinate is unconstrained."""
        from contact_hybrid.core.linalg import check_reduced_equivalence

        assert check_reduced_equivalence(np.diag([1.0, 0.0]), np.array([[1.0, 0.0]])) is False

    def test_fully_constrained(self):
        """A square constraint matrix leaves an empty kernel."""
        from contact_hybrid.core.linalg import check_reduced_equivalence

        assert check_reduced_equivalence(np.zeros((2, 2)), np.eye(2)) is True

    @pytest.mark.parametrize("row_scale", [1e-3, 1.0, 1e3, 1e6])
    def test_row_scaling_does_not_change_the_verdict(self, row_scale):
        """Scaling the constraint rows leaves a nearly massless system invertible."""
        from contact_hybrid.core.linalg import check_reduced_equivalence

        m = np.diag([1.0, 1e-9])
        assert check_reduced_equivalence(m, row_scale * np.array([[1.0, 0.0]])) is True

    @pytest.mark.parametrize("inertia_scale", [1e-6, 1.0, 1e6])
    def test_near_massless_at_the_cutoff(self, inertia_scale):
        """A coordinate right at the singular cutoff is accepted without an inconsistency."""
        from contact_hybrid.core.linalg import check_reduced_equivalence

        m = inertia_scale * np.diag([1.0, 1.3e-12])
        assert check_reduced_equivalence(m, np.array([[1.0, 0.0]])) is True

    def test_random_row_scales(self, rng):
        """Random per-row scales over twelve decades never raise."""
        from contact_hybrid.core.linalg import check_reduced_equivalence

        for _ in range(200):
            m, a = random_case(rng)
            scales = 10.0 ** rng.uniform(-6, 6, size=(a.shape[0], 1))
            assert check_reduced_equivalence(m, scales * a) is True
