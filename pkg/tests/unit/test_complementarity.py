"""Unit tests for complementarity-based mode selection."""

import numpy as np
import pytest
import scipy.linalg

from tests.helpers import random_mech_system


class TestScopes:
    """Tests for the scope helpers."""

    def test_touching_includes_tangentials(self, built):
        """A closed, non-separating contact brings its tangential along."""
        from contact_hybrid.core.complementarity import scope_touching

        system = built("ball_floor", mu=0.5).system
        assert scope_touching(system, np.zeros(4)) == {0, 1}
        assert scope_touching(system, np.array([0.0, 0.0, 0.0, 1.0])) == set()
        assert scope_touching(system, np.array([0.0, 0.2, 0.0, 0.0])) == set()

    def test_iv_scope_on_hill_arrival(self, built):
        """Arriving at the hill adds both hill constraints to the ground contact."""
        from contact_hybrid.core.complementarity import scope_iv

        system = built("sliding_point").system
        state = np.array([0.5, 0.0, 1.0, 0.0])
        assert scope_iv(system, system.mode([0]), state) == {0, 2, 3}

    def test_fa_scope_drops_sliding_tangentials(self, built):
        """An inactive tangential that is sliding is not a candidate."""
        from contact_hybrid.core.complementarity import fa_scope
        from contact_hybrid.core.system import EMPTY_MODE

        system = built("ball_floor", mu=0.5).system
        assert fa_scope(system, EMPTY_MODE, np.array([0.0, 0.0, 1.0, 0.0])) == {0}
        assert fa_scope(system, EMPTY_MODE, np.zeros(4)) == {0, 1}

    def test_fa_scope_skips_opening_gaps(self, built):
        """A touching gap that trends open along the current flow is left out."""
        from contact_hybrid.core.complementarity import fa_scope
        from contact_hybrid.core.system import EMPTY_MODE

        instance = built("ptex_a")
        state = instance.state
        assert fa_scope(instance.system, EMPTY_MODE, state) == set()
        assert fa_scope(instance.system, EMPTY_MODE, state, strict_scope=True) == {0}


class TestTrends:
    """Tests for distance_trend and force_trend."""

    def test_open_gap_decides_at_order_zero(self, built):
        """An open gap is positive at order 0."""
        from contact_hybrid.core.complementarity import distance_trend
        from contact_hybrid.core.system import EMPTY_MODE

        system = built("ball_floor").system
        trend = distance_trend(system, EMPTY_MODE, 0, np.array([0.0, 0.5, 0.0, 0.0]))
        assert trend.positive
        assert trend.decided_at_order == 0

    def test_closed_gap_falls_under_gravity(self, built):
        """A closed gap with zero speed closes further at order 2."""
        from contact_hybrid.core.complementarity import distance_trend
        from contact_hybrid.core.system import EMPTY_MODE

        system = built("ball_floor").system
        trend = distance_trend(system, EMPTY_MODE, 0, np.zeros(4))
        assert trend.negative
        assert trend.decided_at_order == 2

    def test_resting_force(self, built):
        """The resting ball's cone value is positive at order 0."""
        from contact_hybrid.core.complementarity import force_trend

        system = built("ball_floor").system
        mode = system.mode([0])
        trend = force_trend(system, mode, mode, 0, np.zeros(4))
        assert trend.describe() == "positive@0"
        assert trend.values[0] == pytest.approx(1.0)


class TestSolveFA:
    """Tests for solve_fa."""

    def test_resting_ball_stays(self, built):
        """A ball at rest on the floor keeps its contact."""
        from contact_hybrid.core.complementarity import Predicate, solve_fa

        system = built("ball_floor").system
        result = solve_fa(system, np.zeros(4), system.mode([0]))
        assert result.selected == system.mode([0])
        assert result.satisfied_predicate is Predicate.FA
        assert result.solutions_found == 1

    def test_ball_at_apex_on_floor_enters_contact(self, built):
        """A free ball touching the floor with zero speed enters the contact."""
        from contact_hybrid.core.complementarity import solve_fa
        from contact_hybrid.core.system import EMPTY_MODE

        system = built("ball_floor").system
        assert solve_fa(system, np.zeros(4), EMPTY_MODE).selected == system.mode([0])

    @pytest.mark.parametrize(
        "scenario_id, active",
        [
            ("ptex_a", ()),
            ("ptex_b", (0,)),
            ("ptex_c", ()),
            ("ptex_d", (0,)),
        ],
    )
    def test_curved_constraints(self, built, scenario_id, active):
        """Higher-order trends decide whether the particle enters or leaves the curve."""
        from contact_hybrid.core.complementarity import solve_fa

        instance = built(scenario_id)
        system = instance.system
        result = solve_fa(system, instance.state, instance.mode)
        assert result.selected == system.mode(active)

    @pytest.mark.parametrize("scenario_id", ["ptex_a", "ptex_b"])
    def test_strict_scope_agrees(self, built, scenario_id):
        """Considering every touching constraint gives the same answer."""
        from contact_hybrid.core.complementarity import solve_fa

        instance = built(scenario_id)
        loose = solve_fa(instance.system, instance.state, instance.mode)
        strict = solve_fa(instance.system, instance.state, instance.mode, strict_scope=True)
        assert strict.selected == loose.selected

    def test_margins_are_trend_descriptions(self, built):
        """FA margins describe the deciding sign and order."""
        from contact_hybrid.core.complementarity import solve_fa

        instance = built("ptex_b")
        result = solve_fa(instance.system, instance.state, instance.mode)
        assert result.margins_by_label(instance.system) == {"n1": "positive@0"}


class TestSolveIV:
    """Tests for solve_iv."""

    def test_frictionless_ball(self, built):
        """The floor closes and the margin is the impulse's cone value m·v."""
        from contact_hybrid.core.complementarity import Predicate, solve_iv
        from contact_hybrid.core.system import EMPTY_MODE

        system = built("ball_floor").system
        result = solve_iv(system, EMPTY_MODE, np.array([0.0, 0.0, 0.5, -2.0]))
        assert result.selected == system.mode([0])
        assert result.satisfied_predicate is Predicate.IV
        assert result.margins_by_label(system) == {"n1": pytest.approx(2.0)}
        assert result.scope == (0,)

    @pytest.mark.parametrize("mu, expected", [(0.8, (0, 1)), (0.1, (0,))])
    def test_friction_decides_sticking(self, built, mu, expected):
        """The ball sticks when μ·m·v_z covers m·v_x and slides otherwise."""
        from contact_hybrid.core.complementarity import solve_iv
        from contact_hybrid.core.system import EMPTY_MODE

        system = built("ball_floor", mu=mu).system
        result = solve_iv(system, EMPTY_MODE, np.array([0.0, 0.0, 0.5, -2.0]))
        assert result.selected == system.mode(expected)

    @pytest.mark.parametrize("speed", [0.01, 0.1, 1.0, 10.0, 100.0])
    def test_hill_arrival_removes_ground(self, built, speed):
        """Without the pseudo-impulse the ground always lets go at the hill."""
        from contact_hybrid.core.complementarity import solve_iv

        system = built("sliding_point").system
        state = np.array([0.5, 0.0, speed, 0.0])
        assert solve_iv(system, system.mode([0]), state).selected == system.mode([2])

    def test_rocking_block_landing_lifts_pivot(self, built):
        """A slender block landing flat lifts its pivot corner and sticks on the other."""
        from contact_hybrid.core.complementarity import solve_iv

        instance = built("rocking_block", impact_speed=0.03)
        system = instance.system
        result = solve_iv(system, instance.mode, instance.state)
        assert result.selected == system.mode([2, 3])


    def test_frictionless_matches_brute_force_lcp(self, rng):
        """On random frictionless massive systems the selection solves the impact LCP.

        With W = A M⁻¹ Aᵀ and b = A q̇⁻ the LCP asks for P ≥ 0, w = b + W P ≥ 0 and P·w = 0;
        its support is found by trying every subset. Degenerate samples are skipped.
        """
        import itertools

        import jax.numpy as jnp

        from contact_hybrid.core.complementarity import solve_iv
        from contact_hybrid.core.system import EMPTY_MODE

        compared = 0
        for dim, normals in [(3, 2), (4, 3), (5, 3), (6, 2)]:
            system = random_mech_system(rng, dim, normals)
            q = np.zeros(dim)
            m = np.asarray(system.inertia(jnp.asarray(q)))
            a = np.asarray(system.constraint_rows(tuple(range(normals)), jnp.asarray(q)))
            w_mat = a @ np.linalg.solve(m, a.T)
            for _ in range(40):
                b = -rng.uniform(0.5, 2.0, size=normals)
                qdot = np.linalg.pinv(a) @ b + scipy.linalg.null_space(a) @ rng.standard_normal(
                    dim - normals
                )

                support = []
                for size in range(normals + 1):
                    for subset in itertools.combinations(range(normals), size):
                        j = list(subset)
                        p = np.zeros(normals)
                        if j:
                            p[j] = -np.linalg.solve(w_mat[np.ix_(j, j)], b[j])
                        w = b + w_mat @ p
                        rest = [k for k in range(normals) if k not in subset]
                        if np.all(p[j] > 1e-6) and np.all(w[rest] > 1e-6):
                            support.append(subset)
                if len(support) != 1:
                    continue

                result = solve_iv(system, EMPTY_MODE, np.concatenate([q, qdot]))
                assert result.selected == system.mode(support[0]), (dim, normals, b)
                compared += 1
        assert compared >= 100


class TestSolvePIV:
    """Tests for solve_piv."""

    @pytest.mark.parametrize("speed", [0.01, 0.05, 0.1])
    def test_slow_arrival_keeps_ground(self, built, speed):
        """Below g·δ·tanθ the ground stays closed and the point comes to rest."""
        from contact_hybrid.core.complementarity import solve_piv
        from contact_hybrid.core.impact import post_impact

        system = built("sliding_point").system
        state = np.array([0.5, 0.0, speed, 0.0])
        result = solve_piv(system, system.mode([0]), state, 0.03)
        assert result.selected == system.mode([0, 2])
        post = post_impact(system, result.selected, state).post_velocity
        assert post == pytest.approx(np.zeros(2), abs=1e-12)

    @pytest.mark.parametrize("speed", [0.3, 1.0, 10.0])
    def test_fast_arrival_removes_ground(self, built, speed):
        """Above the threshold the ground lets go and the hill stays."""
        from contact_hybrid.core.complementarity import solve_piv

        system = built("sliding_point").system
        state = np.array([0.5, 0.0, speed, 0.0])
        result = solve_piv(system, system.mode([0]), state, 0.03)
        assert 0 not in result.selected
        assert 2 in result.selected

    def test_threshold_matches_closed_form(self):
        """The retention speed is g·δ·tanθ."""
        from contact_hybrid.models.catalog import get_entry

        builder = get_entry("sliding_point").builder({})
        assert builder.retention_speed(0.03) == pytest.approx(9.81 * 0.03 * np.tan(np.radians(30.0)))

    def test_slow_block_landing_settles(self, built):
        """Below the settle speed both corners stay down."""
        from contact_hybrid.core.complementarity import solve_piv

        instance = built("rocking_block", impact_speed=0.03)
        result = solve_piv(instance.system, instance.mode, instance.state, 0.03)
        assert result.selected.normals == (0, 2)

    def test_fast_block_landing_lifts_pivot(self, built):
        """Above the settle speed the pivot corner lifts."""
        from contact_hybrid.core.complementarity import solve_piv

        instance = built("rocking_block", impact_speed=0.2)
        result = solve_piv(instance.system, instance.mode, instance.state, 0.03)
        assert 0 not in result.selected
        assert 2 in result.selected

    def test_zero_window_is_iv(self, built):
        """With δ_t = 0 the selection is the IV selection, tagged PIV."""
        from contact_hybrid.core.complementarity import Predicate, solve_iv, solve_piv

        system = built("sliding_point").system
        state = np.array([0.5, 0.0, 0.1, 0.0])
        piv = solve_piv(system, system.mode([0]), state, 0.0)
        assert piv.selected == solve_iv(system, system.mode([0]), state).selected
        assert piv.satisfied_predicate is Predicate.PIV

    def test_contains_iv_selection(self, built):
        """The PIV selection contains the IV selection."""
        from contact_hybrid.core.complementarity import solve_iv, solve_piv

        system = built("sliding_point").system
        state = np.array([0.5, 0.0, 0.1, 0.0])
        iv = solve_iv(system, system.mode([0]), state)
        piv = solve_piv(system, system.mode([0]), state, 0.03)
        assert iv.selected.issubset(piv.selected)

    def test_negative_window_is_rejected(self, built):
        """A negative δ_t raises ValueError."""
        from contact_hybrid.core.complementarity import solve_piv

        system = built("sliding_point").system
        with pytest.raises(ValueError):
            solve_piv(system, system.mode([0]), np.array([0.5, 0.0, 0.1, 0.0]), -0.01)


class TestNoSolution:
    """Tests for the error path when nothing satisfies a predicate."""

    def test_error_lists_scope_and_margins(self):
        """NoSolutionError carries the predicate and the scope labels."""
        from contact_hybrid.errors import NoSolutionError

        error = NoSolutionError("IV", ["n1", "t1"], {"n1+t1": "t1 cannot be maintained"})
        assert error.predicate == "IV"
        assert "{n1, t1}" in str(error)
        assert "t1 cannot be maintained" in str(error)
