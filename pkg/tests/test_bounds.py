import math

import numpy as np
import pytest

from blowup_bounds.bounds import (
    BoundsInput,
    BoundsReport,
    CapExceeded,
    NoRootError,
    build_sequence,
    compute_report,
    delta1,
    e_q,
    lower_bound_closed,
    lower_bound_closed_alpha0,
    lower_bound_constructive,
    lower_bound_log,
    maximize_affine_power,
    solve_lambda,
    step_count_lower_bound,
    upper_bound,
)
from blowup_bounds.kernel import kernel_bound_constant


def g(lam, q):
    return (lam - 1.0) / lam ** q


class TestEq:
    def test_q2(self):
        assert e_q(2.0) == pytest.approx(0.25, rel=1e-15)

    def test_q3(self):
        assert e_q(3.0) == pytest.approx(4.0 / 27.0, rel=1e-14)

    def test_sandwich_q3(self):
        val = e_q(3.0)
        assert 1.0 / 9.0 < val < min(1.0 / 3.0, 1.0 / (2.0 * math.e))

    def test_sandwich_property(self):
        rng = np.random.default_rng(1)
        qs = np.exp(rng.uniform(np.log(1.001), np.log(50.0), 1000))
        for q in qs:
            val = e_q(float(q))
            assert 1.0 / (3.0 * q) < val < min(1.0 / q, 1.0 / ((q - 1.0) * math.e))

    def test_domain(self):
        with pytest.raises(ValueError):
            e_q(1.0)


class TestGMonotone:
    def test_shape_of_g(self):
        rng = np.random.default_rng(2)
        for q in rng.uniform(1.0 + 1e-6, 10.0, 100):
            top = q / (q - 1.0)
            lam_up = np.linspace(1.0 + 1e-9, top, 1000)
            vals_up = g(lam_up, q)
            assert np.all(np.diff(vals_up) > 0)
            lam_dn = np.linspace(top, top + 10 * (top - 1.0), 1000)
            vals_dn = g(lam_dn, q)
            assert np.all(np.diff(vals_dn) < 0)
            assert g(top, q) == pytest.approx(e_q(float(q)), rel=1e-12)


class TestSolveLambda:
    def test_at_maximum(self):
        assert solve_lambda(2.0, 0.25) == pytest.approx(2.0, rel=1e-14)

    def test_quadratic_oracle(self):
        # for q = 2 the root solves y lam^2 - lam + 1 = 0
        y = 0.09
        oracle = (1.0 - math.sqrt(1.0 - 4.0 * y)) / (2.0 * y)
        lam = solve_lambda(2.0, y)
        assert lam == pytest.approx(oracle, rel=1e-12)
        assert lam == pytest.approx(10.0 / 9.0, rel=1e-12)
        assert g(lam, 2.0) == pytest.approx(y, abs=1e-14)

    def test_first_order_regime(self):
        # g(lam) ~ lam - 1 near 1, so tiny y gives lam ~ 1 + y
        lam = solve_lambda(3.0, 1e-6)
        assert lam == pytest.approx(1.0 + 1e-6, abs=1e-9)

    def test_residual_on_random_inputs(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            q = float(np.exp(rng.uniform(np.log(1.01), np.log(10.0))))
            y = float(rng.uniform(0, 1)) * e_q(q)
            if y == 0:
                continue
            lam = solve_lambda(q, y)
            assert 1.0 < lam <= q / (q - 1.0) * (1 + 1e-15)
            assert abs(g(lam, q) - y) <= 1e-14 * max(1.0, y)

    def test_no_root_above_eq(self):
        with pytest.raises(NoRootError):
            solve_lambda(2.0, 0.26)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            solve_lambda(2.0, 0.0)
        with pytest.raises(ValueError):
            solve_lambda(0.5, 0.1)


class TestDelta1:
    def test_alpha_zero_form(self, disk_constants):
        c = kernel_bound_constant(disk_constants.B1, 2)
        val = delta1(0.04, 123.0, 0.0, disk_constants)
        assert val == pytest.approx(2 * c * 0.2 / disk_constants.b1, rel=1e-14)
        # independent of the area when alpha = 0
        assert val == delta1(0.04, 1e-9, 0.0, disk_constants)

    def test_vanishes_with_t_star(self, disk_constants):
        # delta_1 ~ t*^(N_alpha) -> 0 (here N_alpha = 0.35)
        d_small = delta1(1e-12, 1.0, 0.3, disk_constants)
        assert d_small < 1e-3
        assert d_small / delta1(1.0, 1.0, 0.3, disk_constants) == pytest.approx(
            (1e-12) ** 0.35, rel=1e-10
        )

    def test_linear_in_area_power(self, disk_constants):
        # doubling |Gamma_1|^alpha doubles delta_1
        alpha = 0.5
        a1 = 1.3
        a2 = a1 * 2.0 ** (1.0 / alpha)
        r = delta1(0.1, a2, alpha, disk_constants) / delta1(0.1, a1, alpha, disk_constants)
        assert r == pytest.approx(2.0, rel=1e-12)

    def test_t_star_domain(self, disk_constants):
        with pytest.raises(ValueError):
            delta1(0.0, 1.0, 0.0, disk_constants)
        with pytest.raises(ValueError):
            delta1(1.5, 1.0, 0.0, disk_constants)


class TestBuildSequence:
    def test_hand_iteration(self):
        # y0 = 0.25 = E_2 -> lambda_1 = 2, M_1 = 2, then x_1 = 0.5 > E_2
        trace = build_sequence(2.0, 1.0, 0.25)
        assert trace.L == 1
        assert trace.lambdas[0] == pytest.approx(2.0, rel=1e-12)
        assert trace.m_values[0] == pytest.approx(2.0, rel=1e-12)
        trace.validate()

    def test_worked_instance(self):
        trace = build_sequence(2.0, 1.0, 0.01)
        assert trace.L >= 9
        assert step_count_lower_bound(2.0, 1.0, 0.01) == pytest.approx(8.2, rel=1e-12)
        assert trace.L > 8.2
        trace.validate()

    def test_immediate_stop(self):
        trace = build_sequence(3.0, 2.0, 1.0)  # x0 = 4 > E_3
        assert trace.L == 0
        trace.validate()

    def test_long_run_q_close_to_one(self):
        bound = step_count_lower_bound(1.1, 1.0, 1e-4)
        assert bound == pytest.approx((1e4 - 9.9) / 1.0, rel=1e-12)
        trace = build_sequence(1.1, 1.0, 1e-4, cap=10 ** 6)
        assert trace.L > 9990
        trace.validate()

    def test_cap_exceeded_carries_partial_trace(self):
        with pytest.raises(CapExceeded) as err:
            build_sequence(2.0, 1.0, 1e-6, cap=10)
        assert err.value.trace.L == 10
        assert np.all(np.diff(err.value.trace.m_values) > 0)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            build_sequence(1.0, 1.0, 0.1)
        with pytest.raises(ValueError):
            build_sequence(2.0, 0.0, 0.1)
        with pytest.raises(ValueError):
            build_sequence(2.0, 1.0, 0.0)


class TestStepCountBound:
    def test_nonpositive_clamped(self):
        # M0^(q-1) delta_1 >= 1/(9q) makes the bracket nonpositive
        assert step_count_lower_bound(2.0, 1.0, 1.0 / 18.0) == 0.0
        assert step_count_lower_bound(2.0, 1.0, 1.0) == 0.0

    def test_enumeration_exceeds_bound_on_grid(self):
        qs = np.exp(np.linspace(np.log(1.2), np.log(5.0), 10))
        m0s = np.exp(np.linspace(np.log(0.25), np.log(4.0), 10))
        d1s = np.logspace(-2.5, -0.5, 10)
        checked = 0
        for q in qs:
            for m0 in m0s:
                for d1 in d1s:
                    bound = step_count_lower_bound(float(q), float(m0), float(d1))
                    trace = build_sequence(float(q), float(m0), float(d1), cap=10 ** 6)
                    if bound > 0:
                        checked += 1
                        assert trace.L > bound
        assert checked > 100


class TestMaximizeAffinePower:
    @pytest.mark.parametrize(
        "a,beta,t_expect,f_expect",
        [(2.0, 0.5, 1.0, 1.0), (0.5, 0.5, 0.0625, 0.0625), (1.0, 0.5, 0.25, 0.25)],
    )
    def test_worked_examples(self, a, beta, t_expect, f_expect):
        t_opt, f_max = maximize_affine_power(a, beta)
        assert t_opt == pytest.approx(t_expect, rel=1e-12)
        assert f_max == pytest.approx(f_expect, rel=1e-12)

    def test_against_grid_search(self):
        rng = np.random.default_rng(4)
        grid = np.linspace(1e-9, 1.0, 100000)
        for _ in range(100):
            a = float(np.exp(rng.uniform(np.log(0.01), np.log(100.0))))
            beta = float(rng.uniform(0.05, 0.95))
            t_opt, f_max = maximize_affine_power(a, beta)
            f_grid = float(np.max(a * grid ** beta - grid))
            assert f_max >= f_grid - 1e-6 * max(1.0, abs(f_grid))
            assert abs(f_max - f_grid) <= 1e-6 * max(1.0, abs(f_max))
            assert f_max >= (1 - beta) * a * min(1.0, beta * a) ** (beta / (1 - beta)) - 1e-15

    def test_domain(self):
        with pytest.raises(ValueError):
            maximize_affine_power(0.0, 0.5)
        with pytest.raises(ValueError):
            maximize_affine_power(1.0, 1.0)


class TestClosedLowerBound:
    def test_alpha0_specialization_matches(self, disk_constants):
        for q, m0 in [(1.5, 0.5), (2.0, 1.0), (3.0, 2.0), (1.01, 10.0)]:
            inp = BoundsInput(q=q, m0=m0, gamma1_area=1.7, alpha=0.0, constants=disk_constants)
            general = lower_bound_closed(inp)
            direct = lower_bound_closed_alpha0(q, m0, disk_constants)
            assert general == pytest.approx(direct, rel=1e-12)

    def test_area_scaling_when_min_inactive(self, disk_constants):
        # halving |Gamma_1| multiplies the bound by 2^alpha exactly
        alpha, q, m0 = 0.9, 2.0, 0.05
        area = 0.3
        i1 = BoundsInput(q=q, m0=m0, gamma1_area=area, alpha=alpha, constants=disk_constants)
        i2 = BoundsInput(q=q, m0=m0, gamma1_area=area / 2, alpha=alpha, constants=disk_constants)
        assert 1.0 / (q * m0 ** (q - 1) * area ** alpha) >= 1.0  # min clause inactive
        assert lower_bound_closed(i2) / lower_bound_closed(i1) == pytest.approx(2 ** alpha, rel=1e-12)

    def test_q_to_one_order(self, disk_constants):
        # (q-1) * bound approaches a positive constant as q -> 1+
        vals = []
        for q in (1 + 1e-6, 1 + 1e-9):
            inp = BoundsInput(q=q, m0=1.0, gamma1_area=1.0, alpha=0.0, constants=disk_constants)
            vals.append((q - 1.0) * lower_bound_closed(inp))
        assert vals[0] > 0
        assert vals[0] == pytest.approx(vals[1], rel=1e-3)

    def test_alpha_domain(self, disk_constants):
        with pytest.raises(ValueError):
            BoundsInput(q=2.0, m0=1.0, gamma1_area=1.0, alpha=1.0, constants=disk_constants)


class TestConstructiveBound:
    def test_dominates_closed_form(self, disk_constants):
        rng = np.random.default_rng(5)
        for _ in range(8):
            inp = BoundsInput(
                q=float(np.exp(rng.uniform(np.log(1.3), np.log(4.0)))),
                m0=float(np.exp(rng.uniform(np.log(0.3), np.log(3.0)))),
                gamma1_area=float(np.exp(rng.uniform(np.log(0.05), np.log(6.0)))),
                alpha=float(rng.uniform(0.0, 0.9)),
                constants=disk_constants,
            )
            closed = lower_bound_closed(inp)
            constructive, trace = lower_bound_constructive(inp)
            assert constructive >= closed - 1e-12
            if trace is not None and trace.L > 0:
                trace.validate()

    def test_mutual_oracle_alpha0(self, disk_constants):
        # the grid search both counts more steps than the closed-form step
        # bound (~10x) and finds a better t* than the proof's conservative
        # optimizer, so it lands a couple of decades above the closed form
        # (measured ratio ~49 for the unit disk) while never falling below it
        inp = BoundsInput(q=2.0, m0=1.0, gamma1_area=2 * math.pi, alpha=0.0, constants=disk_constants)
        closed = lower_bound_closed(inp)
        constructive, _ = lower_bound_constructive(inp)
        assert constructive >= closed
        assert constructive <= 100.0 * closed

    def test_single_point_grid_at_optimum(self, disk_constants):
        from blowup_bounds.bounds import _constant_chain

        inp = BoundsInput(q=2.0, m0=1.0, gamma1_area=1.0, alpha=0.0, constants=disk_constants)
        ch = _constant_chain(inp)
        a = ch["C1"] * ch["N_alpha"] / (inp.q * inp.m0 * inp.gamma1_area ** 0.0)
        t_opt, f_max = maximize_affine_power(a, 1.0 - ch["N_alpha"])
        value, trace = lower_bound_constructive(inp, t_star_grid=[t_opt])
        proof_value = 9 * inp.q / (10 * (inp.q - 1)) * f_max
        assert value >= proof_value - 1e-12
        assert trace is not None and trace.t_star == pytest.approx(t_opt)


class TestUpperBound:
    def test_disk_constant_data(self):
        # unit disk, u0 = 1, q = 2, full boundary: pi / (1 * 2 pi) = 1/2
        assert upper_bound(2.0, 2 * math.pi, math.pi) == pytest.approx(0.5, rel=1e-15)

    def test_m0_scaling_constant_data(self):
        # u0 = M0 constant: T_upper = |Omega| / ((q-1) |G1| M0^(q-1))
        q, area, vol = 3.0, 1.0, math.pi
        vals = [upper_bound(q, area, vol * m0 ** (1 - q)) for m0 in (1.0, 2.0)]
        assert vals[0] / vals[1] == pytest.approx(2.0 ** (q - 1), rel=1e-12)

    def test_area_scaling(self):
        assert upper_bound(2.0, 0.1, 1.0) / upper_bound(2.0, 0.2, 1.0) == pytest.approx(2.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            upper_bound(2.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            upper_bound(2.0, 1.0, -3.0)
        with pytest.raises(ValueError):
            upper_bound(1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            upper_bound(2.0, 1.0, math.inf)


class TestLogLowerBound:
    def test_not_applicable(self):
        # bracket <= 0: large M0 or large |Gamma_1|
        assert lower_bound_log(2.0, 100.0, 1.0, 2) is None

    def test_worked_value(self):
        # N = 2, C = 1, q = 2, M0 = 1, |G1| = e^-4: bracket = 4, value = 2
        val = lower_bound_log(2.0, 1.0, math.exp(-4.0), 2, c_free=1.0)
        assert val == pytest.approx(2.0, rel=1e-12)

    def test_small_area_order(self):
        v1 = lower_bound_log(2.0, 1.0, math.exp(-4.0), 2)
        v2 = lower_bound_log(2.0, 1.0, math.exp(-8.0), 2)
        assert v2 / v1 == pytest.approx(math.sqrt(2.0), rel=1e-12)


class TestBoundsReport:
    def test_report_round_trip(self, disk_constants):
        inp = BoundsInput(q=2.0, m0=1.0, gamma1_area=1.0, alpha=0.3, constants=disk_constants)
        report = compute_report(inp, u0_integral=math.pi)
        again = BoundsReport.from_dict(report.to_dict())
        assert again == report
        assert report.upper is not None
        assert report.constants_used["E_q"] == pytest.approx(0.25)

    def test_ordering_against_upper(self, disk_constants):
        # both bound the same T* when u0 is the constant M0
        vol, area = math.pi, 2 * math.pi
        for q in (1.5, 2.0, 4.0):
            for m0 in (0.5, 1.0, 2.0):
                inp = BoundsInput(q=q, m0=m0, gamma1_area=area, alpha=0.0, constants=disk_constants)
                up = upper_bound(q, area, vol * m0 ** (1 - q))
                assert lower_bound_closed(inp) <= up

    def test_invariant_violation_detected(self, disk_constants):
        with pytest.raises(ValueError):
            BoundsReport(
                lower_new_closed=1.0,
                lower_new_constructive=0.5,
                lower_log=None,
                lower_log_c_free=1.0,
                upper=None,
                constants_used={},
                inputs={},
            )
