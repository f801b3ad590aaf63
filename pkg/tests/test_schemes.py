import math

import numpy as np
import pytest

from iosscert import DomainError, box_grid, eval_point, parse_model
from iosscert.schemes import (
    ConsistencyBound,
    Scheme,
    consistency_bound,
    consistency_defect,
    defect_sweep,
    euler_step,
    jacobians_euler,
    jacobians_rk2,
    residual_r,
    rk2_step,
    scheme_jacobians_batch,
    step_batch,
)
from iosscert.systems import builtin_box

from conftest import random_points_in


def complex_step_jacobians(sys, scheme, x, u, d, tau, h=1e-200):
    """Jacobians of the step map by complex-step differentiation: an oracle
    independent of both the closed forms and the forward-AD tangents."""
    x = np.asarray(x, dtype=complex)
    u = np.asarray(u, dtype=complex).reshape(-1)
    d = np.asarray(d, dtype=complex).reshape(-1)

    def step(xc, uc):
        Xn, _ = step_batch(sys, scheme, xc[None], uc[None], d[None], tau,
                           dtype=np.complex128, track=False)
        return Xn[0]

    At = np.empty((sys.n, sys.n))
    for j in range(sys.n):
        xp = x.copy()
        xp[j] += 1j * h
        At[:, j] = step(xp, u).imag / h
    Bt = np.empty((sys.n, sys.q))
    for j in range(sys.q):
        up = u.copy()
        up[j] += 1j * h
        Bt[:, j] = step(x, up).imag / h
    return At, Bt


def test_euler_step_fixed_point(zero):
    assert np.array_equal(euler_step(zero, [0.7], [0.3], tau=5.0), [0.7])
    assert np.array_equal(rk2_step(zero, [0.7], [0.3], tau=5.0), [0.7])


def test_euler_step_hand_values(scalar_linear, reactor):
    assert euler_step(scalar_linear, [1.0], [0.0], tau=0.1)[0] == 0.9
    x = np.array([0.25, 0.3])
    f = np.array([-2 * 0.16 * 0.0625 + 2 * 0.0064 * 0.3,
                  0.16 * 0.0625 - 0.0064 * 0.3])
    out = euler_step(reactor, x, [0.0, 0.0, 0.0], tau=0.01)
    assert np.allclose(out, x + 0.01 * f, rtol=1e-14)


def test_rk2_step_hand_value(scalar_linear):
    # 1 - 0.1*(1 - 0.05) = 0.905
    assert rk2_step(scalar_linear, [1.0], [0.0], tau=0.1)[0] == pytest.approx(0.905, abs=1e-16)


def test_rk2_minus_euler_is_second_order(scalar_linear):
    for tau in (0.2, 0.05, 0.0125):
        for x in (1.0, -0.7):
            d = abs(rk2_step(scalar_linear, [x], [0.0], tau=tau)[0]
                    - euler_step(scalar_linear, [x], [0.0], tau=tau)[0])
            assert d == pytest.approx(tau ** 2 / 2 * abs(x), rel=1e-10)


def test_jacobians_euler_closed_form(scalar_linear):
    pe = eval_point(scalar_linear, [0.4], [0.2])
    At, Bt = jacobians_euler(pe, 0.1)
    assert At[0, 0] == pytest.approx(0.9, abs=1e-16)
    assert Bt[0, 0] == pytest.approx(0.1, abs=1e-17)


def test_jacobians_rk2_hand_value(scalar_linear):
    At, Bt = jacobians_rk2(scalar_linear, [1.0], [0.0], tau=0.1)
    assert At[0, 0] == pytest.approx(0.905, abs=1e-15)
    assert Bt[0, 0] == pytest.approx(0.095, abs=1e-15)


def test_jacobians_rk2_stability_polynomial(lin2d):
    # constant A: the step matrix must be I + tau*A + tau^2/2 * A^2
    pe = eval_point(lin2d, [0.1, -0.2], [0.05])
    tau = 0.3
    At, Bt = jacobians_rk2(lin2d, [0.1, -0.2], [0.05], tau=tau)
    A = pe.A
    expected = np.eye(2) + tau * A + 0.5 * tau ** 2 * (A @ A)
    assert np.allclose(At, expected, rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("scheme", ["euler", "rk2"])
@pytest.mark.parametrize("name,bounds", [
    ("reactor", [(0.1, 0.5), (0.1, 0.5), (-0.1, 0.1), (-0.1, 0.1), (-0.1, 0.1)]),
    ("scalar_linear", [(-1, 1), (-1, 1)]),
    ("sine", [(-3, 3)]),
])
def test_closed_forms_match_complex_step_oracle(scheme, name, bounds):
    from iosscert import builtin_model

    sys = builtin_model(name)
    pts = random_points_in(bounds, 25, seed=len(name))
    for z in pts:
        x, u, d = z[:sys.n], z[sys.n:sys.n + sys.q], z[sys.n + sys.q:]
        tau = 0.07
        lin, At, Bt, ok = scheme_jacobians_batch(
            sys, scheme, x[None], u[None], d[None], tau)
        assert ok[0]
        At_o, Bt_o = complex_step_jacobians(sys, scheme, x, u, d, tau)
        scale = max(1.0, np.abs(At_o).max())
        assert np.abs(At[0] - At_o).max() <= 1e-12 * scale
        if sys.q:
            scale_b = max(1.0, np.abs(Bt_o).max())
            assert np.abs(Bt[0] - Bt_o).max() <= 1e-12 * scale_b


def test_euler_defect_vanishes(reactor, scalar_linear, sine):
    # tau >= 0.1: rounding floor well below 1e-14; at tau = 0.01 the
    # (A~-I)/tau quotient amplifies the diagonal's ulp by 1/tau, so the
    # attainable floor is ~1.1e-14 (see the acceptance gate at 1e-12)
    cases = [(reactor, [0.3, 0.2], [0.05, -0.05, 0.0]),
             (scalar_linear, [0.5], [-0.5]),
             (sine, [1.3], [])]
    for sys, x, u in cases:
        for tau in (1.0, 0.1):
            assert consistency_defect(sys, "euler", x, u, tau=tau) <= 1e-14
        assert consistency_defect(sys, "euler", x, u, tau=0.01) <= 2e-14


def test_rk2_defect_scalar_linear_hand_value(scalar_linear):
    d = consistency_defect(scalar_linear, "rk2", [1.0], [0.0], tau=0.1)
    assert d == pytest.approx(0.05, rel=1e-12)  # tau/2 for this system


def test_consistency_bound_euler():
    b = consistency_bound("euler", 2.0)
    assert b.rho(1.0) == 0.0
    assert math.isinf(b.tau0)


def test_consistency_bound_rk2_hand_values():
    b = consistency_bound("rk2", 1.0, L_df=1.0, c_f=2.0, delta0=0.05)
    assert b.tau0 == pytest.approx(0.1)
    assert b.rho(0.1) == pytest.approx(0.15, rel=1e-14)
    # linear system: L_df = 0, L_f = sqrt(2) gives rho(tau) = tau
    b2 = consistency_bound("rk2", math.sqrt(2), L_df=0.0, c_f=5.0, delta0=0.5, L_f_sq=2.0)
    assert b2.rho(0.1) == pytest.approx(0.1, abs=1e-17)


def test_consistency_bound_validation():
    with pytest.raises(ValueError, match="L_df and c_f"):
        consistency_bound("rk2", 1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        consistency_bound("rk2", 1.0, L_df=-1.0, c_f=1.0)
    with pytest.raises(ValueError, match="delta0"):
        consistency_bound("rk2", 1.0, L_df=1.0, c_f=1.0, delta0=0.0)
    with pytest.raises(ValueError, match="unknown scheme"):
        consistency_bound("rk3", 1.0)


def test_rk2_defect_bounded_by_rho_on_grid(reactor):
    from iosscert.pipeline import bound_from_constants, estimate_constants

    g = builtin_box("reactor", 6)
    consts = estimate_constants(reactor, g, "rk2", seed=0)
    bound = bound_from_constants("rk2", consts)
    for tau in (0.5, 0.1, 0.01):
        rep = defect_sweep(reactor, "rk2", g, tau, bound=bound)
        assert rep.domain_errors == 0
        assert rep.bound_satisfied
        assert rep.max_defect <= rep.rho_of_tau


def test_residual_euler_zero(reactor):
    r = residual_r(reactor, "euler", [0.3, 0.2], [0.0, 0.0, 0.0], tau=0.25)
    assert np.array_equal(r, [0.0, 0.0])


def test_residual_rk2_hand_value(scalar_linear):
    r = residual_r(scalar_linear, "rk2", [1.0], [0.0], tau=0.1)
    assert r[0] == pytest.approx(0.005, rel=1e-12)  # tau^2 x / 2


@pytest.mark.parametrize("name,x,u", [
    ("reactor", [0.3, 0.25], [0.02, -0.02, 0.0]),
])
def test_residual_rk2_richardson_ratio(name, x, u):
    from iosscert import builtin_model

    sys = builtin_model(name)
    taus = [0.2, 0.1, 0.05, 0.025]
    norms = [np.linalg.norm(residual_r(sys, "rk2", x, u, tau=t)) for t in taus]
    for a, b in zip(norms, norms[1:]):
        assert 3.5 <= a / b <= 4.5  # halving tau quarters the residual


def test_defect_sweep_report_fields(scalar_linear, square_grid):
    bound = consistency_bound("rk2", math.sqrt(2), L_df=0.0, c_f=2.0, delta0=0.5)
    rep = defect_sweep(scalar_linear, "rk2", square_grid, 0.1, bound=bound)
    d = rep.to_dict()
    assert set(d) >= {"scheme", "tau", "max_defect", "rho_of_tau", "bound_satisfied",
                      "argmax_point"}
    assert rep.bound_satisfied
    assert rep.max_defect == pytest.approx(0.05, rel=1e-10)
    assert rep.tau_within_tau0


def test_defect_sweep_flags_tau_beyond_tau0(scalar_linear, square_grid):
    bound = consistency_bound("rk2", math.sqrt(2), L_df=0.0, c_f=2.0, delta0=0.01)
    rep = defect_sweep(scalar_linear, "rk2", square_grid, 0.1, bound=bound)
    assert rep.tau_within_tau0 is False
    assert rep.bound_satisfied is False


def test_step_rejects_bad_tau(scalar_linear):
    with pytest.raises(ValueError, match="positive"):
        euler_step(scalar_linear, [1.0], [0.0], tau=0.0)
    with pytest.raises(ValueError, match="positive"):
        rk2_step(scalar_linear, [1.0], [0.0], tau=-1.0)


def test_step_domain_error_at_midpoint():
    # f pushes the RK2 midpoint below the sqrt domain
    sys = parse_model("dims 1 0 0 1\nf1 = -sqrt(x1) - 10\nh1 = x1\n")
    with pytest.raises(DomainError):
        rk2_step(sys, [0.1], tau=1.0)
    # Euler never evaluates the midpoint, so the same point is fine
    assert euler_step(sys, [0.1], tau=1.0)
