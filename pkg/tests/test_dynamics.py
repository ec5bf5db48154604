"""Vehicle model checks: kinematics, controller, and conservation
properties, with closed-loop integration oracles."""

import math

import numpy as np
import pytest

from auvtrack import dynamics as dyn


PARAMS = dyn.AuvParams()


def drag_balance_tau(u: float) -> dyn.ControlInput:
    """Thrust exactly cancelling surge drag at speed u."""
    return dyn.ControlInput(tau_u=PARAMS.d_lin[0] * u + PARAMS.d_quad[0] * u * u)


# -- rotation matrix ---------------------------------------------------------

def test_rotation_matrix_zero_is_identity():
    assert np.array_equal(dyn.rotation_matrix(0.0), np.eye(3))


def test_rotation_matrix_quarter_turn():
    j = dyn.rotation_matrix(math.pi / 2.0)
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.abs(j - expected).max() < 1e-12


def test_rotation_matrix_orthogonal():
    for theta in np.linspace(-math.pi, math.pi, 37):
        j = dyn.rotation_matrix(theta)
        assert np.abs(j.T @ j - np.eye(3)).max() < 1e-12
        assert np.linalg.det(j) == pytest.approx(1.0, abs=1e-12)


# -- step --------------------------------------------------------------------

def test_zero_state_zero_torque_fixed_point():
    s = dyn.AuvState()
    assert dyn.step(s, dyn.ControlInput(), PARAMS) == s


def test_damping_decelerates():
    s = dyn.AuvState(u=1.5)
    for _ in range(30):
        s_next = dyn.step(s, dyn.ControlInput(), PARAMS)
        assert s_next.u < s.u
        s = s_next
    assert s.u > 0.0  # damping never reverses the direction of motion


def test_single_euler_step_advances_x_by_u_dt():
    s = dyn.AuvState(u=1.0, theta=0.0)
    s2 = dyn.step(s, drag_balance_tau(1.0), PARAMS)
    assert s2.x == pytest.approx(0.08, abs=1e-12)
    assert s2.u == pytest.approx(1.0, abs=1e-12)


def test_theta_wraps():
    s = dyn.AuvState(theta=math.pi - 0.01, w=1.0)
    s2 = dyn.step(s, dyn.ControlInput(), PARAMS)
    assert -math.pi < s2.theta <= math.pi
    assert s2.theta < 0.0  # wrapped across the branch cut


def test_velocity_caps_enforced():
    s = dyn.AuvState(u=2.39)
    s2 = dyn.step(s, dyn.ControlInput(tau_u=1e6), PARAMS)
    assert s2.u <= PARAMS.v_max


# -- controller ----------------------------------------------------------------

def test_equilibrium_tracking_error_stays_zero():
    s = dyn.AuvState(u=1.0)
    for _ in range(100):
        tau = dyn.velocity_controller(s, 1.0, 0.0, PARAMS)
        s = dyn.step(s, tau, PARAMS)
    assert abs(s.u - 1.0) < 1e-9
    assert abs(s.w) < 1e-12


def test_surge_step_response_settles_fast():
    s = dyn.AuvState()
    t = 0.0
    settle = None
    while t < 3.0:
        tau = dyn.velocity_controller(s, 1.2, 0.0, PARAMS)
        s = dyn.step(s, tau, PARAMS)
        t += PARAMS.dt
        if settle is None and abs(s.u - 1.2) <= 0.05 * 1.2:
            settle = t
    assert settle is not None and settle < 3.0


def test_out_of_range_commands_clamped():
    s = dyn.AuvState()
    tau = dyn.velocity_controller(s, 99.0, -PARAMS.w_max - 1.0, PARAMS)
    tau_at_caps = dyn.velocity_controller(s, PARAMS.v_max, -PARAMS.w_max, PARAMS)
    assert tau == tau_at_caps


# -- invariants ------------------------------------------------------------------

def test_energy_dissipation_unforced():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = dyn.AuvState(u=rng.uniform(-2.4, 2.4), v_sway=rng.uniform(-1, 1),
                         w=rng.uniform(-1, 1), theta=rng.uniform(-3, 3))
        for _ in range(20):
            s_next = dyn.step(s, dyn.ControlInput(), PARAMS)
            assert dyn.kinetic_energy(s_next, PARAMS) <= dyn.kinetic_energy(s, PARAMS) + 1e-12
            s = s_next


def test_rotation_invariance_of_trajectories():
    rng = np.random.default_rng(1)
    taus = [dyn.ControlInput(*rng.uniform(-5, 5, 3)) for _ in range(60)]
    phi = 1.1

    def run(s0):
        out = [s0]
        for tau in taus:
            out.append(dyn.step(out[-1], tau, PARAMS))
        return out

    base = run(dyn.AuvState(x=1.0, y=-2.0, theta=0.3, u=0.5, v_sway=0.1, w=-0.2))
    c, s_ = math.cos(phi), math.sin(phi)
    rotated = run(dyn.AuvState(x=c * 1.0 - s_ * -2.0, y=s_ * 1.0 + c * -2.0,
                               theta=dyn.wrap_angle(0.3 + phi), u=0.5, v_sway=0.1, w=-0.2))
    for a, b in zip(base, rotated):
        assert abs(c * a.x - s_ * a.y - b.x) < 1e-9
        assert abs(s_ * a.x + c * a.y - b.y) < 1e-9
        assert abs(dyn.wrap_angle(a.theta + phi) - b.theta) < 1e-9
        assert abs(a.u - b.u) < 1e-9 and abs(a.w - b.w) < 1e-9


def test_step_bit_determinism():
    s = dyn.AuvState(x=0.5, y=1.5, theta=0.7, u=1.1, v_sway=-0.2, w=0.4)
    tau = dyn.ControlInput(12.0, 0.0, -3.0)
    a, b = dyn.step(s, tau, PARAMS), dyn.step(s, tau, PARAMS)
    assert a == b


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        dyn.AuvParams(m11=-1.0)
    with pytest.raises(ValueError):
        dyn.AuvParams(dt=0.0)


def test_params_roundtrip():
    p = dyn.AuvParams(k_v=99.0)
    assert dyn.AuvParams.from_dict(p.to_dict()) == p
