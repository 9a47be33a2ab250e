import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from datasurv.analytics import conserved_quantity, max_informed, susceptible_floor
from datasurv.errors import DivergenceError, InvalidParameterError
from datasurv.model import CompartmentState, ModelParams, ModelVariant
from datasurv.ode import (
    ClampWarning,
    Trajectory,
    final_state,
    integrate,
    integrate_batch,
    peak_informed,
)

FIG2 = ModelParams(b=0.4, c=0.15)
FIG2_INIT = CompartmentState(0.9, 0.1, 0.0)


@pytest.fixture(scope="module")
def fig2():
    return integrate("classic", FIG2, FIG2_INIT, 100.0, 0.01)


def _reference(b, c, s0, i0, t_eval):
    """Independent high-accuracy solution of the classic system."""
    sol = solve_ivp(
        lambda t, y: [-b * y[0] * y[1], b * y[0] * y[1] - c * y[1], c * y[1]],
        (0, t_eval[-1]), [s0, i0, 0.0], method="DOP853", rtol=1e-12, atol=1e-14, t_eval=t_eval,
    )
    return sol.y


def test_fig2_shape(fig2):
    t_peak, i_peak = peak_informed(fig2)
    assert 0 < t_peak < 100
    assert i_peak > 0.1
    assert fig2.i[-1] < 1e-3


def test_matches_independent_solver(fig2):
    ref = _reference(0.4, 0.15, 0.9, 0.1, fig2.t[::100])
    assert np.max(np.abs(fig2.s[::100] - ref[0])) < 1e-9
    assert np.max(np.abs(fig2.i[::100] - ref[1])) < 1e-9


def test_length_and_grid(fig2):
    assert len(fig2) == 10001
    assert fig2.t[0] == 0.0 and fig2.t[-1] == pytest.approx(100.0)
    assert np.all(np.diff(fig2.t) > 0)
    assert len(integrate("classic", FIG2, FIG2_INIT, 0.3, 0.1)) == 4
    assert len(integrate("classic", FIG2, FIG2_INIT, 1.05, 0.1)) == 11


@pytest.mark.parametrize("variant", list(ModelVariant))
def test_zero_state_stays_zero(variant):
    p = ModelParams(b=0.4, c=0.15, m=0.01, m_prime=0.02, l=0.0)
    traj = integrate(variant, p, CompartmentState(0, 0, 0), 10.0, 0.1)
    assert not traj.s.any() and not traj.i.any() and not traj.r.any()


def test_peak_against_closed_form():
    traj = integrate("classic", FIG2, FIG2_INIT, 100.0, 1e-3)
    assert abs(peak_informed(traj)[1] - max_informed(FIG2, 0.9, 0.1)) < 1e-4


def test_peak_monotone_decreasing_is_at_zero():
    traj = integrate("classic", ModelParams(b=0.1, c=0.5), FIG2_INIT, 20.0)
    assert peak_informed(traj) == (0.0, 0.1)


def test_peak_constant_ties_earliest():
    traj = Trajectory(np.arange(5.0), np.ones(5), np.full(5, 0.3), np.zeros(5))
    assert peak_informed(traj) == (0.0, 0.3)


def test_final_state_helpers(fig2):
    assert final_state(fig2).t == pytest.approx(100.0)
    assert final_state(integrate("classic", FIG2, FIG2_INIT, 0.0)) == FIG2_INIT
    long = integrate("classic", FIG2, FIG2_INIT, 500.0, 0.01)
    assert final_state(long).i < 1e-9
    assert final_state(long).s >= 0.9 * math.exp(-0.4 / 0.15)
    with pytest.raises(ValueError):
        final_state(Trajectory(np.empty(0), np.empty(0), np.empty(0), np.empty(0)))


def test_rk4_order():
    ref = integrate("classic", FIG2, FIG2_INIT, 20.0, 0.2 / 16)
    errs = []
    for dt in (0.4, 0.2):
        traj = integrate("classic", FIG2, FIG2_INIT, 20.0, dt)
        errs.append(abs(traj.i[-1] - ref.i[-1]))
    assert 8 <= errs[0] / errs[1] <= 32


@pytest.mark.parametrize("variant", ["classic", "death-s2"])
def test_conservation(variant):
    p = ModelParams(b=0.4, c=0.15, m=0.01)
    traj = integrate(variant, p, FIG2_INIT, 1000.0, 0.01)
    assert np.max(np.abs(traj.total - 1.0)) < 1e-9


def test_phase_space_identity(fig2):
    f = np.array([conserved_quantity(FIG2, s, i) for s, i in zip(fig2.s, fig2.i)])
    assert np.max(np.abs(f - f[0])) / abs(f[0]) < 1e-6


def test_classic_monotone(fig2):
    assert np.all(np.diff(fig2.s) <= 0)
    assert np.all(np.diff(fig2.r) >= 0)


def test_floor_holds_for_fig2():
    traj = integrate("classic", FIG2, FIG2_INIT, 500.0)
    assert traj.s[-1] >= susceptible_floor(FIG2, 0.9)


@pytest.mark.parametrize("variant", list(ModelVariant))
def test_batch_matches_scalar(variant):
    bs = np.array([0.4, 0.9, 0.05])
    cs = np.array([0.15, 0.3, 0.5])
    res = integrate_batch(variant, bs, cs, 0.9, 0.1, 0.0, m=0.01, m_prime=0.02, l=0.01, t_end=50.0, dt=0.05)
    for j in range(3):
        p = ModelParams(b=bs[j], c=cs[j], m=0.01, m_prime=0.02, l=0.01)
        traj = integrate(variant, p, FIG2_INIT, 50.0, 0.05)
        np.testing.assert_array_equal(res.history["i"][:, j], traj.i)
        np.testing.assert_array_equal(res.final[:, j], [traj.s[-1], traj.i[-1], traj.r[-1]])


def test_batch_final_only_keeps_no_history():
    res = integrate_batch("classic", 0.4, 0.15, 0.9, 0.1, t_end=1.0, keep=())
    assert res.history == {}
    assert res.final.shape == (3, 1)


def test_divergence_reports_time():
    with pytest.raises(DivergenceError) as exc:
        integrate("birth-death", ModelParams(b=1e300, c=0.0, l=1e300), CompartmentState(1e300, 1e300, 0.0), 1.0, 0.1)
    assert exc.value.t > 0


def test_clamp_warning_on_overshoot():
    # dt far too large for c: I overshoots below zero and is clamped
    with pytest.warns(ClampWarning):
        traj = integrate("classic", ModelParams(b=0.0, c=50.0), FIG2_INIT, 1.0, 0.1)
    assert np.all(traj.i >= 0)
    assert traj.max_clamp > 1e-6


@pytest.mark.parametrize("dt", [0.0, -0.1, math.nan])
def test_bad_dt(dt):
    with pytest.raises(InvalidParameterError):
        integrate("classic", FIG2, FIG2_INIT, 1.0, dt)


def test_csv_roundtrip(tmp_path, fig2):
    path = tmp_path / "traj.csv"
    text = fig2.to_csv(path)
    assert text.splitlines()[0] == "t,s,i,r"
    back = Trajectory.from_csv(path)
    np.testing.assert_array_equal(back.i, fig2.i)
    np.testing.assert_array_equal(back.t, fig2.t)


def test_csv_empty_is_header_only():
    empty = Trajectory(np.empty(0), np.empty(0), np.empty(0), np.empty(0))
    assert empty.to_csv() == "t,s,i,r\n"


def test_trajectory_is_read_only(fig2):
    with pytest.raises(ValueError):
        fig2.i[0] = 1.0
