import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from conftest import FIXTURES, frame, solution, spec_of
from reflow import fd
from reflow.liecore import bracket, build_lagrangian_pair, build_space_form_pair, project
from reflow.loops import ConnectionField, GridChart, load_connection
from reflow.zerocurv import (IntegrabilityError, RankObstruction, _GL, _magnus6, closed_form_frame,
                             commuting_vacuum, frame_derivative_audit, integrate_frame, load_frame,
                             local_solution, mc_coefficients, mc_residual, path_independence_residual,
                             regularity_check, save_frame, su_det_residual, vacuum_solution)

SMALL = GridChart.uniform(2, 9, 0.05)


@pytest.mark.parametrize("name", ["s21", "s22", "h21", "l2"])
def test_commuting_vacuum_is_flat_but_degenerate(name):
    f = commuting_vacuum(spec_of(name), chart=SMALL)
    assert mc_residual(f).max() < 1e-12
    assert not regularity_check(f).ok


def test_abelian_vacuum_leaves_only_the_constant_coefficient():
    # regular constant data solve every power except lambda^0, which is 4 [c_1, c_2]
    f = vacuum_solution(spec_of("s21"), chart=SMALL)
    assert regularity_check(f).ok
    rep = mc_residual(f)
    assert max(abs(rep.residuals[p]) for p in (-2, -1, 1, 2)) < 1e-12
    coeff = mc_coefficients(f)[0][0, 0, 0]
    assert np.abs(coeff - 4 * bracket(f.c[0, 0, 0], f.c[0, 0, 1])).max() < 1e-12
    assert rep.residuals[0] > 0.1


@pytest.mark.parametrize("make", [vacuum_solution, local_solution])
def test_rank_obstruction(make):
    with pytest.raises(RankObstruction) as err:
        make(build_space_form_pair(3, 1))
    assert str(err.value) == "obstructed: n=3 > rank=2"
    assert err.value.n == 3 and err.value.rank == 2


@pytest.mark.parametrize("name", ["s21", "s22", "h21", "l2"])
def test_local_solution_is_regular_and_flat(name):
    f = solution(name)
    rep = mc_residual(f, order=4)
    assert rep.max() < 1e-5
    # the curved-flat coefficient is algebraic, so it holds to rounding
    assert rep.residuals[2] < 1e-12 and rep.residuals[-2] < 1e-12
    assert regularity_check(f).ok


def test_local_solution_is_deterministic():
    a = local_solution(spec_of("s21"), GridChart.uniform(2, 17, 0.05), seed=3)
    b = local_solution(spec_of("s21"), GridChart.uniform(2, 17, 0.05), seed=3)
    assert np.array_equal(a.c, b.c) and np.array_equal(a.b, b.b)


def test_local_solution_checks_chart_dimension():
    with pytest.raises(ValueError):
        local_solution(spec_of("s21"), GridChart.uniform(3, 9, 0.05))


@pytest.mark.parametrize("name,lam", [("s21", 2.0), ("h21", 3.0), ("l2", 0.5)])
def test_frame_matches_closed_form_for_commuting_data(name, lam):
    f = commuting_vacuum(spec_of(name), chart=GridChart.uniform(2, 33, 0.05))
    assert np.abs(integrate_frame(f, lam).F - closed_form_frame(f, lam).F).max() < 1e-9


def test_closed_form_needs_commuting_data():
    with pytest.raises(ValueError):
        closed_form_frame(vacuum_solution(spec_of("s22"), chart=SMALL), 2.0)


@pytest.mark.parametrize("name", ["s21", "h21", "l2"])
def test_frame_is_path_independent_and_form_preserving(name):
    f = solution(name)
    assert path_independence_residual(f, 2.0) < 1e-8
    F = frame(name, 2.0)
    assert F.form_drift() < 1e-8
    assert frame_derivative_audit(F, f, order=6) < 1e-6


def test_lagrangian_frame_stays_in_su():
    F = frame("l2", 3.0)
    assert su_det_residual(F) < 1e-10
    assert np.abs(F.F @ F.spec.J0 - F.spec.J0 @ F.F).max() < 1e-10


def test_tangent_plus_normal_connection_does_not_depend_on_lambda():
    spec = spec_of("s21")
    f = local_solution(spec, a_scale=0.3)
    assert np.abs(f.a).max() > 0.1
    for lam in (1.0, 2.0, 3.0):
        F = integrate_frame(f, lam)
        for i in range(2):
            pull = F.inverse() @ fd.diff(F.F, 0.05, i, 6)
            err = np.abs(project(pull, spec, "pp") - f.a[..., i, :, :])[3:-3, 3:-3].max()
            assert err < 1e-8


def test_integration_refuses_non_flat_data():
    f = load_connection(FIXTURES / "defect_bracket.rfc")
    with pytest.raises(IntegrabilityError):
        integrate_frame(f, 2.0, mc_tol=1e-5)


def test_frame_round_trip(tmp_path):
    F = frame("l2", 3.0)
    save_frame(F, tmp_path / "f.rff")
    G = load_frame(tmp_path / "f.rff")
    assert np.array_equal(F.F, G.F) and G.lam == 3.0 and G.axis_order == F.axis_order


def test_magnus_step_is_sixth_order():
    rng = np.random.default_rng(0)
    A0, A1 = rng.standard_normal((2, 4, 4))

    def A(x):
        return A0 + np.sin(2 * x) * A1

    def run(N):
        h, G = 1.0 / N, np.eye(4)
        for i in range(N):
            G = G @ expm(_magnus6(*(A(i * h + c * h) for c in _GL), h))
        return G

    ref = run(256)
    e1, e2 = np.abs(run(8) - ref).max(), np.abs(run(16) - ref).max()
    assert np.log2(e1 / e2) > 5.5


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.2, 5.0))
def test_constant_data_frames_preserve_the_form(seed, lam):
    spec = build_lagrangian_pair(2, hyperbolic=bool(seed % 2))
    f = commuting_vacuum(spec, seed=seed, chart=GridChart.uniform(2, 5, 0.1))
    assert integrate_frame(f, lam).form_drift() < 1e-12


def test_constant_field_sampler_broadcasts():
    spec = build_space_form_pair(2, 1)
    f = ConnectionField.constant(SMALL, spec, *(np.zeros((2, 4, 4)),) * 3)
    a, b, c = f.sampler(np.zeros((3, 7, 2)))
    assert a.shape == (3, 7, 2, 4, 4)
