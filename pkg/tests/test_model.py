import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mflq import (
    FeedbackPolicy,
    MatrixCurve,
    SizeMismatch,
    TrigPolynomial,
    ValidationError,
    builtin_model,
    check_cost_coercivity,
    closed_loop_matrices,
    eval_coefficients,
)

TAU = 2.0 * math.pi


def _const_model(**overrides):
    from mflq import PeriodicModel

    c = lambda rows: MatrixCurve.constant(rows, 1.0)
    fields = dict(
        tau=1.0, n=2, m=1,
        A=c([[-1.0, 0.0], [0.0, -1.0]]),
        Abar=c([[0.0, 0.0], [0.0, 0.0]]),
        B=c([[1.0], [0.0]]),
        Bbar=c([[0.0], [0.0]]),
        C=c([[0.0, 0.0], [0.0, 0.0]]),
        Cbar=c([[0.0, 0.0], [0.0, 0.0]]),
        D=c([[0.0], [0.0]]),
        Dbar=c([[0.0], [0.0]]),
        b=c([[0.0], [0.0]]),
        sigma=c([[1.0], [0.0]]),
        Q=c([[1.0, 0.0], [0.0, 1.0]]),
        Qbar=c([[0.0, 0.0], [0.0, 0.0]]),
        S=c([[0.0, 0.0]]),
        Sbar=c([[0.0, 0.0]]),
        R=c([[1.0]]),
        Rbar=c([[0.0]]),
        q=c([[0.0], [0.0]]),
        rho=c([[0.0]]),
        name="toy",
    )
    fields.update(overrides)
    return PeriodicModel(**fields)


def test_model_shape_validation():
    c = lambda rows: MatrixCurve.constant(rows, 1.0)
    with pytest.raises((SizeMismatch, ValidationError)):
        _const_model(B=c([[1.0, 0.0], [0.0, 1.0]]))  # (n, m) expected
    with pytest.raises((SizeMismatch, ValidationError)):
        _const_model(Q=c([[1.0]]))
    with pytest.raises((SizeMismatch, ValidationError)):
        _const_model(sigma=c([[1.0, 0.0]]))


def test_period_mismatch_rejected():
    bad = MatrixCurve.constant([[-1.0, 0.0], [0.0, -1.0]], 2.0)
    with pytest.raises(ValidationError):
        _const_model(A=bad)


def test_policy_accessors(planar_model):
    pol = FeedbackPolicy(
        theta=MatrixCurve.constant([[-1.0, 0.0], [0.0, -1.0]], TAU),
        thetabar=MatrixCurve.constant([[0.5, 0.0], [0.0, 0.5]], TAU),
        v=MatrixCurve.constant([[0.25], [0.0]], TAU),
        name="unit",
    )
    assert pol.shape == (2, 2)
    assert pol.v_at(1.0).shape == (2,)
    assert np.allclose(
        pol.theta_hat_at(0.3), pol.theta_at(0.3) + pol.thetabar_at(0.3)
    )


def test_policy_shape_validation():
    with pytest.raises((SizeMismatch, ValidationError)):
        FeedbackPolicy(
            theta=MatrixCurve.constant([[-1.0, 0.0]], TAU),
            thetabar=MatrixCurve.constant([[0.0, 0.0], [0.0, 0.0]], TAU),
            v=MatrixCurve.constant([[0.0], [0.0]], TAU),
        )


@settings(max_examples=50, deadline=None)
@given(t=st.floats(-10.0, 10.0, allow_nan=False))
def test_hat_identities(t):
    model = builtin_model("example-5")
    pol = FeedbackPolicy(
        theta=MatrixCurve.from_entries(
            [[-2.0, TrigPolynomial(period=TAU, harmonics=(1,),
                                   cos_coefs=(0.7,), sin_coefs=(0.0,))],
             [0.0, -2.0]], TAU),
        thetabar=MatrixCurve.constant([[0.1, 0.0], [0.0, -0.3]], TAU),
        v=MatrixCurve.constant([[0.2], [0.0]], TAU),
    )
    s = eval_coefficients(model, t, policy=pol)
    assert np.allclose(s.A_hat, s.A + s.Abar, atol=1e-14)
    assert np.allclose(s.B_hat, s.B + s.Bbar, atol=1e-14)
    assert np.allclose(s.C_hat, s.C + s.Cbar, atol=1e-14)
    assert np.allclose(s.D_hat, s.D + s.Dbar, atol=1e-14)
    assert np.allclose(s.Q_hat, s.Q + s.Qbar, atol=1e-14)
    assert np.allclose(s.S_hat, s.S + s.Sbar, atol=1e-14)
    assert np.allclose(s.R_hat, s.R + s.Rbar, atol=1e-14)
    assert np.allclose(s.Theta_hat, s.Theta + s.Thetabar, atol=1e-14)


def test_weight_samples_are_symmetric(planar_model):
    for t in (0.0, 0.9, 3.3):
        s = eval_coefficients(planar_model, t)
        assert np.array_equal(s.Q, s.Q.T)
        assert np.array_equal(s.R, s.R.T)
        assert np.array_equal(s.Qbar, s.Qbar.T)


def test_closed_loop_assembly(planar_model):
    pol = FeedbackPolicy(
        theta=MatrixCurve.constant([[-1.0, 0.0], [0.0, -1.0]], TAU),
        thetabar=MatrixCurve.constant([[0.0, 0.0], [0.0, 0.0]], TAU),
        v=MatrixCurve.constant([[0.0], [0.0]], TAU),
    )
    s = eval_coefficients(planar_model, 0.0, policy=pol)
    cl = closed_loop_matrices(s)
    # B = I, Bbar = 0, theta = -I: state drift A - I, mean block Abar
    assert np.allclose(cl.drift_state, s.A - np.eye(2), atol=1e-14)
    assert np.allclose(cl.drift_mean, s.Abar, atol=1e-14)
    assert np.allclose(cl.drift_affine, s.b, atol=1e-14)
    # D = 0: diffusion is untouched by the feedback
    assert np.allclose(cl.diff_state, s.C, atol=1e-14)
    assert np.allclose(cl.diff_mean, s.Cbar, atol=1e-14)
    assert np.allclose(cl.diff_affine, s.sigma, atol=1e-14)


def test_coercivity_report(planar_model, scalar_model):
    rep = check_cost_coercivity(planar_model)
    assert rep.passed
    assert rep.grid_size == 2048
    assert rep.threshold == 1e-8
    assert rep.min_eig_r > 0.9  # R = I along the whole period
    rep2 = check_cost_coercivity(scalar_model, grid_points=64)
    assert rep2.passed


def test_coercivity_flags_indefinite_weights():
    bad = _const_model(
        Q=MatrixCurve.constant([[-1.0, 0.0], [0.0, 1.0]], 1.0)
    )
    rep = check_cost_coercivity(bad)
    assert not rep.passed
