"""Built-in benchmark models resolvable by name.

Both models are rigged so the synthesis output has a closed form, which
makes them the backbone of the test suite: "example-5" is a planar model
with harmonic coefficients, "scalar-sc1" a constant scalar model.
"""

from __future__ import annotations

import math

from .curves import MatrixCurve, TrigPolynomial
from .errors import ValidationError
from .model import PeriodicModel

TAU_HARMONIC = 2.0 * math.pi


def _tp(const=0.0, cos1=0.0, sin1=0.0, cos2=0.0, sin2=0.0, cos3=0.0, sin3=0.0):
    harmonics, cos_coefs, sin_coefs = [], [], []
    for k, (a, b) in enumerate(((cos1, sin1), (cos2, sin2), (cos3, sin3)), start=1):
        if a != 0.0 or b != 0.0:
            harmonics.append(k)
            cos_coefs.append(a)
            sin_coefs.append(b)
    return TrigPolynomial(
        period=TAU_HARMONIC,
        const=const,
        harmonics=tuple(harmonics),
        cos_coefs=tuple(cos_coefs),
        sin_coefs=tuple(sin_coefs),
    )


def harmonic_benchmark() -> PeriodicModel:
    """Planar benchmark with degree-three trigonometric weights.

    The weights look arbitrary but are reverse-engineered so that the
    synthesized objects are low-order harmonics; the expected values live
    next to the tests that pin them.
    """
    tau = TAU_HARMONIC
    mk = lambda rows: MatrixCurve.from_entries(rows, tau)
    zero2 = MatrixCurve.constant([[0.0, 0.0], [0.0, 0.0]], tau)
    eye2 = MatrixCurve.constant([[1.0, 0.0], [0.0, 1.0]], tau)

    A = mk([[-1.0, _tp(cos1=1.0)], [0.0, -1.0]])
    Abar = mk([[0.0, _tp(cos1=-1.0, sin1=1.0)], [0.0, 0.0]])
    C = mk([[_tp(cos1=2.0), 0.0], [0.0, _tp(cos1=2.0)]])
    Cbar = mk(
        [
            [_tp(cos1=-2.0, sin1=1.0), 0.0],
            [0.0, _tp(cos1=-2.0, sin1=1.0)],
        ]
    )
    b = mk([[_tp(sin1=1.0)], [1.0]])
    sigma = mk([[_tp(cos1=1.0)], [1.0]])

    q12 = _tp(sin1=1.0, cos1=4.0, cos3=-1.0)
    Q = mk(
        [
            [_tp(const=25.5, cos2=-9.5), q12],
            [q12, _tp(const=24.5, cos2=-10.5)],
        ]
    )
    qb12 = _tp(sin1=4.0, cos1=-21.0 / 4.0, cos3=5.0 / 4.0)
    Qbar = mk(
        [
            [_tp(const=-12.5, cos2=11.5), qb12],
            [qb12, _tp(const=-12.5, cos2=13.5)],
        ]
    )
    q = mk(
        [
            [_tp(sin1=-3.0, cos1=1.0, sin2=-3.0)],
            [
                _tp(
                    const=-3.5,
                    sin1=-17.0 / 4.0,
                    cos1=-1.0,
                    sin2=-0.5,
                    cos2=0.5,
                    sin3=-0.25,
                )
            ],
        ]
    )
    rho = mk([[_tp(cos1=-1.0)], [_tp(sin1=-1.0)]])

    return PeriodicModel(
        tau=tau,
        n=2,
        m=2,
        A=A,
        Abar=Abar,
        B=eye2,
        Bbar=zero2,
        C=C,
        Cbar=Cbar,
        D=zero2,
        Dbar=zero2,
        b=b,
        sigma=sigma,
        Q=Q,
        Qbar=Qbar,
        S=zero2,
        Sbar=zero2,
        R=eye2,
        Rbar=zero2,
        q=q,
        rho=rho,
        name="example-5",
    )


def scalar_benchmark() -> PeriodicModel:
    """Constant scalar model; every synthesized quantity is algebraic."""
    tau = 1.0
    c = lambda v: MatrixCurve.constant([[v]], tau)
    return PeriodicModel(
        tau=tau,
        n=1,
        m=1,
        A=c(-1.0),
        Abar=c(0.0),
        B=c(1.0),
        Bbar=c(0.0),
        C=c(0.0),
        Cbar=c(0.0),
        D=c(0.0),
        Dbar=c(0.0),
        b=c(1.0),
        sigma=c(1.0),
        Q=c(1.0),
        Qbar=c(0.0),
        S=c(0.0),
        Sbar=c(0.0),
        R=c(1.0),
        Rbar=c(0.0),
        q=c(0.0),
        rho=c(0.0),
        name="scalar-sc1",
    )


BUILTIN_MODELS = {
    "example-5": harmonic_benchmark,
    "scalar-sc1": scalar_benchmark,
}


def builtin_model(name: str) -> PeriodicModel:
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_MODELS))
        raise ValidationError(f"unknown built-in model {name!r}; known: {known}")
    return factory()
