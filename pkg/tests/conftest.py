"""Shared fixtures: benchmark models, one synthesis per model per session,
and the closed forms they are rigged to produce.

The planar benchmark is constructed so that the synthesis output is exactly

    P(t)  = [[5, cos t], [cos t, 5]]
    Pi(t) = [[3, sin t], [sin t, 3]]
    eta(t) = (cos t, sin t),  v0 = 0,  long-run cost 17/2

and the scalar benchmark reduces to algebra:

    P = Pi = sqrt(2) - 1,  eta = 1 - 1/sqrt(2),  v0 = -eta,
    value = sqrt(2) - 1/2, orbit mean 1/2, orbit variance 1/(2 sqrt(2)).
"""

import math

import numpy as np
import pytest

from mflq import builtin_model, periodic_moment_orbit, synthesize

SQ2 = math.sqrt(2.0)

SCALAR_P = SQ2 - 1.0
SCALAR_ETA = 1.0 - 1.0 / SQ2
SCALAR_V0 = 1.0 / SQ2 - 1.0
SCALAR_VALUE = SQ2 - 0.5
SCALAR_MEAN = 0.5
SCALAR_COV = 1.0 / (2.0 * SQ2)

PLANAR_VALUE = 8.5


def planar_P(t):
    return np.array([[5.0, math.cos(t)], [math.cos(t), 5.0]])


def planar_Pi(t):
    return np.array([[3.0, math.sin(t)], [math.sin(t), 3.0]])


def planar_eta(t):
    return np.array([math.cos(t), math.sin(t)])


@pytest.fixture(scope="session")
def planar_model():
    return builtin_model("example-5")


@pytest.fixture(scope="session")
def scalar_model():
    return builtin_model("scalar-sc1")


@pytest.fixture(scope="session")
def planar_synthesis(planar_model):
    return synthesize(planar_model, grid=2048)


@pytest.fixture(scope="session")
def scalar_synthesis(scalar_model):
    return synthesize(scalar_model, grid=1024)


@pytest.fixture(scope="session")
def planar_orbit(planar_model, planar_synthesis):
    return periodic_moment_orbit(
        planar_model, planar_synthesis.policy, grid=2048
    )


@pytest.fixture(scope="session")
def scalar_orbit(scalar_model, scalar_synthesis):
    return periodic_moment_orbit(
        scalar_model, scalar_synthesis.policy, grid=1024
    )
