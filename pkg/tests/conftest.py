"""Shared fixtures: the located torus and derived data, computed once."""

import pytest

from shrinktorus import gronwall, jacobi, shooting


@pytest.fixture(scope="session")
def certificate():
    return shooting.find_torus()


@pytest.fixture(scope="session")
def profile(certificate):
    return shooting.build_half_profile(certificate.a0, certificate.b0)


@pytest.fixture(scope="session")
def curve(profile):
    data = gronwall.CurveData.from_profile(profile)
    jacobi.attach_mode_data(data, profile)
    return data


@pytest.fixture(scope="session")
def mode_solutions(profile):
    top = jacobi.integrate_mode(jacobi.ModeProblem(0, profile, "top"))
    bot = jacobi.integrate_mode(jacobi.ModeProblem(0, profile, "bottom"))
    return top, bot


@pytest.fixture(scope="session")
def budgets(profile, curve, certificate, mode_solutions):
    top, bot = mode_solutions
    return jacobi.error_budgets(profile, curve, certificate, top, bot)


@pytest.fixture(scope="session")
def replay_items(curve):
    return gronwall.replay_ledger(curve)
