import pytest

from weakcoupling import (ProblemSpec, bump_perturbation, glued_power_profile, potential_from_profile,
                          smooth_tail_profile)

ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str):
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def critical_spec(p, N, kind="glued", R0=2.0, amplitude=1.0):
    phi = glued_power_profile(p, N, R0) if kind == "glued" else smooth_tail_profile(p, N)
    return ProblemSpec(p, N, potential_from_profile(phi), bump_perturbation(1.0, amplitude), 0.0, phi0=phi)


@pytest.fixture(scope="session")
def spec_2_3():
    return critical_spec(2.0, 3)


@pytest.fixture(scope="session")
def spec_2_4():
    return critical_spec(2.0, 4)


@pytest.fixture(scope="session")
def spec_2_5():
    return critical_spec(2.0, 5, "smooth")


@pytest.fixture(scope="session")
def spec_3_7():
    return critical_spec(3.0, 7)
