import pytest

from cases import quadratic_pair, identical_pair

_acceptance: dict[str, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def pair():
    return quadratic_pair()[0]


@pytest.fixture(scope="session")
def conn():
    return quadratic_pair()[1]


@pytest.fixture(scope="session")
def same():
    """Identical fluxes u^2/2 on both sides with the critical connection."""
    return identical_pair()


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid or "::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or report.failed:
        detail = dict(report.user_properties).get("detail", "")
        if report.failed and not detail:
            detail = report.longrepr.reprcrash.message if hasattr(report.longrepr, "reprcrash") else "error"
        name = report.nodeid.split("::test_criterion_")[1]
        _acceptance[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        status, detail = _acceptance[name]
        num, _, label = name.partition("_")
        terminalreporter.write_line(f"criterion {int(num):2d} {status}  {label.replace('_', ' ')}: {detail}")
