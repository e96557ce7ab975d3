import pytest

from autocal import GammaLevelModel, NullModel

from oracles import TABLE1_LEVELS, TABLE1_PROBS, TABLE1_VARIANCES

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def table1_model():
    return NullModel.from_arrays(TABLE1_LEVELS, TABLE1_PROBS, TABLE1_VARIANCES)


@pytest.fixture(scope="session")
def table1_gamma():
    return GammaLevelModel.table1()


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one pass/fail line per acceptance criterion."""

    def record(number, title, checks):
        failed = [desc for desc, ok in checks if not ok]
        status = "PASS" if not failed else "FAIL"
        line = f"[{status}] criterion {number}: {title}"
        if failed:
            line += " | failed: " + "; ".join(failed)
        else:
            line += " | " + "; ".join(desc for desc, _ in checks)
        _ACCEPTANCE.append(line)
        print(line)
        return failed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
