import pytest

from lorenz_renorm.fixed_point import evaluate_gap, find_critical_r

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def rho2_solution():
    """Full pipeline at rho = 2 with default settings (about 20 s)."""
    return find_critical_r(2.0)


@pytest.fixture(scope="session")
def rho2_anchor():
    """Converged operator fixed point at r = 0.453, rho = 2, from identity seeds."""
    return evaluate_gap(0.453, 2.0)


@pytest.fixture
def acceptance_line(request, capsys):
    """Print one PASS/FAIL line for a criterion and repeat it in the terminal summary."""
    def emit(label: str, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {label}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash.setdefault(_ACCEPTANCE, []).append(line)
        with capsys.disabled():
            print(f"\n{line}")
    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
