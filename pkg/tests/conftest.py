import pytest
from hypothesis import HealthCheck, settings

# numpy-heavy examples are slow to generate; timing is checked explicitly
# where it matters
settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def criterion(capsys):
    """Print one PASS/FAIL line for an acceptance criterion, then assert."""

    def report(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, f"criterion {number}: {detail}"

    return report
