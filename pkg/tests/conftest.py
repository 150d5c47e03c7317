import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", parent=settings.get_profile("default"), max_examples=1000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> list of (part label, passed, detail)
_ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def criterion():
    """record(number, part, passed, detail) collects one acceptance sub-check."""

    def record(number: int, part: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.setdefault(number, []).append((part, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[number]
        ok = all(p for _, p, _ in parts)
        failed = [f"{label} ({detail})" for label, p, detail in parts if not p]
        tail = "; ".join(failed) if failed else "; ".join(f"{label}: {detail}" for label, _, detail in parts)
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {tail}")
