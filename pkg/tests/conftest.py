import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.fixture
def synthetic_corpus(tmp_path):
    from groundline.synthetic import make_corpus

    return make_corpus(tmp_path / "corpus", n_videos=4, queries_per_video=2, seed=3)


@pytest.fixture
def criterion():
    """``criterion(label, ok, detail)`` records a pass/fail line, then asserts."""

    def record(label: str, ok: bool, detail: str = "") -> None:
        _ACCEPTANCE.append(("PASS" if ok else "FAIL", label, detail))
        assert ok, f"{label}: {detail}"

    return record


def skip_criterion(label: str, reason: str) -> None:
    _ACCEPTANCE.append(("SKIP", label, reason))
    pytest.skip(reason)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for status, label, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[1].split()[0][2:])):
        terminalreporter.write_line(f"{status}  {label}  {detail}".rstrip())
