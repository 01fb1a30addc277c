"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(number: int, ok: bool, summary: str) -> bool:
    LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {number}: {summary}")
    print(LINES[-1])
    return ok
