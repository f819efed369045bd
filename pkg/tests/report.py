"""Shared collector for the per-criterion PASS/FAIL lines."""

LINES: list[str] = []


def record(number, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    LINES.append(line)
    print(line, flush=True)
    return ok
