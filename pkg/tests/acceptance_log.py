"""Collects one line per acceptance criterion for the end-of-run summary."""

LINES = []


def record(number, name, ok, detail=""):
    line = f"[criterion {number:>2}] {'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    LINES.append(line)
    print(line)
    return ok
