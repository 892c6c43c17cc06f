"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

LINES = []


def record(criterion, passed, detail=""):
    line = f"{criterion:<22} {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
    LINES.append(line)
    print(line)
    return passed
