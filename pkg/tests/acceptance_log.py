"""Collects one outcome line per acceptance criterion for the terminal summary."""

lines = {}


def record(number, title, ok, detail):
    lines[number] = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
