"""Shared record of acceptance outcomes, printed in the pytest summary."""

LINES: dict[int, str] = {}


def record(number: int, title: str, status: str, detail: str) -> None:
    line = f"{status} criterion {number:>2} {title}: {detail}"
    LINES[number] = line
    print(line)
