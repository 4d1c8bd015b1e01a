"""Directional checks over an EvalTable and a plain-text summary."""
from __future__ import annotations

from dataclasses import dataclass

from .evaluation import EvalTable

# Published mean CCR / EER (%) on the 89-subject walking corpus,
# keyed by (axis, feature set, classifier).
PUBLISHED_TABLE = {
    ("X", 1, "lda"): (81.26, 18.72), ("X", 1, "svm"): (81.37, 18.61),
    ("X", 2, "lda"): (74.97, 25.15), ("X", 2, "svm"): (75.90, 24.25),
    ("X", 3, "lda"): (83.48, 16.40), ("X", 3, "svm"): (83.12, 16.79),
    ("Y", 1, "lda"): (87.47, 12.66), ("Y", 1, "svm"): (87.70, 12.42),
    ("Y", 2, "lda"): (85.00, 15.11), ("Y", 2, "svm"): (85.33, 14.77),
    ("Y", 3, "lda"): (90.12, 9.97), ("Y", 3, "svm"): (90.51, 9.58),
    ("Z", 1, "lda"): (86.74, 13.45), ("Z", 1, "svm"): (86.68, 13.45),
    ("Z", 2, "lda"): (80.05, 20.15), ("Z", 2, "svm"): (81.41, 18.76),
    ("Z", 3, "lda"): (89.43, 10.65), ("Z", 3, "svm"): (89.06, 11.02),
}


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def amplitude_beats_interval(table: EvalTable, margin: float = 0.0) -> list[Check]:
    """Set 1 (amplitudes) mean CCR exceeds Set 2 (intervals) by more than ``margin``."""
    checks = []
    for r1 in table.rows:
        if r1.set != 1:
            continue
        try:
            r2 = table.get(r1.axis, 2, r1.classifier)
        except KeyError:
            continue
        gap = r1.mean_ccr - r2.mean_ccr
        checks.append(Check(f"amplitude>interval Acc_{r1.axis} {r1.classifier.upper()}", gap > margin,
                            f"Set1 {r1.mean_ccr:.2f} vs Set2 {r2.mean_ccr:.2f} (gap {gap:+.2f})"))
    return checks


def y_and_z_beat_x(table: EvalTable) -> list[Check]:
    checks = []
    for rx in table.rows:
        if rx.axis != "X":
            continue
        for other in ("Y", "Z"):
            try:
                ro = table.get(other, rx.set, rx.classifier)
            except KeyError:
                continue
            checks.append(Check(f"Acc_{other}>Acc_X Set{rx.set} {rx.classifier.upper()}",
                                ro.mean_ccr > rx.mean_ccr,
                                f"{ro.mean_ccr:.2f} vs {rx.mean_ccr:.2f}"))
    return checks


def format_report(table: EvalTable) -> str:
    lines = ["Mean CCR % (mean EER %) over ordered subject pairs", "", table.format_text(), ""]
    failed = sum(r.n_failed for r in table.rows)
    if failed:
        lines += [f"WARNING: {failed} pair experiments failed and are excluded from the means", ""]
    lines.append("Amplitude features vs interval features:")
    lines += ["  " + c.line() for c in amplitude_beats_interval(table)]
    lines.append("")
    lines.append("Acc_Y and Acc_Z vs Acc_X:")
    lines += ["  " + c.line() for c in y_and_z_beat_x(table)]
    lines.append("")
    lines.append("Difference to published values (CCR, EER points):")
    for r in table.rows:
        ref = PUBLISHED_TABLE.get((r.axis, r.set, r.classifier))
        if ref is not None:
            lines.append(f"  Acc_{r.axis} Set{r.set} {r.classifier.upper()}: "
                         f"CCR {r.mean_ccr - ref[0]:+.2f}, EER {r.mean_eer - ref[1]:+.2f} "
                         f"(published {ref[0]:.2f} ({ref[1]:.2f}))")
    return "\n".join(lines) + "\n"
