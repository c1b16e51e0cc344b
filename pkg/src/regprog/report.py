"""Plain-text reports: resource profiles against bounds, and space translation."""
from __future__ import annotations

from dataclasses import dataclass
from math import log2

from .builders import BuiltProgram
from .rpir import Program, resources


@dataclass(frozen=True)
class SpaceReport:
    """Space of a register program run on a catalytic machine, unit constants.

    pure = log2 t + log2 n + log2 |R|, catalytic = s * log2 |R|.
    """

    t: int
    s: int
    n: int
    field_size: int

    def __post_init__(self):
        if min(self.t, self.s, self.n, self.field_size) < 1:
            raise ValueError("t, s, n and |R| must all be positive")

    @property
    def pure_space_units(self) -> float:
        return log2(self.t) + log2(self.n) + log2(self.field_size)

    @property
    def catalytic_space_units(self) -> float:
        return self.s * log2(self.field_size)

    @classmethod
    def for_program(cls, P: Program) -> "SpaceReport":
        prof = resources(P)
        return cls(max(prof.instructions, 1), prof.total_registers, max(P.num_inputs, 1),
                   max(b.modulus for b in P.banks))

    def render(self) -> str:
        rows = [("time t", str(self.t)), ("registers s", str(self.s)),
                ("inputs n", str(self.n)), ("field size |R|", str(self.field_size)),
                ("pure space", f"{self.pure_space_units:.2f} units"),
                ("catalytic space", f"{self.catalytic_space_units:.2f} units")]
        return _table(("quantity", "value"), rows)


def _table(header, rows) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def profile_table(built: BuiltProgram) -> str:
    prof = built.profile
    rows = []
    checked = {name: (bound, exact, ok) for name, bound, _, exact, ok in built.check_bounds()}
    measured = {
        "calls_per_input": prof.max_calls,
        "registers": prof.total_registers,
        "basic_instructions": prof.basic_instructions,
        "payload_monomials": prof.payload_monomials,
        "access_groups": prof.access_groups,
    }
    for name, value in measured.items():
        if name in checked:
            bound, exact, ok = checked[name]
            rows.append((name, value, bound, "exact" if exact else "upper",
                         "PASS" if ok else "FAIL"))
        else:
            rows.append((name, value, "-", "-", "-"))
    text = _table(("metric", "measured", "bound", "kind", "status"), rows)
    calls = ", ".join(f"x{j + 1}:{c}" for j, c in enumerate(prof.recursive_calls))
    banks = ", ".join(f"{name}={size}" for name, size in prof.registers)
    extra = [f"calls per input: {calls or 'none'}", f"banks: {banks}"]
    for k, v in built.notes.items():
        extra.append(f"{k}: {v}")
    return text + "\n".join(extra) + "\n"
