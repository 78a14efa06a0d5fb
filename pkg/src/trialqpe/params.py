"""Asymptotic parameter formulas evaluated for a given dimension and accuracy.

Every entry is tagged with its formula. Infeasible or degenerate results are
flagged, never clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import CapacityError, RejectedInputError, TrialQPEError
from .grid_hamiltonian import build_grid
from .level_finder import default_r, asymptotic_t0
from .qpe_engine import DEFAULT_STATE_CAP, MAX_T
from .splitting import optimal_order
from .trial_set import build_trial_set


@dataclass
class ParameterRecord:
    values: dict = field(default_factory=dict)
    formulas: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def set(self, name, value, formula):
        self.values[name] = value
        self.formulas[name] = formula

    @property
    def feasible(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        return {
            "values": self.values,
            "formulas": self.formulas,
            "flags": list(self.flags),
            "feasible": self.feasible,
        }


def mesh_exponent(d: int, eps: float) -> int:
    return math.ceil(math.log2(d / eps) - 1e-12)


def asymptotic_N(d: int, eps: float, gamma: Optional[float] = None) -> int:
    if gamma is None:
        return 2 ** math.ceil(2 * math.log2(d / eps) - 1e-12)
    return 2 ** math.ceil((1 + gamma) * math.log2(d / eps) - 1e-12)


def asymptotic_b(d: int, eps: float, gamma: Optional[float] = None) -> int:
    coef = 5 if gamma is None else 3 + 2 * gamma
    return int(round(coef * mesh_exponent(d, eps))) + 7


def asymptotic_parameters(
    d: int,
    eps: float,
    M: float = 1.0,
    j: int = 1,
    gamma: Optional[float] = None,
    g_value: Optional[float] = None,
    chat: float = 1.0,
) -> ParameterRecord:
    """Mesh, accuracy bits, norm bound, ``t0``, ``r`` and ``k*`` for accuracy ``eps`` in dimension ``d``."""
    if not 0 < eps < 1:
        raise RejectedInputError("eps must lie in (0, 1)")
    if gamma is not None and not 0 < gamma < 1:
        raise RejectedInputError("gamma must lie in (0, 1)")
    rec = ParameterRecord()
    if gamma is None:
        rec.set("N", asymptotic_N(d, eps), "2^ceil(2 log2(d/eps))")
        rec.set("b", asymptotic_b(d, eps), "5 ceil(log2(d/eps)) + 7")
    else:
        rec.set("N", asymptotic_N(d, eps, gamma), "2^ceil((1+gamma) log2(d/eps))")
        rec.set("b", asymptotic_b(d, eps, gamma), "(3+2 gamma) ceil(log2(d/eps)) + 7")
        rec.set("gamma", gamma, "input")
    N = rec.values["N"]
    rec.set("h", 1.0 / (N + 1), "1/(N+1)")
    rec.set("R", 3.0 * d * (N + 1) ** 2, "3 d (N+1)^2")
    g = float(d**3) if g_value is None else float(g_value)
    rec.set("g", g, "d^3" if g_value is None else "input")
    t0 = asymptotic_t0(g)
    rec.set("t0", t0, "floor(log2(5 g + 2))")
    t = rec.values["b"] + t0
    rec.set("t", t, "b + t0")
    rec.set("k_star", optimal_order(g, eps, chat), "floor(sqrt(log_{25/3}(chat g^2/eps)/2) + 1/2)")
    rec.set("chat", chat, "input")
    if N < 2:
        rec.flags.append("degenerate: N < 2 leaves no interior grid")
        rec.set("trial_set_size", None, "unavailable")
        rec.set("r", None, "unavailable")
    else:
        try:
            size = build_trial_set(build_grid(d, N), M, j).cardinality
            rec.set("trial_set_size", size, "|S| at c = 2")
            rec.set("r", default_r(size, t0), "ceil(-ln(0.05) 4|S| / (3p))")
        except (CapacityError, TrialQPEError) as exc:
            rec.flags.append(f"trial set not computed: {exc}")
            rec.set("trial_set_size", None, "unavailable")
            rec.set("r", None, "unavailable")
        rec.set("qubits", d * math.ceil(math.log2(N)) + t, "d ceil(log2 N) + t")
        amplitudes = 2**t * N**d
        if amplitudes > DEFAULT_STATE_CAP:
            rec.flags.append(
                f"infeasible at desk scale: trotter statevector needs 2^t N^d = {amplitudes} amplitudes"
            )
    if t > MAX_T:
        rec.flags.append(f"infeasible at desk scale: t = {t} > {MAX_T}")
    return rec
