"""Text exports of a :class:`MILPModel` for cross-checking with external solvers.

``write_mps`` emits fixed-field MPS with generated eight-character names;
``write_lp`` emits the CPLEX LP format with the model's own names, sanitized.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .problem import EQ, GE, LE, MILPModel

_MPS_SENSE = {LE: "L", EQ: "E", GE: "G"}
_LP_SENSE = {LE: "<=", EQ: "=", GE: ">="}


def _num(v: float, width: int = 12) -> str:
    """Shortest general-format rendering of ``v`` within ``width`` characters."""
    for digits in range(17, 0, -1):
        s = f"{v:.{digits}g}"
        if len(s) <= width:
            return s
    raise ValueError(f"cannot format {v} in {width} characters")


def _field_line(code: str, name: str, pairs=()) -> str:
    line = f" {code:<2} {name:<8}"
    for k, (n, v) in enumerate(pairs):
        line += ("  " if k == 0 else "   ") + f"{n:<8}  {_num(v):>12}"
    return line.rstrip()


def mps_string(model: MILPModel, name: str = "MODEL") -> str:
    n, m = model.n_vars, model.n_constraints
    cols = [f"C{j:07d}" for j in range(n)]
    rows = [f"R{i:07d}" for i in range(m)]
    out = [f"NAME          {name[:8]}", "ROWS", " N  COST"]
    out += [f" {_MPS_SENSE[s]}  {r}" for s, r in zip(model.senses, rows)]
    out.append("COLUMNS")
    A = model.A.tocsc()
    in_int = False
    for j in range(n):
        if bool(model.binary[j]) != in_int:
            in_int = not in_int
            tag = "'INTORG'" if in_int else "'INTEND'"
            out.append(f"    MARKER                 'MARKER'                 {tag}")
        entries = []
        if model.c[j] != 0:
            entries.append(("COST", float(model.c[j])))
        lo, hi = A.indptr[j], A.indptr[j + 1]
        entries += [(rows[i], float(v)) for i, v in zip(A.indices[lo:hi], A.data[lo:hi]) if v != 0]
        if not entries:
            entries = [("COST", 0.0)]
        for k in range(0, len(entries), 2):
            out.append(_field_line("", cols[j], entries[k:k + 2]))
    if in_int:
        out.append("    MARKER                 'MARKER'                 'INTEND'")
    out.append("RHS")
    rhs = [(rows[i], float(v)) for i, v in enumerate(model.rhs) if v != 0]
    if model.objective_constant:
        rhs.insert(0, ("COST", -float(model.objective_constant)))
    for k in range(0, len(rhs), 2):
        out.append(_field_line("", "RHS", rhs[k:k + 2]))
    out.append("BOUNDS")
    for j in range(n):
        out += _mps_bounds(cols[j], float(model.lb[j]), float(model.ub[j]), bool(model.binary[j]))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def _mps_bounds(col: str, lo: float, hi: float, binary: bool) -> list[str]:
    if binary and lo == 0 and hi == 1:
        return [f" BV BND       {col}"]
    if lo == hi:
        return [_field_line("FX", "BND", [(col, lo)])]
    lines = []
    if lo == -np.inf:
        lines.append(f" MI BND       {col}")
    elif lo != 0:
        lines.append(_field_line("LO", "BND", [(col, lo)]))
    if hi != np.inf:
        lines.append(_field_line("UP", "BND", [(col, hi)]))
    return lines


def write_mps(model: MILPModel, path, name: str = "MODEL") -> None:
    Path(path).write_text(mps_string(model, name))


def _sanitize(names, prefix: str) -> list[str]:
    clean = [re.sub(r"[^A-Za-z0-9_.]", "_", str(nm)) for nm in names]
    clean = [c if c and not c[0].isdigit() and c[0] != "." else f"{prefix}{c}" for c in clean]
    if len(set(clean)) != len(clean) or len(clean) != len(names):
        return [f"{prefix}{k}" for k in range(len(names))]
    return clean


def _lp_terms(coefs, names) -> str:
    parts = []
    for v, nm in zip(coefs, names):
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_num(abs(float(v)), 24)} {nm}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def lp_string(model: MILPModel) -> str:
    cols = _sanitize(model.names or [f"x{j}" for j in range(model.n_vars)], "x")
    rows = _sanitize(model.row_names or [f"c{i}" for i in range(model.n_constraints)], "c")
    nz = np.flatnonzero(model.c)
    obj = _lp_terms(model.c[nz], [cols[j] for j in nz])
    if model.objective_constant:
        k = float(model.objective_constant)
        obj += f" {'-' if k < 0 else '+'} {_num(abs(k), 24)}"
    out = ["Minimize", f" obj: {obj}", "Subject To"]
    A = model.A.tocsr()
    for i in range(model.n_constraints):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        terms = _lp_terms(A.data[lo:hi], [cols[j] for j in A.indices[lo:hi]])
        out.append(f" {rows[i]}: {terms} {_LP_SENSE[model.senses[i]]} {_num(float(model.rhs[i]), 24)}")
    out.append("Bounds")
    for j in range(model.n_vars):
        lo, hi = float(model.lb[j]), float(model.ub[j])
        if lo == hi:
            out.append(f" {cols[j]} = {_num(lo, 24)}")
        elif lo == -np.inf and hi == np.inf:
            out.append(f" {cols[j]} free")
        elif hi == np.inf:
            if lo != 0:
                out.append(f" {cols[j]} >= {_num(lo, 24)}")
        else:
            low = "-inf" if lo == -np.inf else _num(lo, 24)
            out.append(f" {low} <= {cols[j]} <= {_num(hi, 24)}")
    bins = [cols[j] for j in np.flatnonzero(model.binary)]
    if bins:
        out.append("Binary")
        out += [f" {nm}" for nm in bins]
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(model: MILPModel, path) -> None:
    Path(path).write_text(lp_string(model))
