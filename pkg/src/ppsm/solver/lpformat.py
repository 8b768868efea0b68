"""CPLEX-LP export of models and the ``name value`` solution file format.

Variable names are ``x_<k>`` (product edges), ``si_<j>`` (injectivity slack
of source halfedge ``j``) and ``ss_<j>`` (surjectivity slack of target vertex
``j``). Product edges fixed to zero by pruning are omitted from the file.

Solution files hold one ``name value`` pair per line. Lines starting with
``#`` are comments; ``# status: <optimal|time_limit|infeasible|no_solution>``
and ``# objective: <value>`` are recognised metadata. Variables absent from
the file are zero.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, SolutionParseError

_TERMS_PER_LINE = 8


def _fmt(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _terms(coeffs, names):
    out = []
    for c, n in zip(coeffs, names):
        if c == 1:
            out.append(f"+ {n}")
        elif c == -1:
            out.append(f"- {n}")
        elif c < 0:
            out.append(f"- {_fmt(-c)} {n}")
        else:
            out.append(f"+ {_fmt(c)} {n}")
    return out


def _wrap(head, terms):
    lines = []
    for i in range(0, len(terms), _TERMS_PER_LINE):
        chunk = " ".join(terms[i:i + _TERMS_PER_LINE])
        lines.append((head if i == 0 else "   ") + " " + chunk)
    if not lines:
        lines.append(head)
    return lines


def row_names(model) -> list[str]:
    names = [f"row_{r}" for r in range(model.n_rows)]
    for fam, (a, b) in model.families.items():
        for r in range(a, b):
            names[r] = f"{fam.lower()}_{r - a}"
    return names


def export_lp(model, path) -> Path:
    """Write ``model`` in CPLEX LP format; output is deterministic."""
    path = Path(path)
    names = model.var_names()
    active = np.ones(model.n_vars, dtype=bool)
    active[:model.num_x] = ~model.fixed_zero
    out = ["\\ partial-partial matching model", "Minimize"]
    obj_idx = np.flatnonzero(active & (model.objective != 0))
    out += _wrap(" obj:", _terms(model.objective[obj_idx], [names[i] for i in obj_idx]))
    out.append("Subject To")
    A = model.A.tocsr()
    A.sort_indices()
    rnames = row_names(model)
    for r in range(model.n_rows):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        cols, vals = A.indices[lo:hi], A.data[lo:hi]
        keep = active[cols] & (vals != 0)
        cols, vals = cols[keep], vals[keep]
        rhs = float(model.rhs[r])
        if len(cols) == 0:
            ok = rhs == 0 if model.sense[r] == "=" else rhs <= 0
            if ok:
                continue
            raise ValueError(f"row {rnames[r]} is empty but infeasible")
        terms = _terms(vals, [names[c] for c in cols])
        lines = _wrap(f" {rnames[r]}:", terms)
        lines[-1] += f" {model.sense[r]} {_fmt(rhs)}"
        out += lines
    out.append("Binaries")
    act = [names[i] for i in np.flatnonzero(active)]
    for i in range(0, len(act), 10):
        out.append(" " + " ".join(act[i:i + 10]))
    out.append("End")
    path.write_text("\n".join(out) + "\n")
    return path


@dataclass
class LpProblem:
    """Minimal in-memory view of an LP file written by :func:`export_lp`."""

    objective: dict
    rows: list            # (name, {var: coef}, sense, rhs)
    binaries: list

    @property
    def variables(self) -> list[str]:
        seen = dict.fromkeys(self.binaries)
        for v in self.objective:
            seen.setdefault(v)
        for _, coeffs, _, _ in self.rows:
            for v in coeffs:
                seen.setdefault(v)
        return list(seen)


_TERM = re.compile(r"([+-])\s*(?:([0-9.eE+-]+)\s+)?([A-Za-z_][\w.]*)")


def _parse_expr(text):
    coeffs = {}
    text = text.strip()
    if text and text[0] not in "+-":
        text = "+ " + text
    for sign, num, name in _TERM.findall(text):
        c = float(num) if num else 1.0
        coeffs[name] = coeffs.get(name, 0.0) + (-c if sign == "-" else c)
    return coeffs


def read_lp(path) -> LpProblem:
    """Parse the subset of CPLEX LP produced by :func:`export_lp`."""
    section = None
    obj_text, rows_text, binaries = [], [], []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("\\", 1)[0].rstrip()
        if not line.strip():
            continue
        key = line.strip().lower()
        if key in ("minimize", "maximize"):
            section = "obj"
            continue
        if key == "subject to":
            section = "rows"
            continue
        if key in ("binaries", "binary"):
            section = "bin"
            continue
        if key == "end":
            break
        if section == "obj":
            obj_text.append(line)
        elif section == "rows":
            if line.startswith("   ") and rows_text:
                rows_text[-1] += " " + line.strip()
            else:
                rows_text.append(line.strip())
        elif section == "bin":
            binaries += line.split()
    obj = " ".join(obj_text).split(":", 1)[-1]
    rows = []
    for text in rows_text:
        name, expr = text.split(":", 1)
        m = re.search(r"(>=|<=|=)\s*([-+0-9.eE]+)\s*$", expr)
        if not m:
            raise SolutionParseError(f"cannot parse row {name!r}")
        rows.append((name.strip(), _parse_expr(expr[:m.start()]), m.group(1), float(m.group(2))))
    return LpProblem(_parse_expr(obj), rows, binaries)


_VAR = re.compile(r"(x|si|ss)_\d+")
_STATUS = re.compile(r"#\s*status\s*[:=]\s*(\w+)", re.I)
_OBJ = re.compile(r"#\s*objective(?:\s+value)?\s*[:=]\s*([-+0-9.eE]+|inf|nan)", re.I)


def read_solution_file(path) -> tuple[dict, str | None, float | None]:
    """Return ``(values, status, objective)`` from a solution file."""
    values, status, objective = {}, None, None
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SolutionParseError(f"cannot read solution file: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _STATUS.match(line)
            if m:
                status = m.group(1).lower()
            m = _OBJ.match(line)
            if m:
                objective = float(m.group(1))
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionParseError(f"line {lineno}: expected 'name value', got {raw!r}")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError as exc:
            raise SolutionParseError(f"line {lineno}: bad value {parts[1]!r}") from exc
    return values, status, objective


def write_solution_file(path, names, values, status: str | None = None, objective: float | None = None):
    lines = []
    if status is not None:
        lines.append(f"# status: {status}")
    if objective is not None:
        lines.append(f"# objective: {objective!r}")
    for n, v in zip(names, values):
        v = float(v)
        lines.append(f"{n} {_fmt(v) if v == round(v) else repr(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def assignment_from_values(model, values: dict) -> np.ndarray:
    """Map ``name -> value`` onto the model's variable vector (missing = 0)."""
    index = {n: i for i, n in enumerate(model.var_names())}
    z = np.zeros(model.n_vars)
    for name, v in values.items():
        i = index.get(name)
        if i is None:
            if _VAR.fullmatch(name):
                raise DimensionMismatch(f"variable {name!r} is out of range for this model")
            raise SolutionParseError(f"unknown variable {name!r} for this model")
        z[i] = v
    return z


def solution_to_values(model, assignment) -> tuple[list, list]:
    """Non-zero entries of an assignment as ``(names, values)``."""
    names = model.var_names()
    nz = np.flatnonzero(np.asarray(assignment))
    return [names[i] for i in nz], [assignment[i] for i in nz]
