"""Problem files, report documents and their rendering."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .exprcalc import ParseError, parse
from .polygeom import BlockSet
from .progmodel import MAX_M, ParametricProgram

REQUIRED_FIELDS = ("name", "n", "m", "objective", "constraints", "C", "xbar", "direction", "ybox")


class ProblemError(ValueError):
    """Invalid problem file; ``diagnostics`` lists located messages."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics))


@dataclass(frozen=True, eq=False)
class ProblemFile:
    name: str
    source: str
    program: ParametricProgram
    xbar: np.ndarray
    direction: np.ndarray
    references: dict
    raw: dict

    def summary(self) -> dict:
        return {
            "name": self.name,
            "file": self.source,
            "n": self.program.n,
            "m": self.program.m,
            "p": self.program.p,
            "objective": self.raw["objective"],
            "constraints": list(self.raw["constraints"]),
            "C": self.program.C.to_config(),
            "xbar": self.xbar.tolist(),
            "direction": self.direction.tolist(),
            "ybox": self.program.ybox.tolist(),
        }


def bundled_problem(name: str) -> Path | None:
    path = resources.files("dirval") / "problems" / name
    return Path(str(path)) if path.is_file() else None


def bundled_names() -> list[str]:
    folder = resources.files("dirval") / "problems"
    return sorted(p.name for p in folder.iterdir() if p.name.endswith(".prob"))


def resolve_path(path: str | Path) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    found = bundled_problem(p.name)
    if found is None:
        raise ProblemError([f"{path}: no such file"])
    return found


def _vector(value, length: int, field: str, diags: list[str]) -> np.ndarray | None:
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        diags.append(f"{field}: expected a list of {length} numbers")
        return None
    if arr.size != length:
        diags.append(f"{field}: expected {length} entries, got {arr.size}")
        return None
    return arr


def problem_from_dict(doc: dict, source: str = "<memory>") -> ProblemFile:
    diags: list[str] = []
    if not isinstance(doc, dict):
        raise ProblemError([f"{source}: top level must be an object"])
    for key in REQUIRED_FIELDS:
        if key not in doc:
            diags.append(f"{key}: missing field")
    if diags:
        raise ProblemError(diags)
    n, m = doc["n"], doc["m"]
    if not isinstance(n, int) or n < 1:
        diags.append(f"n: expected a positive integer, got {n!r}")
    if not isinstance(m, int) or not 1 <= m <= MAX_M:
        diags.append(f"m: expected an integer between 1 and {MAX_M}, got {m!r}")
    if diags:
        raise ProblemError(diags)

    def expr(text, field):
        try:
            return parse(text, n, m)
        except ParseError as err:
            diags.append(f"{field}: {err}")
        except (TypeError, ValueError) as err:
            diags.append(f"{field}: {err}")
        return None

    f = expr(doc["objective"], "objective")
    rows = [expr(t, f"constraints[{i}]") for i, t in enumerate(doc["constraints"])]
    C = None
    try:
        C = BlockSet.from_config(doc["C"])
    except (TypeError, ValueError, AttributeError) as err:
        diags.append(f"C: {err}")
    if C is not None and C.dim != len(rows):
        diags.append(f"C covers {C.dim} coords, P has {len(rows)} rows")
    xbar = _vector(doc["xbar"], n, "xbar", diags)
    direction = _vector(doc["direction"], n, "direction", diags)
    try:
        box = np.asarray(doc["ybox"], dtype=float).reshape(m, 2)
    except (TypeError, ValueError):
        diags.append(f"ybox: expected {m} pairs [lower, upper]")
        box = None
    tols = doc.get("tolerances", {}) or {}
    if not isinstance(tols, dict):
        diags.append("tolerances: expected an object")
        tols = {}
    if diags:
        raise ProblemError(diags)
    try:
        prog = ParametricProgram(n, m, f, tuple(rows), C, box, tols, doc["name"], doc.get("grid"))
    except ValueError as err:
        raise ProblemError([f"{doc['name']}: {err}"]) from err
    return ProblemFile(doc["name"], source, prog, xbar, direction, doc.get("references", {}) or {}, doc)


def load_problem(path: str | Path) -> ProblemFile:
    p = resolve_path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as err:
        raise ProblemError([f"{path}: {err.strerror}"]) from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ProblemError([f"{p.name}: line {err.lineno} column {err.colno}: {err.msg}"]) from err
    return problem_from_dict(doc, p.name)


# ---------------------------------------------------------------- documents

def jsonable(obj):
    """Convert numpy values and non-finite floats to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def make_document(command: str, problem: ProblemFile | None, seed: int, results: dict, exit_code: int) -> dict:
    doc = {
        "tool": "dirval",
        "version": __version__,
        "command": command,
        "seed": seed,
        "problem": problem.summary() if problem is not None else None,
        "tolerances": dict(problem.program.tol) if problem is not None else None,
        "results": results,
        "exit_code": exit_code,
    }
    return jsonable(doc)


def load_schema() -> dict:
    return json.loads((resources.files("dirval") / "report.schema.json").read_text(encoding="utf-8"))


def validate_document(doc: dict) -> None:
    jsonschema.validate(doc, load_schema())


def render_machine(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _flatten(prefix: str, obj, out: list[tuple[str, str]], max_items: int = 6):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else k, obj[k], out, max_items)
    elif isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)):
        for i, v in enumerate(obj[:max_items]):
            _flatten(f"{prefix}[{i}]", v, out, max_items)
        if len(obj) > max_items:
            out.append((prefix, f"({len(obj) - max_items} more entries)"))
    elif isinstance(obj, list):
        shown = ", ".join(_fmt(v) for v in obj[:max_items])
        more = f", ... ({len(obj)} total)" if len(obj) > max_items else ""
        out.append((prefix, f"[{shown}{more}]"))
    else:
        out.append((prefix, _fmt(obj)))


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def render_table(doc: dict) -> str:
    rows: list[tuple[str, str]] = []
    head = doc.get("problem") or {}
    lines = [f"dirval {doc['version']}  command={doc['command']}  seed={doc['seed']}"]
    if head:
        lines.append(f"problem {head['name']} (n={head['n']}, m={head['m']}, p={head['p']})")
    _flatten("", doc["results"], rows)
    width = min(max((len(k) for k, _ in rows), default=0), 70)
    lines += [f"{k:<{width}}  {v}" for k, v in rows]
    lines.append(f"exit code {doc['exit_code']}")
    return "\n".join(lines) + "\n"
