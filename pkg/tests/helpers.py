"""Inline problem construction for tests."""
from dirval.report import problem_from_dict


def make_problem(objective, constraints, C, ybox, n=1, m=1, xbar=None, direction=None, name="inline", **extra):
    doc = {
        "name": name, "n": n, "m": m, "objective": objective, "constraints": list(constraints),
        "C": [{"type": c} if isinstance(c, str) else c for c in C],
        "xbar": xbar if xbar is not None else [0.0] * n,
        "direction": direction if direction is not None else [1.0] + [0.0] * (n - 1),
        "ybox": ybox, **extra,
    }
    return problem_from_dict(doc)


def make_program(*args, **kwargs):
    return make_problem(*args, **kwargs).program
