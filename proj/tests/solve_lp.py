#!/usr/bin/env python3
"""Solve an LP-format binary integer program with scipy's HiGHS backend.

Usage: solve_lp.py FILE.lp
Prints "objective <value>" for the maximization problem.
"""

import re
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp


def parse_expr(expr, var_index, n):
    row = np.zeros(n)
    toks = expr.replace("+", " + ").replace("-", " - ").split()
    sign = 1.0
    pending = None
    for tok in toks:
        if tok == "+":
            sign = 1.0
            continue
        if tok == "-":
            sign = -1.0
            continue
        try:
            pending = float(tok)
            continue
        except ValueError:
            pass
        coef = sign * (pending if pending is not None else 1.0)
        row[var_index[tok]] += coef
        sign = 1.0
        pending = None
    return row


def main():
    text = open(sys.argv[1]).read()
    body = " ".join(l for l in text.splitlines() if not l.startswith("\\"))

    obj_text = re.search(r"Maximize(.*?)Subject To", body, re.S).group(1).split(":", 1)[1]
    cons_text = re.search(r"Subject To(.*?)Binary", body, re.S).group(1)
    variables = re.search(r"Binary(.*?)End", body, re.S).group(1).split()
    var_index = {v: i for i, v in enumerate(variables)}
    n = len(variables)

    c = parse_expr(obj_text, var_index, n)

    rows, lb, ub = [], [], []
    for m in re.finditer(r"(\w+):((?:(?!<=|>=|=).)*)(<=|>=|=)\s*([-\d.]+)", cons_text):
        rows.append(parse_expr(m.group(2), var_index, n))
        rhs = float(m.group(4))
        if m.group(3) == "<=":
            lb.append(-np.inf)
            ub.append(rhs)
        elif m.group(3) == ">=":
            lb.append(rhs)
            ub.append(np.inf)
        else:
            lb.append(rhs)
            ub.append(rhs)

    res = milp(
        c=-c,  # milp minimizes
        constraints=LinearConstraint(np.array(rows), np.array(lb), np.array(ub)),
        integrality=np.ones(n),
        bounds=Bounds(0, 1),
    )
    if not res.success:
        print("solver failed:", res.message, file=sys.stderr)
        return 1
    print(f"objective {-res.fun:.9f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
