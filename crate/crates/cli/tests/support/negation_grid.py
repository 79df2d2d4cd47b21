"""Brute-force check that each negated condition is the logical negation of
its original. Reads [[original, negated], ...] as JSON on stdin.

Every maximal non-boolean operand is abstracted to a variable (the same
operand text maps to the same variable in both conditions) and both
conditions are evaluated over integers in [-3, 3]. Right-hand operands of
`in` / `not in` range over small tuples instead. Prints one JSON object per
violation and a final summary line.
"""
import ast
import itertools
import json
import random
import sys

GRID = range(-3, 4)
MAX_POINTS = 20000


class Abstract(ast.NodeTransformer):
    def __init__(self, table):
        self.table = table
        self.containers = set()

    def name_for(self, node, container=False):
        key = ast.dump(node)
        if key not in self.table:
            self.table[key] = f"v{len(self.table)}"
        name = self.table[key]
        if container:
            self.containers.add(name)
        return ast.copy_location(ast.Name(id=name, ctx=ast.Load()), node)

    def operand(self, node, container=False):
        if isinstance(node, (ast.BoolOp, ast.Compare)):
            return self.visit(node)
        return self.name_for(node, container)

    def visit_BoolOp(self, node):
        node.values = [self.operand(v) for v in node.values]
        return node

    def visit_Compare(self, node):
        node.left = self.operand(node.left)
        node.comparators = [
            self.operand(c, isinstance(op, (ast.In, ast.NotIn)))
            for op, c in zip(node.ops, node.comparators)
        ]
        return node


def value(name, v, containers):
    if name in containers:
        return tuple(range(-3, v))
    return v


def check(original, negated, rng):
    table = {}
    a = Abstract(table)
    t_o = a.visit(ast.parse(original.strip(), mode="eval"))
    t_n = a.visit(ast.parse(negated.strip(), mode="eval"))
    c_o = compile(ast.fix_missing_locations(t_o), "<o>", "eval")
    c_n = compile(ast.fix_missing_locations(t_n), "<n>", "eval")
    names = sorted(set(table.values()))
    k = len(names)
    if len(GRID) ** k <= MAX_POINTS:
        points = itertools.product(GRID, repeat=k)
    else:
        points = (tuple(rng.choice(GRID) for _ in names) for _ in range(MAX_POINTS))
    evaluated = 0
    for p in points:
        env = {n: value(n, v, a.containers) for n, v in zip(names, p)}
        try:
            o = bool(eval(c_o, {}, env))
        except Exception as e:  # identical failures on both sides are fine
            o = type(e).__name__
        try:
            n = bool(eval(c_n, {}, env))
        except Exception as e:
            n = type(e).__name__
        evaluated += 1
        if isinstance(o, bool) and isinstance(n, bool):
            if o == n:
                return {"original": original, "negated": negated, "point": dict(zip(names, p))}, evaluated
        elif o != n:
            return {"original": original, "negated": negated, "point": dict(zip(names, p)), "errors": [o, n]}, evaluated
    return None, evaluated


def main():
    rng = random.Random(20240611)
    conds = json.load(sys.stdin)
    violations = 0
    points = 0
    for original, negated in conds:
        v, n = check(original, negated, rng)
        points += n
        if v is not None:
            violations += 1
            print(json.dumps(v))
    print(json.dumps({"conditions": len(conds), "points": points, "violations": violations}))


main()
