# A grab bag of Python 3 syntax.
from __future__ import annotations
import os.path as osp, sys
from .. import thing
from ...pkg.mod import (a as b,
                        c,)
from x import *

X: int = 1
Y: "list[int]"
a = b = c = [1, 2, *rest]
x, *y = 1, 2, 3
(p, q), r = (1, 2), 3
d = {1: 2, **other, 'k': v}
s = {1, 2}
e = {}
t = ()
u = (1,)
v = 1 if a else 2
w = lambda k, *a, z=3, **kw: k + z
g = (i for i in range(3) if i if not i)
lc = [j * 2 for i in xs for j in i]
dc = {k: v for k, v in d.items()}
sc = {k for k in d}
n = -x ** -2
m = ~x | y ^ z & w << 1 >> 2
o = a @ b // c % d
cmp = a < b <= c != d is not e not in f in g is h
sl = a[1:2, ::3, :, 4:][..., None]
f"{x!r:>{width}} and {y=} {{literal}} {d['k']} {(lambda: 1)()}"
rb = rb'\d' b"x"
rs = r'''raw
string'''
num = 0x_ff + 0o17 + 0b1 + 1_000.5e-3 + 3j + .5
call(a, *b, c=d, **e)
call(x for x in y)
assert x, "msg"
del a[0], b.c
global_thing = not not x
if (n := len(a)) > 10: pass
x = \
    1
x += 1; y -= 2;
async def co():
    async with a as b, c:
        await d
    async for i in g():
        yield i
    x = yield
    y = yield from z
    return (yield)


@decorator
@other.deco(1)
class K(Base, metaclass=M):
    """Doc."""
    attr: int = 0

    def m(self, /, a, *, b: int = 2) -> None:
        nonlocal_ = 1

        def inner():
            nonlocal nonlocal_
            global G
            nonlocal_ += 1
        return inner


def flow(x):
    if x: return 1
    elif x > 2:
        pass
    elif x < 0: pass
    else:
        x = 2
    while x:
        x -= 1
        if x: break
        else: continue
    else:
        pass
    for i, j in enumerate(x):
        pass
    else:
        pass
    try:
        pass
    except (ValueError, TypeError) as err:
        raise RuntimeError("x") from err
    except Exception:
        raise
    else:
        pass
    finally:
        pass
    try:
        pass
    finally:
        pass
    with open(a) as f, open(b):
        pass
    return x  # trailing comment
# final comment without newline
