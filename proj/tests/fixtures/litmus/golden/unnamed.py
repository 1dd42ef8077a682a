from collections.abc import ValuesView

def f(a: ValuesView[int], b: int|None=None) -> list[int]:
    m = max(a)
    if b is not None and b > m:
        return [m, b]
    return [m]


d = {'a': 1, 'b': 2}
f(d.values())
f(d.values(), 20)
