"""FLOP accounting side channel.

Kernels call :func:`add` after each significant product. Nothing is
recorded unless a :func:`counting` block is active, so the counters cost a
context-variable lookup when unused.

    with flops.counting() as fc:
        with flops.phase("projected_solve"):
            ...
    fc.phases["projected_solve"]
"""
from collections import defaultdict
from contextlib import contextmanager
from contextvars import ContextVar

_state = ContextVar("rrsvd_flops", default=(None, "other"))


class FlopCounter:
    def __init__(self):
        self.phases = defaultdict(int)

    @property
    def total(self):
        return sum(self.phases.values())

    def as_dict(self):
        out = dict(self.phases)
        out["total"] = self.total
        return out

    def __repr__(self):
        return f"FlopCounter({dict(self.phases)!r})"


def add(n):
    counter, name = _state.get()
    if counter is not None:
        counter.phases[name] += int(n)


@contextmanager
def counting(counter=None):
    if counter is None:
        counter = FlopCounter()
    _, name = _state.get()
    token = _state.set((counter, name))
    try:
        yield counter
    finally:
        _state.reset(token)


@contextmanager
def phase(name):
    counter, _ = _state.get()
    token = _state.set((counter, name))
    try:
        yield
    finally:
        _state.reset(token)


def dense_matmul(a, b):
    """``a @ b`` with 2*m*n*k FLOPs recorded."""
    out = a @ b
    inner = a.shape[-1] if a.ndim else 1
    add(2 * out.size * inner)
    return out
