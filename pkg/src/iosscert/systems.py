"""Built-in example models.

* ``reactor``: reversible A <-> 2B reaction in an isothermal gas-phase
  reactor with rate constants k1 = 0.16, k2 = 0.0064, disturbance inputs
  on both states and on the (affine) output y = x1 + x2 + u3.  Its state
  Jacobian depends on x1 alone, which is what makes the benchmark
  comparison against the stepped model's Jacobians interesting.
* ``scalar_linear``: x' = -x + u1, y = x.  Small enough that every
  quantity in the pipeline can be checked by hand.
* ``zero``: f = 0, h = 0.  No output information at all; certification
  must fail on it.
* ``sine``: x' = x + sin(x), y = x.  A Lipschitz system whose Jacobian
  slope keeps oscillating, handy for exercising the consistency defect.
"""

from __future__ import annotations

from .grid import box_grid
from .system import parse_model

BUILTIN_MODEL_TEXTS = {
    "reactor": """\
# isothermal gas-phase reactor, reversible reaction (k1 = 0.16, k2 = 0.0064)
dims 2 3 0 1
f1 = -2*0.16*x1^2 + 2*0.0064*x2 + u1
f2 = 0.16*x1^2 - 0.0064*x2 + u2
h1 = x1 + x2 + u3
""",
    "scalar_linear": """\
dims 1 1 0 1
f1 = -x1 + u1
h1 = x1
""",
    "zero": """\
dims 1 1 0 1
f1 = 0
h1 = 0
""",
    "sine": """\
dims 1 0 0 1
f1 = x1 + sin(x1)
h1 = x1
""",
}

# Box the reactor is studied on: x in [0.1, 0.5]^2, u in [-0.1, 0.1]^3.
REACTOR_BOUNDS = [(0.1, 0.5), (0.1, 0.5), (-0.1, 0.1), (-0.1, 0.1), (-0.1, 0.1)]

DEFAULT_BOUNDS = {
    "reactor": REACTOR_BOUNDS,
    "scalar_linear": [(-1.0, 1.0), (-1.0, 1.0)],
    "zero": [(-1.0, 1.0), (-1.0, 1.0)],
    "sine": [(-3.0, 3.0)],
}


def builtin_names():
    return sorted(BUILTIN_MODEL_TEXTS)


def builtin_model(name):
    """Parse and return a built-in model; unknown names raise KeyError."""
    try:
        text = BUILTIN_MODEL_TEXTS[name]
    except KeyError:
        raise KeyError(f"unknown builtin model {name!r}; available: {', '.join(builtin_names())}") from None
    return parse_model(text, name=name)


def builtin_box(name, points_per_axis):
    """Default box for a builtin, gridded at the given per-axis count."""
    return box_grid(DEFAULT_BOUNDS[name], points_per_axis)
