"""Fixed-step RK4 integration of the semispray ẋ = v(x) with per-step diagnostics."""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calculus import energy
from .dynamics import SemisprayField, el_residual
from .errors import DegenerateLagrangian, EvaluationError, NonFiniteState
from .expr import Lagrangian


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), 8n)
    energies: np.ndarray
    el_residual_norms: np.ndarray
    h: float
    k: int | None

    def __len__(self):
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path=None) -> str:
        """CSV text with header ``t,x0,..,x{8n-1},energy,el_residual``.

        Values use 17 significant digits so reading them back is bit-exact.
        When ``path`` is given the text is also written there with LF endings.
        """
        dim = self.states.shape[1]
        buf = io.StringIO()
        buf.write(",".join(["t", *(f"x{a}" for a in range(dim)), "energy", "el_residual"]) + "\n")
        for t, x, e, r in zip(self.times, self.states, self.energies, self.el_residual_norms):
            row = [t, *x, e, r]
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="\n", encoding="ascii") as fh:
                fh.write(text)
        return text


def _fmt(v) -> str:
    # adding 0.0 turns -0.0 into 0.0
    return "%.17g" % (float(v) + 0.0)


def read_csv(path, k: int | None = None) -> Trajectory:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    header = lines[0].split(",")
    if header[0] != "t" or header[-2:] != ["energy", "el_residual"]:
        raise ValueError(f"unexpected trajectory header: {lines[0]!r}")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:] if line], dtype=float)
    data = data.reshape(-1, len(header))
    times = data[:, 0]
    h = float(times[1] - times[0]) if len(times) > 1 else float("nan")
    return Trajectory(times, data[:, 1:-2], data[:, -2], data[:, -1], h, k)


def integrate(L: Lagrangian, k: int, x0, h: float, steps: int) -> Trajectory:
    """Classical RK4 on ẋ = v(x) for ``steps`` steps of size ``h``.

    Energy and EL residual are recorded at every stored state using the solved
    velocity there. If a solve degenerates or the state stops being finite, the
    raised DegenerateLagrangian / NonFiniteState carries ``step`` and the
    partial ``trajectory`` up to the last good state.
    """
    if not h > 0 or not np.isfinite(h):
        raise ValueError(f"step size must be positive and finite, got {h!r}")
    if isinstance(steps, bool) or int(steps) != steps or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps!r}")
    steps = int(steps)
    field = SemisprayField(L, k)
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (L.dim,):
        raise ValueError(f"initial state must have length {L.dim}, got shape {x.shape}")

    states = np.empty((steps + 1, L.dim))
    energies = np.empty(steps + 1)
    residuals = np.empty(steps + 1)

    def partial(count):
        return Trajectory(
            np.arange(count) * h, states[:count].copy(), energies[:count].copy(),
            residuals[:count].copy(), h, field.k,
        )

    i = 0
    recorded = 0
    try:
        if not np.all(np.isfinite(x)):
            raise NonFiniteState("initial state is not finite")
        v = field(x)
        while True:
            states[i] = x
            energies[i] = energy(L, field.k, x, v)
            residuals[i] = np.linalg.norm(el_residual(L, field.k, x, v))
            recorded = i + 1
            if i == steps:
                break
            k1 = v
            k2 = field(x + 0.5 * h * k1)
            k3 = field(x + 0.5 * h * k2)
            k4 = field(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(f"state became non-finite at step {i + 1}")
            i += 1
            v = field(x)
    except DegenerateLagrangian as err:
        err.step = i
        err.trajectory = partial(recorded)
        err.args = (f"{err.args[0]} (step {i})",)
        raise
    except NonFiniteState as err:
        err.step = i
        err.trajectory = partial(recorded)
        raise
    except EvaluationError as err:
        raise NonFiniteState(f"evaluation failed at step {i}: {err}", step=i, trajectory=partial(recorded)) from err

    return Trajectory(np.arange(steps + 1) * h, states, energies, residuals, h, field.k)


def energy_drift(t: Trajectory) -> float:
    """max_i |E_i - E_0| / (1 + |E_0|)."""
    if len(t) == 0:
        raise ValueError("empty trajectory")
    e0 = t.energies[0]
    return float(np.max(np.abs(t.energies - e0)) / (1.0 + abs(e0)))
