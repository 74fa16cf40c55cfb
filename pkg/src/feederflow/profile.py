from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch
from .network import Grid

FIELDS = ("theta", "v", "s", "w")


@dataclass(frozen=True, eq=False)
class Profile:
    """Sampled voltage profile: phase, amplitude, ancillary s = -v^2 dtheta/dx, gradient w = dv/dx.

    Arrays are flat over the grid (see :class:`~feederflow.network.Grid`).
    ``info`` carries solver diagnostics and is not part of the value.
    """

    grid: Grid
    theta: np.ndarray
    v: np.ndarray
    s: np.ndarray
    w: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in FIELDS:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.size,):
                raise GridMismatch(f"{name} has shape {arr.shape}, grid has {self.grid.size} samples")
            object.__setattr__(self, name, arr)

    @classmethod
    def flat(cls, grid: Grid) -> "Profile":
        return cls(grid, grid.zeros(), np.ones(grid.size), grid.zeros(), grid.zeros())

    def segment(self, sid: str) -> dict[str, np.ndarray]:
        sl = self.grid.slice(sid)
        return {"x": self.grid.x[sid], **{f: getattr(self, f)[sl] for f in FIELDS}}

    def stacked(self) -> np.ndarray:
        """(n_samples, 4) array of theta, v, s, w."""
        return np.column_stack([self.theta, self.v, self.s, self.w])
