"""Object transmission maps and their summary statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError

LAYOUTS = ("left", "right", "rectangle", "mask")


@dataclass(frozen=True)
class TransmissionMap:
    """Per-cell transmission ``t`` on a ``height x width`` grid.

    ``t_plus``/``t_minus`` are set for two-level objects and ``None``
    otherwise.
    """

    t: np.ndarray
    t_plus: Optional[float] = None
    t_minus: Optional[float] = None

    def __post_init__(self):
        t = np.array(self.t, dtype=np.float64)
        if t.ndim != 2 or t.size < 1:
            raise ValidationError("transmission map must be a non-empty 2-D array")
        if np.any(~np.isfinite(t)) or t.min() < 0 or t.max() > 1:
            raise ValidationError("transmission values must lie in [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    @property
    def height(self) -> int:
        return self.t.shape[0]

    @property
    def width(self) -> int:
        return self.t.shape[1]

    @property
    def n_cells(self) -> int:
        return self.t.size

    @property
    def is_binary(self) -> bool:
        return self.t_plus is not None and self.t_minus is not None

    def level_masks(self):
        """Boolean masks of the ``t_plus`` and ``t_minus`` regions."""
        if not self.is_binary:
            raise ValidationError("level masks are defined for two-level maps only")
        if self.t_plus == self.t_minus:
            # levels coincide: no distinguishable object region
            return np.ones(self.t.shape, bool), np.zeros(self.t.shape, bool)
        return self.t == self.t_plus, self.t == self.t_minus


@dataclass(frozen=True)
class SceneStats:
    t_bar: float
    t2_bar: float
    epsilon: Optional[float] = None
    t_plus: Optional[float] = None
    t_minus: Optional[float] = None


def _check_level(name, value):
    if not (0.0 <= value <= 1.0):
        raise ValidationError(f"{name} must lie in [0, 1], got {value}")


def object_cell_count(epsilon: float, n_cells: int) -> int:
    """Nearest integer to ``epsilon * n_cells``, exact halves rounded down."""
    x = epsilon * n_cells
    return int(math.ceil(x - 0.5 - 1e-9))


def _object_mask(height: int, width: int, n_obj: int, layout: str) -> np.ndarray:
    flat = np.zeros(height * width, dtype=bool)
    flat[:n_obj] = True
    if layout == "left":
        # column-major fill from the left edge
        return flat.reshape(width, height).T.copy()
    if layout == "right":
        return flat.reshape(width, height).T[:, ::-1].copy()
    if layout == "rectangle":
        mask = np.zeros((height, width), dtype=bool)
        if n_obj == 0:
            return mask
        block_w = min(width, max(1, math.ceil(math.sqrt(n_obj * width / height))))
        block_h = math.ceil(n_obj / block_w)
        if block_h > height:
            block_w, block_h = width, math.ceil(n_obj / width)
        r0 = (height - block_h) // 2
        c0 = (width - block_w) // 2
        block = np.zeros(block_h * block_w, dtype=bool)
        block[:n_obj] = True
        mask[r0:r0 + block_h, c0:c0 + block_w] = block.reshape(block_h, block_w)
        return mask
    raise ValidationError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")


def make_binary_scene(width: int, height: int, epsilon: float, t_plus: float, t_minus: float,
                      layout: str = "left", mask: Optional[np.ndarray] = None) -> TransmissionMap:
    """Two-level object with a fraction ``epsilon`` of cells at ``t_minus``.

    The number of ``t_minus`` cells is ``epsilon * width * height`` rounded
    to the nearest integer (halves toward the floor); the realized fraction is
    available from :func:`scene_stats`.  With ``layout="mask"`` the object
    cells are taken from the boolean ``mask`` and ``epsilon`` is ignored.
    """
    _check_level("t_plus", t_plus)
    _check_level("t_minus", t_minus)
    if t_minus > t_plus:
        raise ValidationError("t_minus must not exceed t_plus")
    if layout == "mask":
        if mask is None:
            raise ValidationError("layout 'mask' requires a mask array")
        obj = np.asarray(mask, dtype=bool)
    else:
        if width < 1 or height < 1:
            raise ValidationError("scene dimensions must be >= 1")
        if not (0.0 <= epsilon <= 1.0):
            raise ValidationError(f"epsilon must lie in [0, 1], got {epsilon}")
        obj = _object_mask(height, width, object_cell_count(epsilon, width * height), layout)
    t = np.where(obj, t_minus, t_plus).astype(np.float64)
    return TransmissionMap(t, t_plus=float(t_plus), t_minus=float(t_minus))


def uniform_scene(width: int, height: int, t: float = 1.0) -> TransmissionMap:
    _check_level("t", t)
    return TransmissionMap(np.full((height, width), float(t)), t_plus=float(t), t_minus=float(t))


def scene_stats(scene: TransmissionMap) -> SceneStats:
    t = scene.t
    t_bar = float(t.mean())
    t2_bar = float((t * t).mean())
    if not scene.is_binary:
        return SceneStats(t_bar, t2_bar)
    if scene.t_plus == scene.t_minus:
        eps = 0.0
    else:
        eps = float(np.count_nonzero(t == scene.t_minus)) / t.size
    return SceneStats(t_bar, t2_bar, eps, scene.t_plus, scene.t_minus)


def crop(scene: TransmissionMap, rows: slice, cols: slice) -> TransmissionMap:
    return TransmissionMap(scene.t[rows, cols], scene.t_plus, scene.t_minus)
