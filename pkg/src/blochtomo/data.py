"""Count records, per-axis sample statistics, outcome enumeration and the
depolarizing (eta) noise model."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence

import numpy as np
from scipy.stats import binom

from .core import BlochVector, DomainError, VectorLike, _check_eta, _checked_norm, as_vector

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class CountRecord:
    """Up/down counts along the three Cartesian axes."""

    n_x_up: int
    n_x_down: int
    n_y_up: int
    n_y_down: int
    n_z_up: int
    n_z_down: int

    def __post_init__(self):
        for name, v in zip(self._fields(), self.as_tuple()):
            if isinstance(v, bool) or int(v) != v:
                raise DomainError(f"{name} must be an integer, got {v!r}")
            if v < 0:
                raise DomainError(f"{name} must be non-negative, got {v}")
            object.__setattr__(self, name, int(v))

    @staticmethod
    def _fields():
        return ("n_x_up", "n_x_down", "n_y_up", "n_y_down", "n_z_up", "n_z_down")

    @classmethod
    def from_sequence(cls, values: Sequence[int]) -> "CountRecord":
        values = list(values)
        if len(values) != 6:
            raise DomainError(f"a count record has 6 entries, got {len(values)}")
        return cls(*values)

    def as_tuple(self) -> tuple:
        return (self.n_x_up, self.n_x_down, self.n_y_up, self.n_y_down, self.n_z_up, self.n_z_down)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.int64)

    @property
    def ups(self) -> tuple:
        return (self.n_x_up, self.n_y_up, self.n_z_up)

    @property
    def downs(self) -> tuple:
        return (self.n_x_down, self.n_y_down, self.n_z_down)

    @property
    def totals(self) -> tuple:
        return tuple(u + d for u, d in zip(self.ups, self.downs))

    def require_totals(self) -> None:
        for axis, n in zip(AXES, self.totals):
            if n < 1:
                raise DomainError(f"no measurements along the {axis} axis")

    # serialization

    def to_json_obj(self) -> dict:
        return {"nx": [self.n_x_up, self.n_x_down],
                "ny": [self.n_y_up, self.n_y_down],
                "nz": [self.n_z_up, self.n_z_down]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CountRecord":
        try:
            vals = [obj[k][i] for k in ("nx", "ny", "nz") for i in (0, 1)]
        except (KeyError, IndexError, TypeError) as exc:
            raise DomainError(f"malformed count record {obj!r}") from exc
        return cls.from_sequence(vals)

    @classmethod
    def from_json(cls, text: str) -> "CountRecord":
        return cls.from_json_obj(json.loads(text))

    def to_csv(self) -> str:
        return ",".join(str(v) for v in self.as_tuple())

    @classmethod
    def from_csv(cls, line: str) -> "CountRecord":
        parts = [p.strip() for p in line.strip().split(",")]
        try:
            values = [int(p) for p in parts]
        except ValueError as exc:
            raise DomainError(f"malformed count line {line!r}") from exc
        return cls.from_sequence(values)


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing measurement noise: a shot is correct with probability eta
    and uniformly random otherwise."""

    eta: float = 1.0

    def __post_init__(self):
        _check_eta(self.eta)

    def compose(self, other: "NoiseModel") -> "NoiseModel":
        """Independent error sources combine multiplicatively."""
        return NoiseModel(self.eta * other.eta)

    __mul__ = compose


class StateKind(str, Enum):
    PLATONIC = "platonic"
    POSITIVIST = "positivist"


@dataclass(frozen=True)
class StateReport:
    kind: StateKind
    vector: BlochVector


def sample_mean(n_up: int, n_down: int) -> float:
    total = n_up + n_down
    if total < 1:
        raise DomainError("sample mean of zero measurements")
    return (n_up - n_down) / total


def sample_error(n_up: int, n_down: int) -> float:
    """Binomial width 2 sqrt(n_up n_down) / N**1.5 of the sample mean."""
    total = n_up + n_down
    if total < 1:
        raise DomainError("sample error of zero measurements")
    return 2.0 * math.sqrt(n_up * n_down) / total ** 1.5


def outcome_array(n_x: int, n_y: int, n_z: int) -> np.ndarray:
    """All count records for fixed per-axis totals as an (M, 6) int array.

    Row order is lexicographic in (n_x_up, n_y_up, n_z_up), so row index
    ``(i * (n_y + 1) + j) * (n_z + 1) + k`` holds up-counts (i, j, k).
    """
    for n in (n_x, n_y, n_z):
        if n < 0:
            raise DomainError("per-axis totals must be non-negative")
    i, j, k = np.meshgrid(np.arange(n_x + 1), np.arange(n_y + 1), np.arange(n_z + 1), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    return np.stack([i, n_x - i, j, n_y - j, k, n_z - k], axis=1).astype(np.int64)


def enumerate_outcomes(n_x: int, n_y: int, n_z: int) -> List[CountRecord]:
    return [CountRecord(*row) for row in outcome_array(n_x, n_y, n_z).tolist()]


def sample_outcome(r: VectorLike, eta: float, n_x: int, n_y: int, n_z: int,
                   seed: int, index: int = 0) -> CountRecord:
    """Draw one count record by binomial inversion.

    Uniform variates come from a Philox counter-based stream keyed by
    ``seed`` and positioned by ``index``, so draw ``index`` can be
    regenerated without producing the ones before it.
    """
    _checked_norm(r)
    _check_eta(eta)
    v = as_vector(r)
    bitgen = np.random.Philox(key=seed, counter=[index, 0, 0, 0])
    u = np.random.Generator(bitgen).random(3)
    p_up = 0.5 * (1.0 + eta * v)
    totals = np.array([n_x, n_y, n_z])
    ups = binom.ppf(u, totals, p_up).astype(np.int64)
    ups = np.clip(ups, 0, totals)
    return CountRecord(int(ups[0]), int(totals[0] - ups[0]), int(ups[1]), int(totals[1] - ups[1]),
                       int(ups[2]), int(totals[2] - ups[2]))


def to_positivist(platonic: VectorLike, noise: NoiseModel) -> StateReport:
    _checked_norm(platonic)
    return StateReport(StateKind.POSITIVIST, BlochVector.from_array(noise.eta * as_vector(platonic)))


def canonicalize(counts: np.ndarray):
    """Map count rows to canonical representatives.

    Returns (canonical counts, signs (n, 3), perm (n, 3)) such that canonical
    axis a is original axis perm[:, a] multiplied by signs[:, perm[:, a]].
    """
    c = np.asarray(counts)
    up = c[:, 0::2].copy()
    down = c[:, 1::2].copy()
    flip = up < down
    signs = np.where(flip, -1.0, 1.0)
    up, down = np.where(flip, down, up), np.where(flip, up, down)
    total = up + down
    # sort by total, then up-count; stable keys make the permutation deterministic
    perm = np.lexsort((np.broadcast_to(np.arange(3), up.shape), up, total), axis=-1)
    rows = np.arange(len(c))[:, None]
    up_s = up[rows, perm]
    down_s = down[rows, perm]
    canon = np.empty_like(c)
    canon[:, 0::2] = up_s
    canon[:, 1::2] = down_s
    return canon, signs, perm


def restore_vectors(vec_c: np.ndarray, signs: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Undo :func:`canonicalize` on per-row Bloch vectors."""
    rows = np.arange(len(vec_c))[:, None]
    vec = np.empty_like(vec_c)
    vec[rows, perm] = vec_c
    return vec * signs
