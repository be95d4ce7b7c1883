"""Synthetic noisy test functions and sampling of point sets."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .diff_engine import PointSet, TooFewPointsError

__all__ = [
    "GroundTruth",
    "NoiseKind",
    "NoisyFunctionSpec",
    "SeededRng",
    "arbitrary_points",
    "evaluate",
    "random_base_and_direction",
    "standard_points",
]


class GroundTruth(str, enum.Enum):
    QUADRATIC = "quadratic"
    POWER_SUM = "power_sum"


class NoiseKind(str, enum.Enum):
    MULTIPLICATIVE = "multiplicative"
    ADDITIVE = "additive"


@dataclass(frozen=True)
class NoisyFunctionSpec:
    """Ground truth plus Gaussian noise.

    ``quadratic`` is ``x @ x``; ``power_sum`` is ``sum(x) ** degree``.
    Multiplicative noise evaluates ``f_s(x) * (1 + xi)``, additive noise
    ``f_s(x) + xi``, with ``xi ~ N(0, sigma**2)``. ``dim=None`` accepts any
    dimension.
    """

    ground_truth: GroundTruth = GroundTruth.QUADRATIC
    noise: NoiseKind = NoiseKind.MULTIPLICATIVE
    sigma: float = 1e-3
    degree: int = 6
    dim: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "ground_truth", GroundTruth(self.ground_truth))
        object.__setattr__(self, "noise", NoiseKind(self.noise))
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def smooth(self, x: ArrayLike) -> NDArray[np.float64] | float:
        """Noise-free value ``f_s`` for one point ``(n,)`` or a batch ``(N, n)``."""
        x = np.asarray(x, dtype=float)
        if self.ground_truth is GroundTruth.QUADRATIC:
            return np.einsum("...i,...i->...", x, x)
        return np.sum(x, axis=-1) ** self.degree

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ground_truth"] = self.ground_truth.value
        d["noise"] = self.noise.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NoisyFunctionSpec":
        return cls(**d)


class SeededRng:
    """Reproducible random stream identified by ``(seed, stream)``.

    Backed by the counter-based Philox generator; streams with different ids
    are statistically independent, and a stream never depends on how many
    other streams exist or which thread draws from it. Normal variates use
    the Box-Muller transform of the stream's uniforms.
    """

    def __init__(self, seed: int, stream: int | tuple[int, ...] = 0):
        self.seed = int(seed)
        self.stream = stream
        key = stream if isinstance(stream, tuple) else (int(stream),)
        ss = np.random.SeedSequence(self.seed, spawn_key=key)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def child(self, *sub: int) -> "SeededRng":
        base = self.stream if isinstance(self.stream, tuple) else (int(self.stream),)
        return SeededRng(self.seed, base + tuple(sub))

    def uniform(self, low: float, high: float, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, size=None):
        count = 1 if size is None else int(np.prod(size))
        pairs = (count + 1) // 2
        u1 = 1.0 - self.generator.random(pairs)  # in (0, 1], keeps log finite
        u2 = self.generator.random(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:count]
        return float(z[0]) if size is None else z.reshape(size)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream!r})"


def evaluate(spec: NoisyFunctionSpec, x: ArrayLike, rng: SeededRng) -> float | NDArray[np.float64]:
    """Noisy evaluation with a fresh iid noise draw for every point.

    ``x`` may be a single point ``(n,)`` (returns a float) or a batch
    ``(N, n)`` (returns an array of ``N`` values).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2):
        raise ValueError("x must be a point or a 2-d batch of points")
    if spec.dim is not None and x.shape[-1] != spec.dim:
        raise ValueError(f"dimension mismatch: spec expects {spec.dim}, got {x.shape[-1]}")
    fs = spec.smooth(x)
    xi = spec.sigma * rng.normal(fs.shape)
    out = fs * (1.0 + xi) if spec.noise is NoiseKind.MULTIPLICATIVE else fs + xi
    return float(out) if x.ndim == 1 else out


def standard_points(y0: ArrayLike, d: ArrayLike, h: float, count: int) -> PointSet:
    """Collinear, equally spaced points ``y0 + j * h * d`` for ``j = 0..count-1``."""
    y0 = np.asarray(y0, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("direction d must have unit Euclidean norm")
    if not h > 0:
        raise ValueError("h must be positive")
    if count < 2:
        raise TooFewPointsError("a point set needs at least 2 points")
    return PointSet(y0 + h * np.arange(count)[:, None] * d)


def arbitrary_points(y0: ArrayLike, h: float, count: int, rng: SeededRng) -> PointSet:
    """``y0`` followed by ``count - 1`` points drawn uniformly from the box ``|x - y0|_inf <= h``."""
    y0 = np.asarray(y0, dtype=float).ravel()
    if not h > 0:
        raise ValueError("h must be positive")
    if count < 2:
        raise TooFewPointsError("a point set needs at least 2 points")
    offsets = rng.uniform(-h, h, (count - 1, y0.size))
    return PointSet(np.vstack([y0, y0 + offsets]))


def random_base_and_direction(
    n: int, box: float, rng: SeededRng
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Base point uniform on ``[-box, box]^n`` and a uniformly random unit direction."""
    if n < 1 or not box > 0:
        raise ValueError("need n >= 1 and box > 0")
    y0 = rng.uniform(-box, box, n)
    g = rng.normal(n)
    while not np.any(g):
        g = rng.normal(n)
    return y0, g / np.linalg.norm(g)
