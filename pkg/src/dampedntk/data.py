"""Datasets, bandlimited circle targets and named random substreams."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np


def substream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for ``(seed, label)``.

    Each label gets its own stream, so adding or renaming one never perturbs
    another.
    """
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, key]))


def substream_seed(seed: int, label: str) -> int:
    """Integer seed drawn from a named substream (for APIs that take ints)."""
    return int(substream(seed, label).integers(0, 2**31 - 1))


@dataclass(frozen=True)
class Dataset:
    """n inputs in the ball of radius M with labels y_i = f*(x_i)."""

    X: np.ndarray
    y: np.ndarray
    measure: str = "empirical"
    target: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} labels")
        if X.shape[0] == 0:
            raise ValueError("dataset is empty")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def radius(self) -> float:
        """Smallest M with all inputs in B_M."""
        return float(np.max(np.linalg.norm(self.X, axis=1)))


def circle_points(angles) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    return np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def angles_of(X) -> np.ndarray:
    X = np.atleast_2d(X)
    return np.arctan2(X[:, 1], X[:, 0])


def uniform_circle(n: int, rng: np.random.Generator | None = None, equispaced: bool = False) -> np.ndarray:
    """n points on S^1, i.i.d. uniform by default."""
    if equispaced:
        return circle_points(2.0 * np.pi * np.arange(n) / n)
    if rng is None:
        raise ValueError("i.i.d. sampling needs a generator")
    return circle_points(rng.uniform(0.0, 2.0 * np.pi, size=n))


def uniform_sphere(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. uniform points on S^{d-1}."""
    Z = rng.standard_normal((n, d))
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def circle_mode(label: str) -> Callable:
    """L^2(uniform S^1)-orthonormal Fourier mode by label: 'const', 'cos3', 'sin2', ..."""
    kind, k = parse_mode_label(label)
    if kind == "const":
        return lambda X: np.ones(np.atleast_2d(X).shape[0])
    trig = np.cos if kind == "cos" else np.sin
    return lambda X: np.sqrt(2.0) * trig(k * angles_of(X))


def parse_mode_label(label: str) -> tuple[str, int]:
    if label == "const":
        return "const", 0
    for kind in ("cos", "sin"):
        if label.startswith(kind) and label[len(kind):].isdigit():
            k = int(label[len(kind):])
            if k >= 1:
                return kind, k
    raise ValueError(f"bad mode label {label!r}")


@dataclass(frozen=True)
class BandlimitedTarget:
    """f*(x) = sum_j c_j phi_j(x) over orthonormal circle modes."""

    modes: tuple[str, ...]
    coefs: tuple[float, ...]

    def __post_init__(self):
        if len(self.modes) != len(self.coefs):
            raise ValueError("modes and coefs differ in length")
        for m in self.modes:
            parse_mode_label(m)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        if X.shape[1] != 2:
            raise ValueError("bandlimited targets live on the circle (d=2)")
        out = np.zeros(X.shape[0])
        for label, c in zip(self.modes, self.coefs):
            out += c * circle_mode(label)(X)
        return out

    @property
    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.square(self.coefs))))

    def sup_norm(self, n_grid: int = 8192) -> float:
        return float(np.max(np.abs(self(uniform_circle(n_grid, equispaced=True)))))


def make_dataset(X, target: Callable, measure: str = "empirical") -> Dataset:
    return Dataset(X, target(X), measure=measure, target=target)


def load_dataset_csv(path: str | Path) -> Dataset:
    """One point per row, label in the last column."""
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    return Dataset(arr[:, :-1], arr[:, -1], measure="file")


def fourier_target(freqs: Sequence[int], coef: float = 1.0, kind: str = "cos") -> BandlimitedTarget:
    return BandlimitedTarget(tuple(f"{kind}{k}" for k in freqs), tuple(float(coef) for _ in freqs))
