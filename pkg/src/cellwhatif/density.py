"""Usage-density fields over the plane: uniform floor plus Gaussian blobs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GaussianBlob", "DensityField", "uniform_density"]


@dataclass(frozen=True)
class GaussianBlob:
    """Isotropic Gaussian bump: amplitude * exp(-r^2 / (2 sigma^2))."""

    center_x: float
    center_y: float
    sigma: float
    amplitude: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma!r}")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude!r}")

    @property
    def total_mass(self) -> float:
        """Closed-form integral over the whole plane: A * 2 pi sigma^2."""
        return self.amplitude * 2.0 * np.pi * self.sigma**2


@dataclass(frozen=True)
class DensityField:
    """Nonnegative usage density rho(x, y) in usage units per m^2."""

    uniform: float = 0.0
    blobs: tuple[GaussianBlob, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.uniform < 0:
            raise ValueError(f"uniform amplitude must be >= 0, got {self.uniform!r}")
        object.__setattr__(self, "blobs", tuple(self.blobs))

    def evaluate(self, x, y):
        """Vectorized rho(x, y); broadcasts over array inputs."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.full(np.broadcast(x, y).shape, self.uniform, dtype=float)
        for blob in self.blobs:
            r2 = (x - blob.center_x) ** 2 + (y - blob.center_y) ** 2
            out += blob.amplitude * np.exp(-r2 / (2.0 * blob.sigma**2))
        return out

    def to_dict(self) -> dict:
        return {
            "uniform": self.uniform,
            "blobs": [
                {
                    "center_x": b.center_x,
                    "center_y": b.center_y,
                    "sigma": b.sigma,
                    "amplitude": b.amplitude,
                }
                for b in self.blobs
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DensityField":
        blobs = tuple(GaussianBlob(**b) for b in d.get("blobs", []))
        return cls(uniform=float(d.get("uniform", 0.0)), blobs=blobs)


def uniform_density(amplitude: float) -> DensityField:
    return DensityField(uniform=amplitude)
