"""Steering vectors for ULA (APs, users) and UPA (IRS panels).

Entries are kept unit-modulus; any 1/sqrt(N) normalization is absorbed into
the path gain downstream. UPA vectors are flattened row-major with the Y
index running fastest, matching the IRS element ordering in
:mod:`irslink.scenario`.
"""

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 2.998e8  # m/s


@dataclass(frozen=True)
class SteeringVector:
    entries: np.ndarray  # complex, unit-modulus
    geometry: str  # "ULA" | "UPA"
    azimuth: float  # radians
    elevation: float  # radians

    def __len__(self) -> int:
        return len(self.entries)


def angles_from_vector(direction) -> tuple[float, float]:
    """Azimuth/elevation of a 3D direction vector.

    azimuth = atan2(y, x) in (-pi, pi]; elevation = asin(z/|d|) in
    [-pi/2, pi/2]. At zenith/nadir (x = y = 0) the azimuth is returned
    as 0 by convention.
    """
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0.0:
        raise ValueError("zero direction vector has no angles")
    if d[0] == 0.0 and d[1] == 0.0:
        azimuth = 0.0
    else:
        azimuth = float(np.arctan2(d[1], d[0]))
    elevation = float(np.arcsin(np.clip(d[2] / norm, -1.0, 1.0)))
    return azimuth, elevation


def unit_vector_from_angles(azimuth: float, elevation: float) -> np.ndarray:
    """Inverse of angles_from_vector for unit vectors."""
    ce = np.cos(elevation)
    return np.array([ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)])


def ula_steering(n: int, azimuth: float, spacing_wavelengths: float = 0.5) -> SteeringVector:
    """Uniform linear array steering vector.

    Entry k = exp(j*2*pi*spacing*k*sin(azimuth)), k = 0..n-1.
    """
    if n < 1:
        raise ValueError("antenna count must be >= 1")
    k = np.arange(n)
    phases = 2.0 * np.pi * spacing_wavelengths * k * np.sin(azimuth)
    return SteeringVector(np.exp(1j * phases), "ULA", azimuth, 0.0)


def upa_steering(
    m_y: int,
    m_z: int,
    azimuth: float,
    elevation: float,
    spacing_wavelengths: float = 0.5,
) -> SteeringVector:
    """Uniform planar array steering vector (panel in the Y-Z plane).

    Entry (a, b) = exp(j*2*pi*spacing*(a*sin(az)*cos(el) + b*sin(el))),
    flattened with a (the Y index) running fastest; length m_y*m_z.
    """
    if m_y < 1 or m_z < 1:
        raise ValueError("panel dimensions must be >= 1")
    a = np.arange(m_y)
    b = np.arange(m_z)
    phase_y = spacing_wavelengths * a * np.sin(azimuth) * np.cos(elevation)
    phase_z = spacing_wavelengths * b * np.sin(elevation)
    # b-major, a fastest: element index = b*m_y + a
    phases = 2.0 * np.pi * (phase_z[:, None] + phase_y[None, :]).ravel()
    return SteeringVector(np.exp(1j * phases), "UPA", azimuth, elevation)
