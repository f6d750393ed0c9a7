"""Position-dependent channel construction.

Antenna positions only change path phases: each propagation path contributes
a unit-modulus phase term exp(j*2pi/lambda * delta), where delta is the
propagation-distance difference between the antenna and its region origin.
The self-interference (SI) channel couples transmit and receive field
responses through a fixed scattering core; UL and DL channels are single-path
line-of-sight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import PathAngles, Scenario, SystemConfig, angles_array


@dataclass
class AntennaLayout:
    """Cartesian MA coordinates: tx shape (2, M), rx shape (2, N), meters."""

    tx: np.ndarray
    rx: np.ndarray

    def __post_init__(self):
        self.tx = np.asarray(self.tx, dtype=float).reshape(2, -1)
        self.rx = np.asarray(self.rx, dtype=float).reshape(2, -1)

    @classmethod
    def from_stacked(cls, u: np.ndarray, num_tx: int, num_rx: int
                     ) -> "AntennaLayout":
        """Split a stacked vector [t1x t1y ... tMx tMy r1x r1y ...]."""
        u = np.asarray(u, dtype=float).ravel()
        if u.size != 2 * (num_tx + num_rx):
            raise ValueError(f"stacked vector has {u.size} entries, "
                             f"expected {2 * (num_tx + num_rx)}")
        tx = u[:2 * num_tx].reshape(num_tx, 2).T
        rx = u[2 * num_tx:].reshape(num_rx, 2).T
        return cls(tx=tx, rx=rx)

    def as_stacked(self) -> np.ndarray:
        return np.concatenate([self.tx.T.ravel(), self.rx.T.ravel()])

    def within_regions(self, config: SystemConfig, tol: float = 1e-12) -> bool:
        ht = config.region_size_tx / 2 + tol
        hr = config.region_size_rx / 2 + tol
        return bool(np.all(np.abs(self.tx) <= ht)
                    and np.all(np.abs(self.rx) <= hr))

    def min_pairwise_distance(self) -> float:
        """Smallest same-region inter-antenna distance (inf if <2 antennas)."""
        return min(_min_dist(self.tx), _min_dist(self.rx))

    def spacing_ok(self, min_spacing: float) -> bool:
        return self.min_pairwise_distance() >= min_spacing


def _min_dist(pos: np.ndarray) -> float:
    n = pos.shape[1]
    if n < 2:
        return math.inf
    diff = pos[:, :, None] - pos[:, None, :]
    d = np.sqrt(np.sum(diff ** 2, axis=0))
    iu = np.triu_indices(n, k=1)
    return float(d[iu].min())


@dataclass
class ChannelSet:
    """All channels realized at one antenna layout."""

    h_si: np.ndarray   # complex (N, M)
    ul: np.ndarray     # complex (N, J), column j = l_j(r)
    dl: np.ndarray     # complex (M, K), column k = h_k(t)

    def l(self, j: int) -> np.ndarray:
        return self.ul[:, j]

    def h(self, k: int) -> np.ndarray:
        return self.dl[:, k]


def path_delta(position, angles: PathAngles) -> float:
    """Propagation-distance difference x*sin(el)*cos(az) + y*cos(el)."""
    x, y = float(position[0]), float(position[1])
    return x * math.sin(angles.elevation) * math.cos(angles.azimuth) \
        + y * math.cos(angles.elevation)


def field_response(position, angles, wavelength: float) -> np.ndarray:
    """Unit-modulus phase vector of one antenna over a list of paths."""
    ang = angles_array(angles) if not isinstance(angles, np.ndarray) else angles
    x, y = float(position[0]), float(position[1])
    deltas = x * np.sin(ang[:, 0]) * np.cos(ang[:, 1]) + y * np.cos(ang[:, 0])
    return np.exp(2j * math.pi / wavelength * deltas)


def _response_matrix(positions: np.ndarray, ang: np.ndarray,
                     wavelength: float) -> np.ndarray:
    """(L, n) matrix whose column i is the field response of antenna i."""
    # deltas[l, i] = x_i sin(el_l) cos(az_l) + y_i cos(el_l)
    deltas = (np.outer(np.sin(ang[:, 0]) * np.cos(ang[:, 1]), positions[0])
              + np.outer(np.cos(ang[:, 0]), positions[1]))
    return np.exp(2j * math.pi / wavelength * deltas)


def si_channel(layout: AntennaLayout, scenario: Scenario) -> np.ndarray:
    """Self-interference matrix F(r)^H Sigma G(t), complex (N, M)."""
    lam = scenario.config.wavelength
    g = _response_matrix(layout.tx, angles_array(scenario.si_tx_angles), lam)
    f = _response_matrix(layout.rx, angles_array(scenario.si_rx_angles), lam)
    return f.conj().T @ scenario.si_core @ g


def ul_channel(layout: AntennaLayout, scenario: Scenario, j: int) -> np.ndarray:
    """LoS uplink channel of UT j at the receive layout, complex (N,)."""
    if not 0 <= j < scenario.config.num_ul_uts:
        raise IndexError(f"UL UT index {j} out of range")
    lam = scenario.config.wavelength
    resp = _response_matrix(layout.rx,
                            angles_array(scenario.ul_angles)[j:j + 1], lam)
    return scenario.ul_coeffs[j] * resp[0]


def dl_channel(layout: AntennaLayout, scenario: Scenario, k: int) -> np.ndarray:
    """LoS downlink channel of UT k at the transmit layout, complex (M,)."""
    if not 0 <= k < scenario.config.num_dl_uts:
        raise IndexError(f"DL UT index {k} out of range")
    lam = scenario.config.wavelength
    resp = _response_matrix(layout.tx,
                            angles_array(scenario.dl_angles)[k:k + 1], lam)
    return scenario.dl_coeffs[k] * resp[0]


def assemble(layout: AntennaLayout, scenario: Scenario) -> ChannelSet:
    """Build every channel quantity needed by the receiver and the inner
    optimization at the given layout."""
    lam = scenario.config.wavelength
    ul_resp = _response_matrix(layout.rx, angles_array(scenario.ul_angles), lam)
    dl_resp = _response_matrix(layout.tx, angles_array(scenario.dl_angles), lam)
    return ChannelSet(
        h_si=si_channel(layout, scenario),
        ul=ul_resp.T * scenario.ul_coeffs[None, :],
        dl=dl_resp.T * scenario.dl_coeffs[None, :],
    )
