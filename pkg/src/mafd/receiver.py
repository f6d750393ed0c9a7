"""Zero-forcing reception statistics: combiners, residual SI, SINRs, rates.

Works at the statistics level (traces of covariance products), matching the
quantities the inner optimization constrains. No symbol-level simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet

COND_LIMIT = 1e12


class SingularChannelError(RuntimeError):
    """UL channel matrix is too ill-conditioned for zero forcing."""

    def __init__(self, cond: float):
        super().__init__(f"UL channel Gram matrix condition number {cond:.3e} "
                         f"exceeds {COND_LIMIT:.0e}")
        self.cond = cond


@dataclass
class ZfBank:
    """Zero-forcing receive combiners, column j = b_j, shape (N, J).

    Satisfies b_j^H l_i = delta_ij up to numerical tolerance.
    """

    vectors: np.ndarray

    def b(self, j: int) -> np.ndarray:
        return self.vectors[:, j]

    def outer(self, j: int) -> np.ndarray:
        b = self.vectors[:, j]
        return np.outer(b, b.conj())


@dataclass
class LinkRates:
    ul_sinr: np.ndarray   # (J,)
    dl_sinr: np.ndarray   # (K,)

    @property
    def ul_rate(self) -> np.ndarray:
        return np.log2(1.0 + self.ul_sinr)

    @property
    def dl_rate(self) -> np.ndarray:
        return np.log2(1.0 + self.dl_sinr)


def zf_bank(channels: ChannelSet) -> ZfBank:
    """Stack b_j = L (L^H L)^{-1} e_j for all UL UTs."""
    l_mat = channels.ul
    gram = l_mat.conj().T @ l_mat
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularChannelError(float(cond))
    inv_gram = np.linalg.solve(gram, np.eye(gram.shape[0], dtype=complex))
    return ZfBank(vectors=l_mat @ inv_gram)


def si_coupling_matrix(zf: ZfBank, h_si: np.ndarray, j: int) -> np.ndarray:
    """Hermitian PSD A_j with Tr{W A_j} = Tr{B_j diag(H W H^H)} for any W.

    A_j = H^H diag(|b_j|^2) H; the residual SI seen by combiner j is
    rho * sum_k Tr{W_k A_j}.
    """
    weights = np.abs(zf.b(j)) ** 2
    return h_si.conj().T @ (weights[:, None] * h_si)


def residual_si(zf: ZfBank, h_si: np.ndarray, w_mats, rho: float,
                j: int) -> float:
    """rho * Tr{B_j diag(sum_k H W_k H^H)}, in watts."""
    if rho == 0.0:
        return 0.0
    total = 0.0
    weights = np.abs(zf.b(j)) ** 2
    for w in w_mats:
        hw = h_si @ w
        diag = np.einsum("nm,nm->n", hw, h_si.conj())
        total += float(np.real(weights @ diag))
    return rho * total


def ul_sinr(zf: ZfBank, channels: ChannelSet, p: np.ndarray, w_mats,
            rho: float, ul_noise: float, j: int) -> float:
    """Uplink SINR of UT j with the full cross-term expression.

    Tr{L_i B_j} = |b_j^H l_i|^2 is kept for every i, so the value stays
    faithful when the ZF bank is imperfect.
    """
    b = zf.b(j)
    cross = np.abs(b.conj() @ channels.ul) ** 2      # (J,), entry i
    sig = cross[j] * p[j]
    interference = float(np.dot(np.delete(cross, j), np.delete(p, j)))
    s_j = residual_si(zf, channels.h_si, w_mats, rho, j)
    noise = float(np.real(b.conj() @ b)) * ul_noise
    return sig / (interference + s_j + noise)


def dl_sinr(channels: ChannelSet, w_mats, c_k: np.ndarray, p: np.ndarray,
            dl_noise_k: float, k: int) -> float:
    """Downlink SINR of UT k at a specific CCI realization c_k (J,)."""
    h = channels.h(k)
    traces = [float(np.real(h.conj() @ w @ h)) for w in w_mats]
    sig = traces[k]
    inter = sum(t for i, t in enumerate(traces) if i != k)
    cci = float(np.abs(c_k) ** 2 @ p)
    return sig / (inter + cci + dl_noise_k)


def link_rates(zf: ZfBank, channels: ChannelSet, p: np.ndarray, w_mats,
               rho: float, ul_noise: float, dl_noise: np.ndarray,
               cci: np.ndarray) -> LinkRates:
    """All SINRs at one operating point; cci is the (J, K) realization."""
    j_n = channels.ul.shape[1]
    k_n = channels.dl.shape[1]
    return LinkRates(
        ul_sinr=np.array([ul_sinr(zf, channels, p, w_mats, rho, ul_noise, j)
                          for j in range(j_n)]),
        dl_sinr=np.array([dl_sinr(channels, w_mats, cci[:, k], p,
                                  dl_noise[k], k) for k in range(k_n)]),
    )


def _ball_samples(rng: np.random.Generator, dim: int, radius: float,
                  count: int) -> np.ndarray:
    """Uniform draws inside the complex dim-ball of given radius, (count, dim)."""
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    u = rng.uniform(0.0, 1.0, size=(count, 1))
    return radius * u ** (1.0 / (2 * dim)) * z / norms


def worst_case_dl_rate(channels: ChannelSet, w_mats, c_hat_k: np.ndarray,
                       eps_k: float, p: np.ndarray, dl_noise_k: float,
                       k: int, samples: int, seed: int = 0) -> float:
    """Sampled lower bound on the DL rate of UT k over the CCI error ball.

    Minimizes log2(1 + SINR) over `samples` uniform draws of the error
    vector plus deterministic boundary probes: +-eps along each coordinate
    axis and along +-c_hat/||c_hat||. Used as an independent certificate for
    the robust constraint.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    dim = c_hat_k.size
    probes = []
    for j in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[j] = eps_k
        probes += [e, -e]
    nrm = np.linalg.norm(c_hat_k)
    if nrm > 0:
        probes += [eps_k * c_hat_k / nrm, -eps_k * c_hat_k / nrm]
    rng = np.random.default_rng(seed)
    draws = _ball_samples(rng, dim, eps_k, samples)
    worst = math.inf
    for delta in list(probes) + list(draws):
        sinr = dl_sinr(channels, w_mats, c_hat_k + delta, p, dl_noise_k, k)
        worst = min(worst, math.log2(1.0 + sinr))
    return worst
