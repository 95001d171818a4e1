# -*- coding: utf-8 -*-
"""
Discrete ordinates on the unit sphere: a Gauss-Legendre x uniform-azimuth product
rule with weights normalized to the sphere area 4*pi.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict

import numpy as np
from prefeitura_rio.pipelines_utils.logging import log

from pipelines.constants import constants

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True, eq=False)
class AngularQuadrature:
    """
    Product quadrature on S^2. Node `q = i * n_azimuth + j` pairs polar cosine
    `mu[i]` with azimuth `phi[j]`. Arrays are read-only.
    """

    nodes: np.ndarray
    weights: np.ndarray
    mu: np.ndarray
    phi: np.ndarray
    n_polar: int
    n_azimuth: int

    def __post_init__(self):
        for arr in (self.nodes, self.weights, self.mu, self.phi):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    def __hash__(self) -> int:
        return hash((self.n_polar, self.n_azimuth))

    def __eq__(self, other) -> bool:
        if not isinstance(other, AngularQuadrature):
            return NotImplemented
        return (self.n_polar, self.n_azimuth) == (other.n_polar, other.n_azimuth)

    def moment_errors(self) -> Dict[str, float]:
        """Max deviations of the zeroth, first and second moments from their exact values."""
        second = np.einsum("q,qa,qb->ab", self.weights, self.nodes, self.nodes)
        return {
            "zeroth": abs(float(self.weights.sum()) - FOUR_PI),
            "first": float(np.max(np.abs(self.weights @ self.nodes))),
            "second": float(np.max(np.abs(second - FOUR_PI / 3.0 * np.eye(3)))),
            "unit_norm": float(np.max(np.abs(np.linalg.norm(self.nodes, axis=1) - 1.0))),
        }


@lru_cache(maxsize=None)
def build_quadrature(
    n_polar: int = constants.DEFAULT_N_POLAR.value,
    n_azimuth: int = constants.DEFAULT_N_AZIMUTH.value,
) -> AngularQuadrature:
    """
    Builds the product rule.

    Args:
        n_polar (int): Gauss-Legendre points in mu = cos(theta), at least 2.
        n_azimuth (int): Uniform azimuth points phi_j = (j + 1/2) 2pi / n, even and at least 4.

    Returns:
        AngularQuadrature: rule with sum(w) = 4pi, sum(w beta) = 0 and
        sum(w beta beta^T) = 4pi/3 I.

    Raises:
        ValueError: if a parameter is below its minimum or n_azimuth is odd.
    """
    if n_polar < 2:
        raise ValueError(f"n_polar must be >= 2, got {n_polar}")
    if n_azimuth < 4 or n_azimuth % 2:
        raise ValueError(f"n_azimuth must be even and >= 4, got {n_azimuth}")

    mu, w_mu = np.polynomial.legendre.leggauss(n_polar)
    phi = (np.arange(n_azimuth) + 0.5) * (2.0 * np.pi / n_azimuth)
    sin_theta = np.sqrt(np.clip(1.0 - mu**2, 0.0, None))

    nodes = np.stack(
        [
            np.outer(sin_theta, np.cos(phi)).ravel(),
            np.outer(sin_theta, np.sin(phi)).ravel(),
            np.repeat(mu, n_azimuth),
        ],
        axis=1,
    )
    weights = np.repeat(w_mu, n_azimuth) * (2.0 * np.pi / n_azimuth)
    weights *= FOUR_PI / weights.sum()

    log(f"Built {n_polar}x{n_azimuth} angular quadrature ({weights.size} nodes)", level="debug")
    return AngularQuadrature(nodes, weights, mu, phi, int(n_polar), int(n_azimuth))


def _check_length(psi: np.ndarray, quad: AngularQuadrature) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape[-1:] != (quad.n_nodes,):
        raise ValueError(f"expected {quad.n_nodes} ordinate values, got shape {psi.shape}")
    return psi


def angular_average(psi: np.ndarray, quad: AngularQuadrature):
    """Radiative density sum_q w_q psi_q over the last axis of `psi`."""
    return _check_length(psi, quad) @ quad.weights


def angular_flux(psi: np.ndarray, quad: AngularQuadrature) -> np.ndarray:
    """First moment sum_q w_q psi_q beta_q; the caller applies the 1/eps factor."""
    return (_check_length(psi, quad) * quad.weights) @ quad.nodes


def _check_unit(vector: np.ndarray, name: str) -> np.ndarray:
    vector = np.asarray(vector, dtype=float)
    if vector.shape[-1] != 3 or np.any(np.abs(np.linalg.norm(vector, axis=-1) - 1.0) > 1e-10):
        raise ValueError(f"{name} must be a unit vector in R^3")
    return vector


def reflect(beta: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Specular reflection beta - 2 (n.beta) n; works row-wise on stacks of directions."""
    beta = _check_unit(beta, "beta")
    n = _check_unit(n, "n")
    return beta - 2.0 * np.sum(beta * n, axis=-1, keepdims=True) * n


def reflection_map(quad: AngularQuadrature, n: np.ndarray) -> np.ndarray:
    """
    Permutation `perm` with nodes[perm[q]] = reflect(nodes[q], n) for an
    axis-aligned normal.

    Raises:
        ValueError: if `n` is not one of the six box normals.
    """
    n = _check_unit(n, "n")
    axes = np.flatnonzero(np.abs(n) > 1e-12)
    if axes.size != 1:
        raise ValueError(f"only axis-aligned normals are supported, got {n}")
    return _reflection_permutation(quad, int(axes[0])).copy()


@lru_cache(maxsize=None)
def _reflection_permutation(quad: AngularQuadrature, axis: int) -> np.ndarray:
    i, j = np.divmod(np.arange(quad.n_nodes), quad.n_azimuth)
    if axis == 0:
        j = (quad.n_azimuth // 2 - 1 - j) % quad.n_azimuth
    elif axis == 1:
        j = quad.n_azimuth - 1 - j
    else:
        i = quad.n_polar - 1 - i
    perm = i * quad.n_azimuth + j

    normal = np.zeros(3)
    normal[axis] = 1.0
    reflected = quad.nodes - 2.0 * np.outer(quad.nodes @ normal, normal)
    if np.max(np.abs(quad.nodes[perm] - reflected)) > 1e-12:
        raise RuntimeError(f"reflection across axis {axis} is not a node permutation")
    perm.setflags(write=False)
    return perm
