"""Network model: sources, multicast groups, path-loss gains and SINR."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ConfigError(ValueError):
    """Raised when an instance configuration violates a bound."""


def db_to_linear(value_db: float) -> float:
    return float(10.0 ** (value_db / 10.0))


@dataclass(frozen=True)
class InstanceConfig:
    num_sources: int
    group_size: int = 2
    path_loss_exponent: float = 3.0
    noise_power: float = 0.1
    distance_range: tuple[float, float] = (0.05, 1.0)
    seed: int = 0

    def validate(self) -> None:
        if self.num_sources < 1:
            raise ConfigError(f"num_sources must be >= 1, got {self.num_sources}")
        if self.group_size < 1:
            raise ConfigError(f"group_size must be >= 1, got {self.group_size}")
        if not self.path_loss_exponent > 0:
            raise ConfigError(
                f"path_loss_exponent must be > 0, got {self.path_loss_exponent}"
            )
        if not self.noise_power > 0:
            raise ConfigError(f"noise_power must be > 0, got {self.noise_power}")
        lo, hi = self.distance_range
        if not lo > 0:
            raise ConfigError(f"distance_range lower bound must be > 0, got {lo}")
        if not hi >= lo:
            raise ConfigError(f"distance_range upper bound {hi} below lower bound {lo}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """A set of one-hop multicast sessions.

    Destinations are numbered globally ``0..M-1``; ``groups[i]`` lists the
    destinations of source ``i`` in order.  ``distances`` has shape ``(N, M)``
    and covers cross-group pairs as well, since those carry interference.
    """

    groups: tuple[tuple[int, ...], ...]
    distances: np.ndarray
    path_loss_exponent: float
    noise_power: float
    gains: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        groups = tuple(tuple(int(j) for j in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        dist = np.array(self.distances, dtype=float)
        dist.setflags(write=False)
        object.__setattr__(self, "distances", dist)
        self._validate()
        gains = dist ** (-float(self.path_loss_exponent))
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)

    def _validate(self) -> None:
        n = len(self.groups)
        if n < 1:
            raise ConfigError("instance needs at least one source")
        if any(len(g) == 0 for g in self.groups):
            raise ConfigError("every source needs at least one destination")
        members = sorted(j for g in self.groups for j in g)
        if members != list(range(len(members))):
            raise ConfigError("every destination must belong to exactly one group")
        if self.distances.shape != (n, len(members)):
            raise ConfigError(
                f"distance matrix shape {self.distances.shape} does not match "
                f"({n}, {len(members)})"
            )
        if not np.all(np.isfinite(self.distances)) or np.any(self.distances <= 0):
            raise ConfigError("distances must be finite and strictly positive")
        if not self.path_loss_exponent > 0:
            raise ConfigError("path_loss_exponent must be > 0")
        if not self.noise_power > 0:
            raise ConfigError("noise_power must be > 0")

    @property
    def num_sources(self) -> int:
        return len(self.groups)

    @property
    def num_destinations(self) -> int:
        return self.distances.shape[1]

    @property
    def sources(self) -> range:
        return range(self.num_sources)

    @property
    def group_sizes(self) -> list[int]:
        return [len(g) for g in self.groups]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NetworkInstance):
            return NotImplemented
        return (
            self.groups == other.groups
            and self.path_loss_exponent == other.path_loss_exponent
            and self.noise_power == other.noise_power
            and np.array_equal(self.distances, other.distances)
        )

    __hash__ = None  # type: ignore[assignment]


def generate_instance(config: InstanceConfig) -> NetworkInstance:
    """Draw all source-destination distances i.i.d. uniform from the range."""
    config.validate()
    n, d = config.num_sources, config.group_size
    rng = np.random.default_rng(config.seed)
    lo, hi = config.distance_range
    distances = rng.uniform(lo, hi, size=(n, n * d))
    groups = tuple(tuple(range(i * d, (i + 1) * d)) for i in range(n))
    return NetworkInstance(
        groups=groups,
        distances=distances,
        path_loss_exponent=float(config.path_loss_exponent),
        noise_power=float(config.noise_power),
    )


def _check_ids(instance: NetworkInstance, i: int, j: int) -> None:
    if not 0 <= i < instance.num_sources:
        raise KeyError(f"unknown source id {i}")
    if not 0 <= j < instance.num_destinations:
        raise KeyError(f"unknown destination id {j}")


def gain(instance: NetworkInstance, i: int, j: int) -> float:
    """Path gain ``d_ij ** -a`` from source ``i`` to destination ``j``."""
    _check_ids(instance, i, j)
    return float(instance.gains[i, j])


def sinr(instance: NetworkInstance, powers: Sequence[float], i: int, j: int) -> float:
    """SINR at destination ``j`` for source ``i``'s signal, all others interfering."""
    _check_ids(instance, i, j)
    p = np.asarray(powers, dtype=float)
    if p.shape != (instance.num_sources,):
        raise ValueError(
            f"expected {instance.num_sources} power entries, got shape {p.shape}"
        )
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("transmit powers must be finite and non-negative")
    received = p * instance.gains[:, j]
    interference = float(received.sum() - received[i])
    return float(received[i]) / (instance.noise_power + interference)


@dataclass(frozen=True)
class ConflictGraph:
    vertices: tuple[tuple[int, int], ...]
    edges: frozenset[frozenset[tuple[int, int]]]

    def adjacent(self, a: tuple[int, int], b: tuple[int, int]) -> bool:
        return frozenset((a, b)) in self.edges

    def neighbors(self, link: tuple[int, int]) -> set[tuple[int, int]]:
        out = set()
        for e in self.edges:
            if link in e:
                out |= e - {link}
        return out


def build_conflict_graph(
    instance: NetworkInstance, reference_power: float, beta: float
) -> ConflictGraph:
    """Pairwise conflict graph over point-to-point links.

    Links ``(i, j)`` and ``(k, l)`` with ``i != k`` conflict when switching on
    both transmitters at ``reference_power`` drops either SINR below ``beta``.
    Links sharing a transmitter never conflict.
    """
    if not reference_power > 0:
        raise ValueError("reference_power must be > 0")
    links = tuple((i, j) for i in instance.sources for j in instance.groups[i])
    g = instance.gains
    sigma2 = instance.noise_power
    edges = set()
    for a, (i, j) in enumerate(links):
        for k, l in links[a + 1 :]:
            if i == k:
                continue
            sinr_j = reference_power * g[i, j] / (sigma2 + reference_power * g[k, j])
            sinr_l = reference_power * g[k, l] / (sigma2 + reference_power * g[i, l])
            if sinr_j < beta or sinr_l < beta:
                edges.add(frozenset(((i, j), (k, l))))
    return ConflictGraph(vertices=links, edges=frozenset(edges))
