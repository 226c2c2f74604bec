"""Hyperparameter search ranges and the algorithm configuration record."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

ALGORITHMS = (
    "KMeans", "KernelKMeans", "AggClu", "DBSCAN", "BIRCH",
    "GMM", "SpeClu", "MeanShift", "kPC", "SSC",
)
NO_K = frozenset({"DBSCAN", "MeanShift"})
METRICS = ("euclidean", "manhattan", "cosine")

# Each algorithm maps to a list of blocks; a block is an ordered mapping
# param -> candidate values whose Cartesian product (first key slowest) is
# enumerated.  Multiple blocks are concatenated (SpeClu has two affinities).
SEARCH_SPACE: dict[str, list[dict[str, list]]] = {
    "KMeans": [{
        "init": ["kmeans++", "random"],
        "metric": list(METRICS),
        "n_init": [10],
        "max_iter": [500],
    }],
    "KernelKMeans": [{
        "kernel": ["rbf"],
        "gamma": [0.01, 0.1, 1.0, 10.0, 100.0],
        "init": ["kmeans++", "random"],
        "metric": ["euclidean"],
        "max_iter": [500],
    }],
    "AggClu": [{
        "metric": list(METRICS),
        "linkage": ["average", "complete", "single"],
    }],
    "DBSCAN": [{
        "eps": [0.001, 0.005, 0.01, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 10.0],
        "min_sample": [3, 5, 10],
        "metric": list(METRICS),
    }],
    "BIRCH": [{
        "threshold": [0.3, 0.5, 0.7, 0.9],
        "branching_factor": [30, 50, 70],
    }],
    "GMM": [{
        "covariance_type": ["full", "spherical"],
        "init_params": ["kmeans", "kmeans++", "random"],
    }],
    "SpeClu": [
        {"affinity": ["knn"], "k": [3, 5, 10, 20, 30, 50]},
        {"affinity": ["rbf"], "gamma": [0.1, 0.5, 1.0, 5.0, 10.0]},
    ],
    "MeanShift": [{
        "bandwidth": [0.1, 0.3, 0.5, 0.7],
        "min_bin_freq": [1, 3, 5],
    }],
    "kPC": [{
        "init_type": ["k-means"],
        "d": [5, 10, 20, 30, 50],
    }],
    "SSC": [{
        "lambda": [100.0, 10.0, 1.0, 0.1, 0.01],
    }],
}


class ConfigError(ValueError):
    pass


def format_value(v: Any) -> str:
    return str(v)


def parse_value(s: str) -> Any:
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def _allowed(algorithm: str, key: str) -> list:
    values: list = []
    for block in SEARCH_SPACE[algorithm]:
        for v in block.get(key, []):
            if v not in values:
                values.append(v)
    return values


@dataclass(frozen=True)
class AlgorithmConfig:
    algorithm: str
    params: dict = field(default_factory=dict)
    K: Optional[int] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.algorithm not in SEARCH_SPACE:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        blocks = SEARCH_SPACE[self.algorithm]
        if not any(set(self.params) == set(b) for b in blocks):
            expected = " | ".join(",".join(b) for b in blocks)
            raise ConfigError(f"{self.algorithm}: parameters {sorted(self.params)} do not match {expected}")
        for key, value in self.params.items():
            if value not in _allowed(self.algorithm, key):
                raise ConfigError(f"{self.algorithm}: {key}={value!r} outside the search range")
        if self.K is not None:
            if self.algorithm in NO_K:
                raise ConfigError(f"{self.algorithm} does not take K")
            if int(self.K) < 1:
                raise ConfigError("K must be positive")

    @property
    def config_id(self) -> str:
        body = ";".join(f"{k}={format_value(v)}" for k, v in self.params.items())
        return f"{self.algorithm}/{body}"

    @classmethod
    def from_id(cls, config_id: str, K: Optional[int] = None) -> "AlgorithmConfig":
        algorithm, _, body = config_id.partition("/")
        params = {}
        for item in filter(None, body.split(";")):
            k, _, v = item.partition("=")
            params[k] = parse_value(v)
        return cls(algorithm, params, K)

    def with_k(self, K: Optional[int]) -> "AlgorithmConfig":
        if self.algorithm in NO_K:
            return AlgorithmConfig(self.algorithm, dict(self.params), None)
        return AlgorithmConfig(self.algorithm, dict(self.params), K)


def algorithm_of(config_id: str) -> str:
    return config_id.partition("/")[0]
