"""Training configuration and its sectioned key-value file format.

Config files are INI-style (configparser): keys may live in any section;
section names are organisational only. CLI flags override file values.
Defaults follow the reference setup for the largest public benchmark.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

from .errors import ConfigError

INIT_HAC = "hac"
INIT_KMEANS = "kmeans"
KGE_CHOICES = ("bce", "margin", "transe")


@dataclass
class TrainConfig:
    # thresholds for the agglomerative initialization (entity / relation)
    theta_e: float = 0.4
    theta_r: float = 0.37
    # architecture
    d_in: int = 768
    d_z: int = 100
    hidden_widths: tuple[int, ...] = (768, 384)
    # training schedule
    t_e: int = 50
    t_d: int = 300
    lr_step1: float = 1e-3
    lr_step2: float = 1e-4
    batch_size_train: int = 50
    batch_size_eval: int = 5
    l1_weight: float = 1e-3
    tau: float = 1e5
    num_negatives: int = 20
    seed: int = 55
    var_floor: float = 1e-4
    # initialization choices
    embed_mode: str = "normalized"
    init: str = INIT_HAC
    kmeans_k_e: int | None = None
    kmeans_k_r: int | None = None
    kmeans_max_iters: int = 100
    # ablations
    no_kge: bool = False
    no_hidden_layer: bool = False
    pipeline_vae_hac: bool = False
    freeze_lookup_step1: bool = False
    kge: str = "bce"

    def __post_init__(self):
        self.hidden_widths = tuple(int(w) for w in self.hidden_widths)
        if self.no_hidden_layer and len(self.hidden_widths) > 1:
            self.hidden_widths = self.hidden_widths[-1:]
        positives = {
            "d_in": self.d_in, "d_z": self.d_z,
            "lr_step1": self.lr_step1, "lr_step2": self.lr_step2,
            "batch_size_train": self.batch_size_train,
            "batch_size_eval": self.batch_size_eval,
            "tau": self.tau, "num_negatives": self.num_negatives,
            "var_floor": self.var_floor,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.t_e < 0 or self.t_d < 0:
            raise ConfigError("epoch counts must be non-negative")
        if self.l1_weight < 0:
            raise ConfigError("l1_weight must be non-negative")
        if self.theta_e < 0 or self.theta_r < 0:
            raise ConfigError("thresholds must be non-negative")
        if self.init not in (INIT_HAC, INIT_KMEANS):
            raise ConfigError(f"init must be hac or kmeans, got {self.init!r}")
        if self.init == INIT_KMEANS and (self.kmeans_k_e is None
                                         or self.kmeans_k_r is None):
            raise ConfigError("kmeans initialization requires explicit "
                              "kmeans_k_e and kmeans_k_r")
        if self.kge not in KGE_CHOICES:
            raise ConfigError(f"kge must be one of {KGE_CHOICES}, got {self.kge!r}")
        if self.embed_mode not in ("normalized", "unnormalized"):
            raise ConfigError("embed_mode must be normalized or unnormalized")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["hidden_widths"] = list(self.hidden_widths)
        return out


_BOOL_FIELDS = {"no_kge", "no_hidden_layer", "pipeline_vae_hac",
                "freeze_lookup_step1"}
_INT_FIELDS = {"d_in", "d_z", "t_e", "t_d", "batch_size_train",
               "batch_size_eval", "num_negatives", "seed", "kmeans_k_e",
               "kmeans_k_r", "kmeans_max_iters"}
_FLOAT_FIELDS = {"theta_e", "theta_r", "lr_step1", "lr_step2", "l1_weight",
                 "tau", "var_floor"}
_STR_FIELDS = {"embed_mode", "init", "kge"}


def _convert(key: str, raw: str):
    raw = raw.strip()
    if key == "hidden_widths":
        return tuple(int(part) for part in raw.split(",") if part.strip())
    if key in _BOOL_FIELDS:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if key in _INT_FIELDS:
        return int(raw)
    if key in _FLOAT_FIELDS:
        return float(raw)
    if key in _STR_FIELDS:
        return raw
    raise ConfigError(f"unknown config key {key!r}")


def load_config(path) -> TrainConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    values: dict = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key in values:
                raise ConfigError(f"config key {key!r} set twice")
            try:
                values[key] = _convert(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
    return TrainConfig(**values)


def write_config(cfg: TrainConfig, path) -> None:
    parser = configparser.ConfigParser()
    d = cfg.to_dict()
    sections = {
        "model": ("d_in", "d_z", "hidden_widths"),
        "init": ("theta_e", "theta_r", "init", "kmeans_k_e", "kmeans_k_r",
                 "kmeans_max_iters", "embed_mode", "var_floor"),
        "training": ("t_e", "t_d", "lr_step1", "lr_step2",
                     "batch_size_train", "batch_size_eval", "l1_weight",
                     "tau", "num_negatives", "seed"),
        "ablations": ("no_kge", "no_hidden_layer", "pipeline_vae_hac",
                      "freeze_lookup_step1", "kge"),
    }
    for section, keys in sections.items():
        parser[section] = {}
        for key in keys:
            value = d[key]
            if value is None:
                continue
            if key == "hidden_widths":
                value = ",".join(str(w) for w in value)
            parser[section][key] = str(value)
    with open(path, "w", encoding="utf-8") as f:
        parser.write(f)
