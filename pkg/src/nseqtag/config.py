"""Run configuration: model hyper-parameters, feature toggles, data paths,
and training controls, loadable from a flat JSON object with CLI overrides.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError


@dataclass
class LexiconSpec:
    """One lexicon feature block: where it lives and how it is applied."""
    name: str
    path: str
    mode: str = "partial"      # exact | partial | collobert
    encoding: str = "bioes"    # bioes | yn

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class RunConfig:
    # model dimensions (defaults follow the CoNLL-2003 settings)
    word_dim: int = 50
    char_dim: int = 25
    char_type_dim: int = 4
    conv_width: int = 3
    cnn_filters: int = 53
    lstm_size: int = 275
    lstm_layers: int = 1
    # feature toggles
    use_cnn: bool = True
    use_caps: bool = True
    use_char_type: bool = False
    lexicons: list[LexiconSpec] = field(default_factory=list)
    embeddings_path: str | None = None
    # training
    learning_rate: float = 0.0105
    epochs: int = 80
    batch_size: int = 9
    dropout: float = 0.68
    seed: int = 0
    # data handling
    train_path: str | None = None
    dev_path: str | None = None
    dialect: str = "auto"          # auto | iob1 | bio2 | bioes
    digit_split: bool = False
    # bookkeeping
    out_dir: str = "run"
    checkpoint_interval: int = 1
    train_tail: int = 5000         # sentences scored for the trailing-train F1
    failure_metric: str | None = None   # dev_f1 | train_tail_f1
    failure_threshold: float = 95.0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lexicons"] = [lx.to_dict() for lx in self.lexicons]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        lex = d.pop("lexicons", [])
        cfg = cls(**d)
        cfg.lexicons = [lx if isinstance(lx, LexiconSpec) else LexiconSpec(**lx)
                        for lx in lex]
        return cfg

    def validate(self) -> "RunConfig":
        positive = ["word_dim", "char_dim", "char_type_dim", "conv_width",
                    "cnn_filters", "lstm_size", "lstm_layers", "batch_size"]
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.conv_width % 2 == 0:
            raise ConfigError(f"conv_width must be odd, got {self.conv_width}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.dialect not in ("auto", "iob1", "bio2", "bioes"):
            raise ConfigError(f"unknown tag dialect {self.dialect!r}")
        if self.failure_metric not in (None, "dev_f1", "train_tail_f1"):
            raise ConfigError(f"unknown failure metric {self.failure_metric!r}")
        if not 0.0 <= self.failure_threshold <= 100.0:
            raise ConfigError(
                f"failure threshold must be in [0, 100], got {self.failure_threshold}")
        for lx in self.lexicons:
            if lx.mode not in ("exact", "partial", "collobert"):
                raise ConfigError(f"lexicon {lx.name!r}: unknown mode {lx.mode!r}")
            if lx.encoding not in ("bioes", "yn"):
                raise ConfigError(f"lexicon {lx.name!r}: unknown encoding {lx.encoding!r}")
        return self


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(raw)
