"""Run configuration: JSON on disk, a stable hash, and derived seeds."""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..serialization import canonical_json

DEFAULT_FUSION = ("scene:centrist", "face:tf", "face:vlad", "face:wa", "face:gmm", "text:bow")
POSE_FUSION = ("pose:tf", "pose:vlad", "pose:wa", "pose:gmm")
ENTITY_ENCODERS = ("tf", "vlad", "wa", "gmm")

# keys that change where or how fast a run happens, never its results
_UNHASHED = ("output_dir", "workers")


class ConfigError(ValueError):
    pass


def _default_classifiers():
    return {
        "rf": {"trees": 300, "max_depth": 16, "min_leaf": 1, "mtry": "sqrt"},
        "et": {"trees": 300, "max_depth": 16, "min_leaf": 1, "mtry": "sqrt"},
        "gbt": {"rounds": 200, "learning_rate": 0.1, "max_depth": 3},
        "svm": {"C": 1.0, "epochs": 50},
    }


@dataclass
class RunConfig:
    seed: int = 0
    vocab_size: int = 1000
    gmm_components: int = 512
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-6
    gmm_max_iter: int = 100
    gmm_tol: float = 1e-6
    caption_min_count: int = 1
    # fixed BOW length (most frequent training tokens, padded); None sizes it from the data
    caption_vocab_size: int = 364
    fusion: list = field(default_factory=lambda: list(DEFAULT_FUSION))
    include_pose: bool = False
    classifiers: dict = field(default_factory=_default_classifiers)
    combiner: dict = field(default_factory=lambda: {"l2": 1e-4, "epochs": 500, "lr": 0.5})
    folds: int = 5
    # "concat": every classifier kind on the fused vector;
    # "per-modality": every kind on every fused part separately
    stack_mode: str = "concat"
    evaluate_individual: bool = True
    workers: int = 1
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.fusion = list(self.fusion)
        if self.stack_mode not in ("concat", "per-modality"):
            raise ConfigError(f"unknown stack_mode {self.stack_mode!r}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.caption_vocab_size is not None and self.caption_vocab_size < 1:
            raise ConfigError("caption_vocab_size must be >= 1 or null")
        if self.vocab_size < 1 or self.gmm_components < 1:
            raise ConfigError("vocab_size and gmm_components must be >= 1")
        for kind in self.classifiers:
            if kind not in ("rf", "et", "gbt", "svm"):
                raise ConfigError(f"unknown tier-1 classifier {kind!r}")
        for item in self.fusion_order():
            _parse_feature(item)

    def fusion_order(self):
        order = list(self.fusion)
        if self.include_pose:
            order += [f for f in POSE_FUSION if f not in order]
        return order

    def to_dict(self):
        return asdict(self)

    def hashed_dict(self):
        return {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}

    def config_hash(self):
        return hashlib.sha256(canonical_json(self.hashed_dict()).encode("utf-8")).hexdigest()[:16]

    def derive_seed(self, *names):
        return derive_seed(self.seed, *names)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**data)


def _parse_feature(item):
    modality, sep, encoder = item.partition(":")
    valid = {"scene": ("centrist",), "text": ("bow",), "face": ENTITY_ENCODERS, "pose": ENTITY_ENCODERS}
    if not sep or modality not in valid or encoder not in valid[modality]:
        raise ConfigError(f"bad fusion entry {item!r}; expected modality:encoder such as face:vlad")
    return modality, encoder


def derive_seed(root, *names):
    """Stable 32-bit child seed of ``root`` for a named stochastic step."""
    key = ":".join([str(root), *map(str, names)]).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little")


def load_config(path=None, **overrides):
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)
