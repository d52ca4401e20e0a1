"""Pipeline configuration and dataset manifests (JSON)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .features.descriptors import PlaneCombination

DESCRIPTOR_KINDS = ("LBP", "HOG", "HIGO")
ALPHA_LEVELS = (1, 2, 4, 8, 12, 16, 20, 24, 30)
TIM_LENGTHS = (None, 10, 20, 30, 40, 50, 60, 70, 80)


class ConfigError(ValueError):
    pass


@dataclass
class SpotConfig:
    window_seconds: float = 0.32
    feature: str = "LBP"
    n_top_blocks: int = 12
    tau: float = 0.15
    lbp_p: int = 8
    lbp_r: int = 3


@dataclass
class MagnifyConfig:
    alpha: float = 4.0
    gamma: float = 16.0
    band: list | None = None
    levels: int = 4


@dataclass
class DescriptorConfig:
    kind: str = "HIGO"
    partition: list = field(default_factory=lambda: [4, 4, 2])
    combo: str = "XYOT"
    p: int = 8
    r: int = 3
    bins: int = 8
    global_norm: str | None = "l2"


@dataclass
class ClassifierConfig:
    C: float | str = "auto"
    standardize: bool = True
    mode: str = "subject"


@dataclass
class PipelineConfig:
    spot: SpotConfig = field(default_factory=SpotConfig)
    magnify: MagnifyConfig = field(default_factory=MagnifyConfig)
    tim_length: int | None = 10
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    model_landmarks: str | None = None
    jobs: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data or {})
        nested = {"spot": SpotConfig, "magnify": MagnifyConfig, "descriptor": DescriptorConfig, "classifier": ClassifierConfig}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            if key in nested:
                sub = nested[key]
                sub_known = {f.name for f in fields(sub)}
                bad = set(value) - sub_known
                if bad:
                    raise ConfigError(f"unknown keys in {key!r}: {sorted(bad)}")
                kwargs[key] = sub(**value)
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        if path is None:
            return cls()
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def validate(self) -> None:
        s = self.spot
        if s.feature not in ("LBP", "HOOF"):
            raise ConfigError(f"spot.feature must be LBP or HOOF, got {s.feature!r}")
        if not 1 <= s.n_top_blocks <= 36:
            raise ConfigError("spot.n_top_blocks must be in [1, 36]")
        if not 0 <= s.tau <= 1:
            raise ConfigError("spot.tau must be in [0, 1]")
        if s.window_seconds <= 0:
            raise ConfigError("spot.window_seconds must be positive")
        if self.magnify.alpha < 1:
            raise ConfigError("magnify.alpha must be >= 1")
        if self.magnify.band is not None and (len(self.magnify.band) != 2 or not 0 < self.magnify.band[0] < self.magnify.band[1]):
            raise ConfigError("magnify.band must be [lo, hi] with 0 < lo < hi")
        if self.tim_length is not None and self.tim_length < 2:
            raise ConfigError("tim_length must be >= 2 or null")
        d = self.descriptor
        if d.kind not in DESCRIPTOR_KINDS:
            raise ConfigError(
                f"descriptor.kind {d.kind!r} cannot be combined with plane combination {d.combo!r}; "
                f"recognition descriptors are {DESCRIPTOR_KINDS}"
            )
        try:
            PlaneCombination(d.combo)
        except ValueError:
            raise ConfigError(f"descriptor.combo must be one of {[c.value for c in PlaneCombination]}, got {d.combo!r}")
        if len(d.partition) != 3 or min(d.partition) < 1:
            raise ConfigError("descriptor.partition must be three positive counts")
        if d.global_norm not in ("l1", "l2", None):
            raise ConfigError("descriptor.global_norm must be l1, l2 or null")
        c = self.classifier
        if c.C != "auto" and not (isinstance(c.C, (int, float)) and c.C > 0):
            raise ConfigError("classifier.C must be 'auto' or a positive number")
        if c.mode not in ("subject", "sample"):
            raise ConfigError("classifier.mode must be 'subject' or 'sample'")
        if self.model_landmarks is not None and not Path(self.model_landmarks).is_file():
            raise ConfigError(f"model landmark file not found: {self.model_landmarks}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


@dataclass
class ClipRecord:
    id: str
    dir: Path
    fps: float
    subject: str
    anchors: Path | None = None
    landmarks: Path | None = None
    label: str | None = None
    ground_truth: Path | None = None


def load_manifest(path) -> list[ClipRecord]:
    """JSON array of clip records; relative paths resolve against the manifest's folder."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(data, list):
        raise ConfigError("manifest must be a JSON array of clip records")
    if not data:
        raise ConfigError("no sequences in manifest")
    root = path.parent
    records, seen = [], set()
    for i, rec in enumerate(data):
        try:
            cid = str(rec["id"])
            r = ClipRecord(
                id=cid,
                dir=root / rec["dir"],
                fps=float(rec["fps"]),
                subject=str(rec["subject"]),
                anchors=root / rec["anchors"] if rec.get("anchors") else None,
                landmarks=root / rec["landmarks"] if rec.get("landmarks") else None,
                label=rec.get("label"),
                ground_truth=root / rec["ground_truth"] if rec.get("ground_truth") else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"manifest record {i} is invalid: {exc}") from exc
        if cid in seen:
            raise ConfigError(f"duplicate clip id {cid!r}")
        if not r.subject:
            raise ConfigError(f"clip {cid!r} has an empty subject")
        seen.add(cid)
        records.append(r)
    return records


def write_manifest(path, records: list[dict]) -> None:
    Path(path).write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")


def require_files(records, *attrs) -> None:
    for r in records:
        for a in attrs:
            p = getattr(r, a)
            if p is None:
                raise ConfigError(f"clip {r.id!r} has no {a} file")
            if not Path(p).exists():
                raise ConfigError(f"clip {r.id!r}: {a} file {p} not found")
