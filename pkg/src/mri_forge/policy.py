"""Policy files: TOML descriptions of augmentation candidates, distraction
options, and dataset-build knobs, with shipped defaults for all of them.

The parameter ranges here are operational defaults, not calibrated
values; every one of them can be overridden from the policy file.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class AugmentCandidate:
    kind: str
    weight: float = 1.0
    ranges: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AugmentPolicy:
    candidates: tuple = ()
    min_specs: int = 1
    max_specs: int = 2

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if self.min_specs < 0 or self.max_specs < self.min_specs:
            raise ValueError(
                f"bad spec count bounds: min {self.min_specs}, max {self.max_specs}"
            )


@dataclass(frozen=True)
class DistractPolicy:
    objects: tuple = ("text", "circle", "rectangle")
    modes: tuple = ("static", "rolling", "spontaneous")
    colors: tuple = ("red", "blue", "green", "white", "black")
    font_scales: tuple = (1, 2, 3, 4, 5, 6)
    thicknesses: tuple = (1, 2, 3)
    appearance_probability: float = 0.2


@dataclass(frozen=True)
class CorpusRule:
    include_fraction: float = 1.0
    augment_fraction: float = 0.0
    distract_fraction: float = 0.0


@dataclass(frozen=True)
class BuildPolicy:
    """How a dataset build selects, transforms, and splits its sources."""

    frame_stride: int = 10
    test_fraction: float = 0.2
    corpora: dict = field(default_factory=dict)
    augment: AugmentPolicy = AugmentPolicy()
    distract: DistractPolicy = DistractPolicy()

    def rule_for(self, corpus: str) -> CorpusRule:
        return self.corpora.get(corpus, CorpusRule())


# photometric/noise candidates are safe after face detection; the
# geometric ones (rotate, hflip, rescale) move pixels away from
# externally supplied face boxes and are only offered standalone
PHOTOMETRIC_CANDIDATES = (
    AugmentCandidate("gaussian", ranges={"variance": (4.0, 64.0)}),
    AugmentCandidate("speckle", ranges={"variance": (0.001, 0.01)}),
    AugmentCandidate("salt_pepper", ranges={"amount": (0.005, 0.05)}),
    AugmentCandidate("pepper", ranges={"amount": (0.005, 0.05)}),
    AugmentCandidate("salt", ranges={"amount": (0.005, 0.05)}),
    AugmentCandidate("poisson"),
    AugmentCandidate("localvar", ranges={"max_variance": (4.0, 64.0)}),
    AugmentCandidate("blur", ranges={"radius": (1, 2)}),
    AugmentCandidate("brightness", ranges={"offset": (-25.0, 25.0)}),
    AugmentCandidate("contrast", ranges={"factor": (0.8, 1.2)}),
)

GEOMETRIC_CANDIDATES = (
    AugmentCandidate("rotate", ranges={"degrees": (-12.0, 12.0)}),
    AugmentCandidate("hflip"),
    AugmentCandidate("rescale", ranges={"factor": (0.75, 1.25)}),
)

DEFAULT_AUGMENT_CANDIDATES = PHOTOMETRIC_CANDIDATES
DEFAULT_AUGMENT_POLICY = AugmentPolicy(PHOTOMETRIC_CANDIDATES, 1, 2)

# augmentation and distraction stay off unless a corpus rule turns them on
DEFAULT_BUILD_POLICY = BuildPolicy(
    corpora={
        "dfdc": CorpusRule(include_fraction=1.0, augment_fraction=0.5, distract_fraction=0.5),
    },
    augment=DEFAULT_AUGMENT_POLICY,
)


def _parse_augment(table: dict) -> AugmentPolicy:
    candidates = []
    for entry in table.get("candidate", []):
        entry = dict(entry)
        kind = entry.pop("kind")
        weight = float(entry.pop("weight", 1.0))
        ranges = {
            k: tuple(v) if isinstance(v, list) else v for k, v in entry.items()
        }
        candidates.append(AugmentCandidate(kind, weight, ranges))
    if not candidates:
        candidates = list(DEFAULT_AUGMENT_CANDIDATES)
    return AugmentPolicy(
        tuple(candidates),
        int(table.get("min_specs", 1)),
        int(table.get("max_specs", 2)),
    )


def _parse_distract(table: dict) -> DistractPolicy:
    base = DistractPolicy()
    return DistractPolicy(
        objects=tuple(table.get("objects", base.objects)),
        modes=tuple(table.get("modes", base.modes)),
        colors=tuple(table.get("colors", base.colors)),
        font_scales=tuple(table.get("font_scales", base.font_scales)),
        thicknesses=tuple(table.get("thicknesses", base.thicknesses)),
        appearance_probability=float(
            table.get("appearance_probability", base.appearance_probability)
        ),
    )


def load_policy(path) -> BuildPolicy:
    """Parse a policy TOML; missing sections fall back to shipped defaults."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"policy file not found: {path}")
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    dataset = doc.get("dataset", {})
    corpora = {}
    for tag, rule in dataset.get("corpora", {}).items():
        corpora[tag] = CorpusRule(
            include_fraction=float(rule.get("include_fraction", 1.0)),
            augment_fraction=float(rule.get("augment_fraction", 0.0)),
            distract_fraction=float(rule.get("distract_fraction", 0.0)),
        )
    if not corpora:
        corpora = dict(DEFAULT_BUILD_POLICY.corpora)
    return BuildPolicy(
        frame_stride=int(dataset.get("frame_stride", 10)),
        test_fraction=float(dataset.get("test_fraction", 0.2)),
        corpora=corpora,
        augment=_parse_augment(doc.get("augment", {})),
        distract=_parse_distract(doc.get("distract", {})),
    )
