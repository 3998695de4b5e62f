"""Run configuration for the segmenter."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidInputError


@dataclass(frozen=True)
class AcevConfig:
    """All tunables of a segmentation run.

    ``alpha`` and ``k`` default to the values used on the benchmark datasets
    (0.6 and 25). ``angle_tol`` is the tolerance that decides when a measured
    angular gap differs "insignificantly" from its EMA prediction; it is the
    most consequential free parameter. ``min_neigh=None`` selects the
    filtration floor ``max(5, d + 1, ceil(min_neigh_frac * k))`` for a
    manifold of intrinsic dimension ``d``; ``min_neigh_frac=0`` gives the
    plain ``max(5, d + 1)`` rule.

    The last four fields select between variants of the traversal rules;
    :meth:`literal` switches all of them to the unrefined form.

    matching
        ``"subspace"`` compares child directions with the parent's tangent
        and normal blocks; ``"rank"`` pairs directions by eigenvalue rank.
    filter_distance
        ``"offset"`` or ``"line"``, the per-direction distance in ``mod_dis``.
    refresh_neighborhoods
        Recompute k-NN lists over the still-unlabelled points whenever a new
        manifold starts.
    ema_gate
        ``"prediction"`` bounds ``|E(s-1) - observed|``; ``"update"`` bounds
        ``|E(s) - observed|``, whose window widens by ``1 / (1 - alpha)``.
    """

    k: int = 25
    alpha: float = 0.6
    angle_tol: float = 0.15
    var_thresh: float = 0.01
    zero_tol: float = 1e-8
    warmup_frac: float = 0.0005
    min_neigh: int | None = None
    min_neigh_frac: float = 0.4
    seed: int = 0
    components_by_graph: bool = False
    mutual_knn: bool = False
    matching: str = "subspace"
    filter_distance: str = "offset"
    refresh_neighborhoods: bool = True
    ema_gate: str = "prediction"

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError(f"k must be >= 1, got {self.k}")
        if not 0 < self.alpha < 1:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.angle_tol > 0:
            raise InvalidInputError(f"angle_tol must be positive, got {self.angle_tol}")
        if not 0 <= self.var_thresh < 1:
            raise InvalidInputError(f"var_thresh must lie in [0, 1), got {self.var_thresh}")
        if not self.zero_tol > 0:
            raise InvalidInputError(f"zero_tol must be positive, got {self.zero_tol}")
        if not 0 <= self.warmup_frac < 1:
            raise InvalidInputError(f"warmup_frac must lie in [0, 1), got {self.warmup_frac}")
        if self.matching not in ("subspace", "rank"):
            raise InvalidInputError(f"matching must be 'subspace' or 'rank', got {self.matching!r}")
        if self.filter_distance not in ("offset", "line"):
            raise InvalidInputError(
                f"filter_distance must be 'offset' or 'line', got {self.filter_distance!r}")
        if self.ema_gate not in ("prediction", "update"):
            raise InvalidInputError(f"ema_gate must be 'prediction' or 'update', got {self.ema_gate!r}")
        if not 0 <= self.min_neigh_frac <= 1:
            raise InvalidInputError(f"min_neigh_frac must lie in [0, 1], got {self.min_neigh_frac}")
        if self.min_neigh is not None:
            if self.min_neigh < 2:
                raise InvalidInputError(f"min_neigh must be >= 2, got {self.min_neigh}")
            if self.k < self.min_neigh:
                raise InvalidInputError(f"k={self.k} is below min_neigh={self.min_neigh}")

    def filtration_floor(self, parent_dim: int) -> int:
        """Smallest neighborhood filtration may shrink a candidate to."""
        if self.min_neigh is not None:
            return self.min_neigh
        return max(5, parent_dim + 1, math.ceil(self.min_neigh_frac * self.k))

    @classmethod
    def literal(cls, **changes) -> "AcevConfig":
        """The traversal rules taken word for word, without the robustness refinements.

        Directions are matched by eigenvalue rank, the EMA gate bounds the
        updated average, filtration uses line distances with the plain
        ``max(5, d + 1)`` floor, and neighborhoods are never recomputed.
        """
        base = dict(matching="rank", ema_gate="update", filter_distance="line",
                    refresh_neighborhoods=False, min_neigh_frac=0.0)
        base.update(changes)
        return cls(**base)

    def replace(self, **changes) -> "AcevConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def coerce_value(field, text):
    """Parse ``text`` as a value for the AcevConfig ``field``."""
    text = text.strip()
    if field.name == "min_neigh":
        return None if text.lower() in ("", "none", "auto") else int(text)
    if field.type in ("bool", bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if field.type in ("str", str):
        return text
    if field.type in ("int", int):
        return int(text)
    return float(text)


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines into AcevConfig overrides. ``#`` starts a comment."""
    fields = {f.name: f for f in dataclasses.fields(AcevConfig)}
    aliases = {name.replace("_", "-"): name for name in fields}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        name = aliases.get(key, key)
        if name not in fields:
            raise InvalidInputError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            out[name] = coerce_value(fields[name], value)
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    return out
