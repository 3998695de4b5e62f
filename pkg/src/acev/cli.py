"""Command-line entry points: segment, components, eval, gen, sweep.

Exit status is 0 on success, 1 for bad input or data, 2 for an internal
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import logging
import sys
import time
import traceback
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .components import build_knn_graph, count_components, laplacian, split_components
from .config import AcevConfig, coerce_value, read_config_file
from .dataset import (
    DatasetFile,
    atomic_write,
    labels_csv,
    load_dataset,
    read_labels,
    scene_csv,
)
from .errors import DatasetParseError, InvalidInputError
from .metrics import ari, nmi
from .synthetic import SCENES, make_scene
from .traversal import ManifoldLabeling, segment

log = logging.getLogger("acev")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2

# flag -> AcevConfig field, in the order they appear in --help
CONFIG_FLAGS = {
    "--k": ("k", int),
    "--alpha": ("alpha", float),
    "--angle-tol": ("angle_tol", float),
    "--var-thresh": ("var_thresh", float),
    "--zero-tol": ("zero_tol", float),
    "--warmup-frac": ("warmup_frac", float),
    "--min-neigh": ("min_neigh", int),
    "--seed": ("seed", int),
}


@dataclass
class RunReport:
    """Everything needed to reproduce and judge one segmentation run."""

    version: str
    input_digest: str
    config: dict
    n_points: int
    n_components: int
    manifolds_per_component: list
    manifolds: list
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2) + "\n"


def score(truth, predicted, mask=None) -> dict:
    """ARI and NMI overall and, given a mask, on the points outside it."""
    out = {"ari": ari(truth, predicted), "nmi": nmi(truth, predicted)}
    if mask is not None:
        keep = ~np.asarray(mask, dtype=bool)
        if keep.any():
            out["ari_off_mask"] = ari(truth[keep], predicted[keep])
            out["nmi_off_mask"] = nmi(truth[keep], predicted[keep])
        out["masked_points"] = int((~keep).sum())
    return out


def build_report(labeling: ManifoldLabeling, cfg: AcevConfig, digest, truth=None, mask=None) -> RunReport:
    metrics = {} if truth is None else score(truth, labeling.global_labels(), mask)
    manifolds = [{"component": m.component, "manifold": m.manifold, "size": m.size,
                  "intrinsic_dim": m.intrinsic_dim} for m in labeling.manifolds]
    return RunReport(__version__, digest, cfg.to_dict(), len(labeling.component), labeling.n_components,
                     labeling.manifolds_per_component(), manifolds, metrics, dict(labeling.timings))


def _add_dataset_args(p):
    p.add_argument("input", help="delimited text file, one point per row")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--has-header", action="store_true", help="first row holds column names")
    p.add_argument("--label-col", help="ground-truth column (name or 0-based position)")
    p.add_argument("--mask-col", help="intersection-mask column (name or 0-based position)")


def _add_config_args(p):
    g = p.add_argument_group("segmentation parameters")
    g.add_argument("--config", help="key=value file; flags given here take precedence")
    for flag, (name, kind) in CONFIG_FLAGS.items():
        default = getattr(AcevConfig, name)
        g.add_argument(flag, dest=name, type=kind, default=None, help=f"default: {default}")
    g.add_argument("--components-by-graph", dest="components_by_graph", action="store_true", default=None,
                   help="split components along k-NN graph connectivity instead of single linkage")


def _dataset_spec(args) -> DatasetFile:
    return DatasetFile(args.input, args.delimiter, args.has_header, args.label_col, args.mask_col)


def config_from_args(args) -> AcevConfig:
    """Defaults, overridden by ``--config``, overridden by explicit flags."""
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for name, _ in CONFIG_FLAGS.values():
        if getattr(args, name, None) is not None:
            values[name] = getattr(args, name)
    if getattr(args, "components_by_graph", None):
        values["components_by_graph"] = True
    return AcevConfig(**values)


def cmd_segment(args) -> int:
    cfg = config_from_args(args)
    data = load_dataset(_dataset_spec(args))
    labeling = segment(data.points, cfg)
    report = build_report(labeling, cfg, data.digest, data.labels, data.mask)
    if args.out_labels:
        atomic_write(args.out_labels, labels_csv(labeling.component, labeling.manifold))
    if args.out_report:
        atomic_write(args.out_report, report.to_json())
    else:
        sys.stdout.write(report.to_json())
    return EXIT_OK


def cmd_components(args) -> int:
    cfg = config_from_args(args)
    data = load_dataset(_dataset_spec(args))
    pts = data.points
    if len(pts) == 1:
        comp, m = np.zeros(1, dtype=np.intp), 1
    else:
        graph = build_knn_graph(pts, cfg.k, mutual=cfg.mutual_knn)
        m = count_components(laplacian(graph), cfg.zero_tol)
        comp = split_components(pts, graph, m, by_graph=cfg.components_by_graph)
    if args.out_labels:
        lines = ["index,component"] + [f"{i},{c}" for i, c in enumerate(comp.tolist())]
        atomic_write(args.out_labels, "\n".join(lines) + "\n")
    print(m)
    return EXIT_OK


def cmd_eval(args) -> int:
    a = read_labels(args.labels_a, args.col_a)
    b = read_labels(args.labels_b, args.col_b)
    print(json.dumps({"ari": ari(a, b), "nmi": nmi(a, b)}))
    return EXIT_OK


def cmd_gen(args) -> int:
    scene = make_scene(args.scene, args.n, args.sigma, args.seed)
    atomic_write(args.out, scene_csv(scene.points, scene.truth, scene.mask))
    return EXIT_OK


def parse_grid(items) -> dict:
    """``["alpha=0.2,0.4", "k=10"]`` -> ``{"alpha": [0.2, 0.4], "k": [10]}``."""
    fields = {f.name: f for f in dataclasses.fields(AcevConfig)}
    grid = {}
    for item in items or []:
        if "=" not in item:
            raise InvalidInputError(f"grid entry {item!r} is not name=v1,v2,...")
        key, values = item.split("=", 1)
        name = key.strip().replace("-", "_")
        if name not in fields:
            raise InvalidInputError(f"unknown parameter {key!r} in grid")
        try:
            grid[name] = [coerce_value(fields[name], v) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise InvalidInputError(f"grid entry {item!r}: {exc}") from None
        if not grid[name]:
            raise InvalidInputError(f"grid entry {item!r} has no values")
    if not grid:
        raise InvalidInputError("empty parameter grid; pass at least one --grid name=values")
    return grid


def run_sweep(points, truth, mask, base: AcevConfig, grid: dict):
    """Yield one result dict per point of the Cartesian product of ``grid``."""
    names = list(grid)
    for values in itertools.product(*(grid[n] for n in names)):
        cfg = base.replace(**dict(zip(names, values)))
        t0 = time.perf_counter()
        labeling = segment(points, cfg)
        row = dict(zip(names, values))
        row["n_manifolds"] = labeling.n_manifolds
        row.update(score(truth, labeling.global_labels(), mask))
        row["runtime"] = time.perf_counter() - t0
        yield row


def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid)
    base = config_from_args(args)
    data = load_dataset(_dataset_spec(args))
    if data.labels is None:
        raise InvalidInputError("sweep needs ground truth; pass --label-col")
    cols = list(grid) + ["n_manifolds", "ari", "nmi", "ari_off_mask", "nmi_off_mask", "runtime"]
    lines = [",".join(cols)]
    for row in run_sweep(data.points, data.labels, data.mask, base, grid):
        lines.append(",".join(repr(row[c]) if isinstance(row.get(c), float) else str(row.get(c, ""))
                              for c in cols))
        log.info("%s", lines[-1])
    atomic_write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acev", description="Segment point clouds into intersecting manifolds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="full two-stage segmentation")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out-labels", help="labels CSV: index,component,manifold")
    p.add_argument("--out-report", help="JSON run report (printed to stdout when omitted)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("components", help="count and split non-intersecting components only")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--out-labels", help="labels CSV: index,component")
    p.set_defaults(func=cmd_components)

    p = sub.add_parser("eval", help="ARI and NMI between two labelings")
    p.add_argument("labels_a")
    p.add_argument("labels_b")
    p.add_argument("--col-a", help="column of labels_a to read (default: last)")
    p.add_argument("--col-b", help="column of labels_b to read (default: last)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="write a synthetic scene with truth and mask columns")
    p.add_argument("scene", help=f"one of: {', '.join(SCENES)}")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sweep", help="segment over a parameter grid and score each run")
    _add_dataset_args(p)
    _add_config_args(p)
    p.add_argument("--grid", action="append", metavar="NAME=V1,V2,...",
                   help="parameter values to sweep; repeat for a Cartesian product")
    p.add_argument("--out", required=True, help="results CSV")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidInputError, DatasetParseError, OSError) as exc:
        print(f"acev: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception:  # noqa: BLE001 - anything else is our bug
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
