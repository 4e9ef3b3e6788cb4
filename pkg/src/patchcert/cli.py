"""Command-line pipeline: dataset ingestion, runs, persistence, and reports.

Subcommands: ``infer`` (clean-setting predictions and curves), ``certify``
(certified and location-aware bounds and curves), ``verify`` (exhaustive
attack enumeration against every certified claim; synthetic backend only),
``sweep`` (security-parameter grids), and ``gen-synthetic`` (seeded random
manifests). Every output embeds the config hash and seed; identical configs
reproduce byte-identical outputs.

Exit codes: 0 success, 2 configuration error, 3 verification violation,
4 backend failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .backends import Image, OnnxClassifier, OnnxConfig, SyntheticClassifier
from .engine import (
    ATTACKER_MODES,
    QueryService,
    demux_certify,
    demux_infer,
    location_aware_certify,
)
from .errors import BackendError, ConfigError, PatchCertError
from .geometry import MaskSet, PatchSpec, generate_mask_set, verify_covering
from .metrics import (
    THRESHOLD_FAMILIES,
    PRPoint,
    average_precision,
    micro_aggregate,
    precision_at_recall,
    threshold_sweep,
)
from .oracle import BoundReport, check_bounds, check_mask_protection, enumerate_attacks
from .synthetic import generate_suite, instance_from_entry, instance_to_entry

log = logging.getLogger("patchcert")

ENV_PREFIX = "PATCHCERT_"

MASK_NUMBER_GRID = (2, 4, 6)
PATCH_SIZE_GRID = ("0.5%", "2%", "8%", "32%")


# ---------------------------------------------------------------------------
# Configuration


@dataclasses.dataclass
class RunConfig:
    masks: tuple[int, int] = (6, 6)
    patch: str = "2%"
    thresholds: str = "default"
    attacker: str = "worst"
    backend: str = "synthetic"
    model: str | None = None
    out: str = "out"
    seed: int = 0
    workers: int = 1
    onnx_classes: int | None = None
    onnx_input: str | None = None
    onnx_resize: str = "bilinear"
    onnx_probabilities: bool = False
    low_score_regime: bool = False
    verify_threshold: float = 0.5

    def patch_spec(self) -> PatchSpec:
        return PatchSpec.parse(self.patch)

    def threshold_values(self) -> list[float]:
        name = self.thresholds
        if name in THRESHOLD_FAMILIES:
            values = list(THRESHOLD_FAMILIES[name])
            if name == "default" and self.low_score_regime:
                values = list(THRESHOLD_FAMILIES["default-low"])
            return values
        path = Path(name)
        if not path.is_file():
            raise ConfigError(
                f"--thresholds must name a family {sorted(THRESHOLD_FAMILIES)} "
                f"or an existing file, got {name!r}"
            )
        try:
            values = [float(tok) for tok in path.read_text().split()]
        except ValueError as exc:
            raise ConfigError(f"threshold file {name!r} must contain numbers") from exc
        if not values:
            raise ConfigError(f"threshold file {name!r} is empty")
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ConfigError("thresholds must lie in [0, 1]")
        return values

    def validate(self) -> None:
        if self.backend not in ("synthetic", "onnx"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.attacker not in ATTACKER_MODES:
            raise ConfigError(f"--attacker must be one of {ATTACKER_MODES}")
        if self.masks[0] < 1 or self.masks[1] < 1:
            raise ConfigError("mask budget must be at least 1x1")
        if self.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if self.backend == "onnx":
            if not self.model:
                raise ConfigError("--model is required for the onnx backend")
            if self.onnx_classes is None:
                raise ConfigError("--onnx-classes is required for the onnx backend")
        self.patch_spec()
        self.threshold_values()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _parse_masks(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        if len(parts) == 1:
            k = int(parts[0])
            return k, k
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise ConfigError(f"--masks must look like '6x6' or '6', got {text!r}")


def _onnx_config(cfg: RunConfig) -> OnnxConfig:
    input_hw = None
    if cfg.onnx_input:
        try:
            h, w = (int(tok) for tok in cfg.onnx_input.lower().split("x"))
            input_hw = (h, w)
        except ValueError:
            raise ConfigError(f"--onnx-input must look like '448x448', got {cfg.onnx_input!r}") from None
    return OnnxConfig(
        classes=int(cfg.onnx_classes),
        input_hw=input_hw,
        resize=cfg.onnx_resize,
        logits=not cfg.onnx_probabilities,
        low_score_regime=cfg.low_score_regime,
    )


# ---------------------------------------------------------------------------
# Manifests


@dataclasses.dataclass
class Manifest:
    classes: int
    kind: str  # "synthetic" | "image"
    entries: list[dict]
    base_dir: Path


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest {path} does not exist")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise ConfigError(f"manifest {path} is empty")
    try:
        header = json.loads(lines[0])
        entries = [json.loads(ln) for ln in lines[1:]]
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path} is not valid JSONL: {exc}") from exc
    if "classes" not in header:
        raise ConfigError("manifest header must declare a class count")
    classes = int(header["classes"])
    kind = header.get("kind", "synthetic")
    seen = set()
    for entry in entries:
        image_id = entry.get("image_id")
        if not image_id:
            raise ConfigError("every manifest entry needs an image_id")
        if image_id in seen:
            raise ConfigError(f"duplicate image_id {image_id!r}")
        seen.add(image_id)
        label = entry.get("label")
        if not isinstance(label, str) or len(label) != classes or set(label) - {"0", "1"}:
            raise ConfigError(
                f"entry {image_id!r}: label must be a length-{classes} bitstring"
            )
    if not entries:
        raise ConfigError(f"manifest {path} has no entries")
    return Manifest(classes=classes, kind=kind, entries=entries, base_dir=path.parent)


def _load_image_file(path: Path) -> Image:
    if path.suffix == ".npy":
        arr = np.load(path)
    else:
        try:
            from PIL import Image as PILImage  # noqa: PLC0415 -- optional dependency
        except ImportError as exc:
            raise BackendError(
                f"loading {path.suffix} images requires Pillow; use .npy or install it"
            ) from exc
        arr = np.asarray(PILImage.open(path))
    arr = np.asarray(arr, dtype=np.float64)
    if arr.max() > 1.0:
        arr = arr / 255.0
    return Image.from_pixels(arr)


# ---------------------------------------------------------------------------
# Per-image run state


@dataclasses.dataclass
class RunCase:
    image_id: str
    model: object
    image: Image
    y: np.ndarray
    mask_set: MaskSet
    covered: bool
    queries: QueryService


def build_cases(cfg: RunConfig, manifest: Manifest) -> list[RunCase]:
    patch = cfg.patch_spec()
    k1, k2 = cfg.masks
    mask_sets: dict[tuple[int, int], tuple[MaskSet, bool]] = {}
    onnx_model = None
    if manifest.kind == "image" or cfg.backend == "onnx":
        if cfg.backend != "onnx":
            raise ConfigError("image-path manifests need --backend onnx")
        onnx_model = OnnxClassifier.from_path(cfg.model, _onnx_config(cfg))
        if onnx_model.num_classes != manifest.classes:
            raise ConfigError(
                f"--onnx-classes {onnx_model.num_classes} does not match "
                f"manifest class count {manifest.classes}"
            )

    cases = []
    for entry in manifest.entries:
        if cfg.backend == "synthetic":
            inst = instance_from_entry(entry, patch=(0, 0), budget=cfg.masks)
            if inst.model.num_classes != manifest.classes:
                raise ConfigError(
                    f"entry {inst.image_id!r}: model classes "
                    f"{inst.model.num_classes} != manifest classes {manifest.classes}"
                )
            model: object = inst.model
            image = inst.image
            y = inst.y
            image_id = inst.image_id
        else:
            rel = entry.get("path")
            if not rel:
                raise ConfigError(f"entry {entry['image_id']!r} has no image path")
            image = _load_image_file((manifest.base_dir / rel).resolve())
            model = onnx_model
            y = np.array([int(ch) for ch in entry["label"]], dtype=np.int8)
            image_id = entry["image_id"]
        dims = (image.n1, image.n2)
        if dims not in mask_sets:
            ms = generate_mask_set(dims[0], dims[1], patch, k1, k2)
            mask_sets[dims] = (ms, verify_covering(ms).covered)
        ms, covered = mask_sets[dims]
        cases.append(
            RunCase(
                image_id=image_id,
                model=model,
                image=image,
                y=y,
                mask_set=ms,
                covered=covered,
                queries=QueryService(model, image, ms),
            )
        )
    return cases


def _map_cases(workers: int, fn: Callable, cases: Sequence[RunCase]) -> list:
    if workers <= 1 or len(cases) <= 1:
        return [fn(c) for c in cases]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cases))


def _run_over_cases(cases: Sequence[RunCase], workers: int, fn: Callable) -> list:
    """Apply ``fn`` per case, logging and returning None for failed images."""

    def safe(case: RunCase):
        try:
            return fn(case)
        except PatchCertError as exc:
            log.error("image %s failed: %s", case.image_id, exc)
            return None

    return list(zip(cases, _map_cases(workers, safe, cases)))


def _clean_counts(y: np.ndarray, preds: np.ndarray) -> tuple[int, int, int]:
    tp = int(np.sum((y == 1) & (preds == 1)))
    fp = int(np.sum((y == 0) & (preds == 1)))
    fn = int(np.sum((y == 1) & (preds == 0)))
    return tp, fp, fn


# ---------------------------------------------------------------------------
# Output helpers


def _write_jsonl(path: Path, cfg: RunConfig, rows: Iterable[dict]) -> None:
    with path.open("w", newline="\n") as fh:
        header = {"config": cfg.to_dict(), "config_hash": cfg.hash(), "seed": cfg.seed}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _write_curves(path: Path, cfg: RunConfig, curves: Iterable) -> None:
    with path.open("w", newline="\n") as fh:
        fh.write(f"# config_hash={cfg.hash()} seed={cfg.seed}\n")
        fh.write("threshold,precision,recall,setting\n")
        for curve in curves:
            for pt in curve.points:
                fh.write(f"{pt.threshold!r},{pt.precision!r},{pt.recall!r},{pt.setting}\n")


def _setting_summary(points: list[PRPoint], counts_at) -> dict:
    info: dict = {"precision_at_recall": {}}
    try:
        info["ap"] = average_precision(points)
    except ConfigError as exc:
        info["ap"] = 0.0
        info["ap_note"] = str(exc)
    for target in (0.25, 0.5, 0.75):
        res = precision_at_recall(points, target, counts_at)
        info["precision_at_recall"][str(target)] = {
            "precision": res.precision,
            "within_tolerance": res.within_tolerance,
        }
    return info


def _write_summary(path: Path, cfg: RunConfig, settings: dict) -> None:
    doc = {
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "settings": settings,
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Runners


def run_infer(cfg: RunConfig, manifest: Manifest) -> int:
    cases = build_cases(cfg, manifest)
    thresholds = sorted(set(cfg.threshold_values()), reverse=True)
    out = _prepare_out(cfg)
    rows = []
    failed: set[str] = set()
    for t in thresholds:
        pairs = _run_over_cases(
            cases,
            cfg.workers,
            lambda c, t=t: (
                (c.queries.scores(()) > t).astype(np.int8),
                demux_infer(c.model, c.image, c.mask_set, t, queries=c.queries),
            ),
        )
        for case, res in pairs:
            if res is None:
                failed.add(case.image_id)
                continue
            raw, dfd = res
            rows.append(
                {
                    "image_id": case.image_id,
                    "threshold": t,
                    "undefended": "".join(str(int(b)) for b in raw),
                    "defended": "".join(str(int(b)) for b in dfd),
                }
            )
    _write_jsonl(out / "predictions.jsonl", cfg, rows)
    ok_cases = [c for c in cases if c.image_id not in failed]
    if not ok_cases:
        raise BackendError("every image failed; no metrics to report")

    def counts_at_raw(t: float):
        return [
            _clean_counts(c.y, (c.queries.scores(()) > t).astype(np.int8))
            for c in ok_cases
        ]

    def counts_at_defended(t: float):
        return [
            _clean_counts(
                c.y, demux_infer(c.model, c.image, c.mask_set, t, queries=c.queries)
            )
            for c in ok_cases
        ]

    curves = [
        threshold_sweep(counts_at_raw, thresholds, "undefended-clean"),
        threshold_sweep(counts_at_defended, thresholds, "defended-clean"),
    ]
    _write_curves(out / "curve.csv", cfg, curves)
    _write_summary(
        out / "summary.json",
        cfg,
        {
            "undefended-clean": _setting_summary(curves[0].points, counts_at_raw),
            "defended-clean": _setting_summary(curves[1].points, counts_at_defended),
        },
    )
    if failed:
        log.error("%d image(s) failed and were skipped", len(failed))
        return 4
    return 0


def _certify_one(case: RunCase, t: float, mode: str):
    summary = demux_certify(
        case.model, case.image, case.y, case.mask_set, t,
        queries=case.queries, covered=case.covered,
    )
    return location_aware_certify(summary, mode)


def run_certify(cfg: RunConfig, manifest: Manifest) -> int:
    cases = build_cases(cfg, manifest)
    thresholds = sorted(set(cfg.threshold_values()), reverse=True)
    out = _prepare_out(cfg)
    rows = []
    failed: set[str] = set()
    for t in thresholds:
        pairs = _run_over_cases(
            cases, cfg.workers, lambda c, t=t: _certify_one(c, t, cfg.attacker)
        )
        for case, loc in pairs:
            if loc is None:
                failed.add(case.image_id)
                continue
            rows.append(loc.to_record(case.image_id, t))
    _write_jsonl(out / "certify.jsonl", cfg, rows)
    ok_cases = [c for c in cases if c.image_id not in failed]
    if not ok_cases:
        raise BackendError("every image failed; no metrics to report")

    def counts_at_cert(t: float):
        return [
            _certify_one(c, t, cfg.attacker).counts(location_aware=False)
            for c in ok_cases
        ]

    def counts_at_loc(t: float):
        return [
            _certify_one(c, t, cfg.attacker).counts(location_aware=True)
            for c in ok_cases
        ]

    curves = [
        threshold_sweep(counts_at_cert, thresholds, "certified"),
        threshold_sweep(counts_at_loc, thresholds, "location-aware"),
    ]
    _write_curves(out / "curve.csv", cfg, curves)
    _write_summary(
        out / "summary.json",
        cfg,
        {
            "certified": _setting_summary(curves[0].points, counts_at_cert),
            "location-aware": _setting_summary(curves[1].points, counts_at_loc),
        },
    )
    if failed:
        log.error("%d image(s) failed and were skipped", len(failed))
        return 4
    return 0


def run_verify(cfg: RunConfig, manifest: Manifest, negative_control: bool = False) -> int:
    if cfg.backend != "synthetic":
        log.error(
            "verify needs exhaustive attacker enumeration, which only the "
            "synthetic backend supports; skipping"
        )
        return 2
    cases = build_cases(cfg, manifest)
    out = _prepare_out(cfg)
    t = cfg.verify_threshold
    aggregate = BoundReport()
    protection_violations = []
    mutation_flags = {"tp_lower": 0, "fn_upper": 0, "fp_upper": 0}
    for case in cases:
        loc = _certify_one(case, t, cfg.attacker)
        verdicts = enumerate_attacks(
            case.model, case.image, case.y, case.mask_set, t
        )
        if negative_control:
            for kind, delta in (("tp_lower", 1), ("fn_upper", -1), ("fp_upper", -1)):
                mutated = dataclasses.replace(loc, **{kind: getattr(loc, kind) + delta})
                mutated_report = check_bounds(verdicts, mutated)
                if not mutated_report.ok:
                    mutation_flags[kind] += 1
                    aggregate.merge(mutated_report)
        else:
            report = check_bounds(verdicts, loc)
            covering = verify_covering(case.mask_set)
            protection_violations.extend(
                check_mask_protection(verdicts, loc, covering)
            )
            aggregate.merge(report)
    doc = aggregate.to_dict()
    doc["protection_violations"] = protection_violations
    doc["negative_control"] = negative_control
    if negative_control:
        doc["mutation_flags"] = mutation_flags
    doc["config"] = cfg.to_dict()
    doc["config_hash"] = cfg.hash()
    doc["seed"] = cfg.seed
    (out / "verify.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    if negative_control:
        if all(v > 0 for v in mutation_flags.values()):
            log.info("negative control: all mutations flagged")
            return 3
        log.error("negative control failed: some mutations went undetected %s", mutation_flags)
        return 1
    if not aggregate.ok or protection_violations:
        log.error(
            "verification found %d bound violations, %d protection violations",
            len(aggregate.violations),
            len(protection_violations),
        )
        return 3
    log.info(
        "verified %d placements across %d images: no violations",
        aggregate.checked_placements,
        len(cases),
    )
    return 0


def run_sweep(cfg: RunConfig, manifest: Manifest, parameter: str, grid: list[str] | None) -> int:
    out = _prepare_out(cfg)
    if parameter == "mask-number":
        values = [str(v) for v in (grid or MASK_NUMBER_GRID)]
    elif parameter == "patch-size":
        values = [str(v) for v in (grid or PATCH_SIZE_GRID)]
    else:
        raise ConfigError("--parameter must be 'mask-number' or 'patch-size'")
    thresholds = sorted(set(cfg.threshold_values()), reverse=True)
    rows = []
    for value in values:
        if parameter == "mask-number":
            k = int(value)
            sub = dataclasses.replace(cfg, masks=(k, k))
        else:
            sub = dataclasses.replace(cfg, patch=value)
        cases = build_cases(sub, manifest)

        def counts(setting: str, t: float):
            if setting == "defended-clean":
                return [
                    _clean_counts(
                        c.y, demux_infer(c.model, c.image, c.mask_set, t, queries=c.queries)
                    )
                    for c in cases
                ]
            loc = setting == "location-aware"
            return [
                _certify_one(c, t, sub.attacker).counts(location_aware=loc)
                for c in cases
            ]

        for setting in ("defended-clean", "certified", "location-aware"):
            curve = threshold_sweep(lambda t, s=setting: counts(s, t), thresholds, setting)
            try:
                ap = average_precision(curve)
            except ConfigError:
                ap = 0.0  # curve never reaches the anchor recall
            rows.append((parameter, value, setting, ap))
    with (out / "sweep.csv").open("w", newline="\n") as fh:
        fh.write(f"# config_hash={cfg.hash()} seed={cfg.seed}\n")
        fh.write("parameter,value,setting,ap\n")
        for parameter, value, setting, ap in rows:
            fh.write(f"{parameter},{value},{setting},{ap!r}\n")
    return 0


def run_gen_synthetic(cfg: RunConfig, count: int, classes: int, path: str) -> int:
    suite = generate_suite(cfg.seed, count, classes=classes)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="\n") as fh:
        header = {
            "classes": classes,
            "kind": "synthetic",
            "seed": cfg.seed,
            "count": count,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for inst in suite:
            fh.write(json.dumps(instance_to_entry(inst), sort_keys=True) + "\n")
    log.info("wrote %d synthetic entries to %s", count, target)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _env_default(name: str, fallback):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    return raw if raw is not None else fallback


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--masks", default=_env_default("masks", "6x6"),
                        help="mask budget per axis, e.g. 6x6")
    parser.add_argument("--patch", default=_env_default("patch", "2%"),
                        help="patch estimate: pixels 'P', 'P1xP2', or area 'F%%'")
    parser.add_argument("--thresholds", default=_env_default("thresholds", "default"),
                        help=f"family {sorted(THRESHOLD_FAMILIES)} or a file of values")
    parser.add_argument("--attacker", default=_env_default("attacker", "worst"),
                        choices=list(ATTACKER_MODES))
    parser.add_argument("--backend", default=_env_default("backend", "synthetic"),
                        choices=["synthetic", "onnx"])
    parser.add_argument("--model", default=_env_default("model", None),
                        help="ONNX model path")
    parser.add_argument("--onnx-classes", type=int, default=_env_default("onnx_classes", None))
    parser.add_argument("--onnx-input", default=_env_default("onnx_input", None),
                        help="resize target, e.g. 448x448")
    parser.add_argument("--onnx-resize", default=_env_default("onnx_resize", "bilinear"),
                        choices=["nearest", "bilinear"])
    parser.add_argument("--onnx-probabilities", action="store_true",
                        help="model emits probabilities; skip the sigmoid")
    parser.add_argument("--low-score-regime", action="store_true",
                        help="add the low-value threshold family to sweeps")
    parser.add_argument("--out", default=_env_default("out", "out"))
    parser.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    parser.add_argument("--workers", type=int, default=int(_env_default("workers", 1)))


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    onnx_classes = args.onnx_classes
    if isinstance(onnx_classes, str):
        onnx_classes = int(onnx_classes)
    cfg = RunConfig(
        masks=_parse_masks(str(args.masks)),
        patch=str(args.patch),
        thresholds=str(args.thresholds),
        attacker=args.attacker,
        backend=args.backend,
        model=args.model,
        out=str(args.out),
        seed=args.seed,
        workers=args.workers,
        onnx_classes=onnx_classes,
        onnx_input=args.onnx_input,
        onnx_resize=args.onnx_resize,
        onnx_probabilities=bool(args.onnx_probabilities),
        low_score_regime=bool(args.low_score_regime),
        verify_threshold=float(getattr(args, "threshold", 0.5)),
    )
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchcert",
        description="Certified patch-robustness bounds for multi-label classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_infer = sub.add_parser("infer", help="clean-setting predictions and PR curves")
    _add_common(p_infer)
    p_infer.add_argument("--manifest", required=True)

    p_cert = sub.add_parser("certify", help="certified and location-aware bounds")
    _add_common(p_cert)
    p_cert.add_argument("--manifest", required=True)

    p_ver = sub.add_parser("verify", help="exhaustively check every certified claim")
    _add_common(p_ver)
    p_ver.add_argument("--manifest", required=True)
    p_ver.add_argument("--threshold", type=float, default=0.5,
                       help="decision threshold used for the verified run")
    p_ver.add_argument("--negative-control", action="store_true",
                       help="corrupt each bound before checking; the run must fail")

    p_sweep = sub.add_parser("sweep", help="security-parameter grid")
    _add_common(p_sweep)
    p_sweep.add_argument("--manifest", required=True)
    p_sweep.add_argument("--parameter", required=True, choices=["mask-number", "patch-size"])
    p_sweep.add_argument("--grid", default=None,
                         help="comma-separated values overriding the default grid")

    p_gen = sub.add_parser("gen-synthetic", help="write a seeded synthetic manifest")
    _add_common(p_gen)
    p_gen.add_argument("--count", type=int, default=20)
    p_gen.add_argument("--classes", type=int, default=4)
    p_gen.add_argument("--manifest-out", default=None,
                       help="manifest path (default: <out>/manifest.jsonl)")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="[%(levelname)s] %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "gen-synthetic":
            path = args.manifest_out or str(Path(cfg.out) / "manifest.jsonl")
            return run_gen_synthetic(cfg, args.count, args.classes, path)
        manifest = load_manifest(args.manifest)
        if args.command == "infer":
            return run_infer(cfg, manifest)
        if args.command == "certify":
            return run_certify(cfg, manifest)
        if args.command == "verify":
            return run_verify(cfg, manifest, negative_control=args.negative_control)
        if args.command == "sweep":
            grid = args.grid.split(",") if args.grid else None
            return run_sweep(cfg, manifest, args.parameter, grid)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    except BackendError as exc:
        log.error("backend failure: %s", exc)
        return 4
    except PatchCertError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
