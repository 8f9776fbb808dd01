"""`tta-export --config FILE.json --out DIR`

The config file describes the dataset pair, the checkpoint directory, and
either an explicit list of adaptation configs (one bundle) or a sweep
(one bundle per axis):

{
  "dataset": {"num_id": 2000, "num_ood": 2000, "severity": 2.0, "seed": 0},
  "checkpoints": {"dir": "checkpoints", "epochs": 2, "seed": 0},
  "configs": [
    {"method": "TENT", "checkpoint": "bn_small", "learning_rate": 1e-3}
  ],
  "sweep": {
    "base": {"method": "TENT", "checkpoint": "bn_small"},
    "axes": {"learning_rate": [1e-4, 1e-3, 1e-2]}
  }
}

Relative checkpoint directories resolve against the config file's location.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from tta_harness.adapt import AdaptationConfig, adapt_and_export, sweep
from tta_harness.data import DataConfig, make_splits
from tta_harness.train import prepare_checkpoints


def _dataclass_from(cls, payload: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**payload)


def run(config_path: str, out: str) -> int:
    path = Path(config_path)
    spec = json.loads(path.read_text("utf-8"))
    data_config = _dataclass_from(DataConfig, spec.get("dataset", {}))
    ckpt_spec = spec.get("checkpoints", {})
    ckpt_dir = Path(ckpt_spec.get("dir", "checkpoints"))
    if not ckpt_dir.is_absolute():
        ckpt_dir = path.parent / ckpt_dir
    splits = make_splits(data_config)

    if ("configs" in spec) == ("sweep" in spec):
        raise ValueError("config must contain exactly one of 'configs' or 'sweep'")

    if "configs" in spec:
        configs = [_dataclass_from(AdaptationConfig, c) for c in spec["configs"]]
        prepare_checkpoints(
            ckpt_dir,
            sorted({c.checkpoint for c in configs}),
            data_config,
            splits,
            epochs=int(ckpt_spec.get("epochs", 2)),
            seed=int(ckpt_spec.get("seed", 0)),
        )
        outcomes = adapt_and_export(configs, data_config, ckpt_dir, out, splits=splits)
        failures = [o for o in outcomes if o.failure]
        for o in failures:
            print(f"warning: {o.model_id} failed: {o.failure}", file=sys.stderr)
        print(f"wrote bundle with {len(outcomes) - len(failures)} models to {out}")
    else:
        base = _dataclass_from(AdaptationConfig, spec["sweep"]["base"])
        axes = spec["sweep"]["axes"]
        archs = {base.checkpoint} | set(axes.get("checkpoint", []))
        prepare_checkpoints(
            ckpt_dir,
            sorted(archs),
            data_config,
            splits,
            epochs=int(ckpt_spec.get("epochs", 2)),
            seed=int(ckpt_spec.get("seed", 0)),
        )
        written = sweep(axes, base, data_config, ckpt_dir, out, splits=splits)
        for axis, bundle_dir in written.items():
            print(f"wrote {axis} bundle to {bundle_dir}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tta-export",
        description="Adapt small classifiers on shifted data and export prediction bundles",
    )
    parser.add_argument("--config", required=True, help="JSON adaptation/sweep description")
    parser.add_argument("--out", required=True, help="output bundle directory")
    args = parser.parse_args(argv)
    try:
        return run(args.config, args.out)
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
