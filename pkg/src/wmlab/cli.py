"""Command-line entry point: one verb per experiment kind."""

from __future__ import annotations

import argparse
import sys

from .errors import LabError
from .harness import load_config, normalize_config, run_experiment

_VERB_TO_KIND = {
    "probe-grid": "probe_grid",
    "temp-sweep": "temperature_sweep",
    "sample-sweep": "sample_sweep",
    "prefix-hist": "prefix_histogram",
    "waterbag-table": "waterbag_table",
    "contrast-table": "contrast_table",
    "detect-corpus": "detect_corpus",
}

_CHART_X = {"temperature_sweep": "temperature", "sample_sweep": "samples"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wmlab",
        description="Probe a synthetic LLM service for generation-time watermarks.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in _VERB_TO_KIND:
        p = sub.add_parser(verb, help=f"run a {_VERB_TO_KIND[verb]} experiment")
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="concurrent grid cells (results identical)")
        p.add_argument("--no-rank", action="store_true",
                       help="disable the rank transform in the similarity")
        if verb in ("temp-sweep", "sample-sweep"):
            p.add_argument("--chart", action="store_true",
                           help="also render the sweep as a PNG line chart")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        raw = dict(cfg.raw)
        expected = _VERB_TO_KIND[args.verb]
        if raw["kind"] != expected:
            raise LabError("bad-config",
                           f"config kind {raw['kind']!r} does not match verb {args.verb!r}")
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.out is not None:
            raw["out_dir"] = args.out
        if args.workers is not None:
            raw["workers"] = args.workers
        if args.no_rank:
            raw = dict(raw)
            raw["probe"] = dict(raw["probe"], rank_transform=False)
        cfg = normalize_config(raw)
        manifest = run_experiment(cfg)
        if getattr(args, "chart", False):
            from .harness import render_sweep_chart

            csv_path = manifest.csv_paths[0]
            png = str(csv_path).rsplit(".", 1)[0] + ".png"
            render_sweep_chart(csv_path, png, _CHART_X[cfg.kind])
            print(f"chart: {png}")
        for path in manifest.csv_paths:
            print(f"wrote: {path}")
        return 0
    except (LabError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
