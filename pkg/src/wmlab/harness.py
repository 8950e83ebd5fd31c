"""Experiment runner: YAML configs in, deterministic CSVs out.

A config plus a master seed fully determines every output byte.  Grid cells
draw their randomness from generators derived from (seed, cell index), so
results are identical for any worker count; a single aggregator writes rows
in config order.  Wall-clock timings are never written to CSVs - they go to
the run manifest, which is the one non-reproducible artifact.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .contrast import PriorModel, contrast_probe
from .detect import aar_detect, kgw_detect
from .errors import LabError
from .fixed_list import KeyList, edit_distance_detect
from .ngram_rules import RuleParams
from .prf import mix64
from .probe import ProbeConfig, ProbeResult, probe
from .toylm import (
    BagRule,
    FixedListRule,
    NgramRule,
    ToyService,
    build_default_model,
    fixed_prefix_pool,
    perturb_model,
    question_prompts,
)
from .waterbag import KeyBag, bag_detect

KINDS = (
    "probe_grid",
    "temperature_sweep",
    "sample_sweep",
    "prefix_histogram",
    "waterbag_table",
    "contrast_table",
    "detect_corpus",
)

_DEFAULTS = {
    "seed": 1,
    "out_dir": "out",
    "workers": 1,
    "service": {
        "model_seed": 7,
        "answer_count": 32,
        "pair_kl": 0.01,
        "prefix_jitter": 0.02,
        "extra_questions": 0,
        "temperature": 1.0,
    },
    "probe": {
        "variants": ["v1", "v2"],  # "v2n5" runs the long-prefix variant
        "samples": 10_000,
        "samples_n5": 100_000,  # the 5-token prefix space needs more coverage
        "repeats": 3,
        "mu": 0.1,
        "rank_transform": True,
        "prefix_count": 50,
        "prefix_len": 3,
    },
    "temperatures": [0.1, 0.3, 0.5, 0.7, 1.0, 1.3, 1.5],
    "sample_counts": [1_000, 10_000, 100_000],
    "bag_sizes": [1, 2, 4, 8],
    "key_lengths": [420, 1024, 2048],
    "generations": 4_000,
    "detect": {
        "corpus_size": 20,
        "exp_corpus_size": 5,  # edit-distance detection is orders slower
        "text_length": 120,
        "trials": 20,
        "scheme": "kgw",
    },
    "contrast": {
        "prompts": 10,
        "samples": 10_000,
        "repeats": 3,
        "mu": 0.1,
        "proxy_seeds": [7],
        "proxy_offset": 0.0,
    },
}


def _merge(defaults, override):
    if not isinstance(override, dict):
        return override if override is not None else defaults
    out = dict(defaults)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    kind: str
    raw: dict

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["out_dir"])

    @property
    def workers(self) -> int:
        return max(1, int(self.raw["workers"]))

    @property
    def config_hash(self) -> str:
        # workers and out_dir are execution details: they may not change a
        # single output byte, so they stay out of the hash.
        payload = {k: v for k, v in self.raw.items() if k not in ("workers", "out_dir")}
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def normalize_config(data: dict) -> ExperimentConfig:
    kind = data.get("kind")
    if kind not in KINDS:
        raise LabError("bad-config", f"kind={kind!r}, expected one of {KINDS}")
    raw = _merge(_DEFAULTS, data)
    raw["kind"] = kind
    return ExperimentConfig(kind, raw)


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise LabError("bad-config", f"{path} is not a mapping")
    return normalize_config(data)


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    kind: str
    csv_paths: list
    cell_wall_times: dict
    total_seconds: float

    def write(self, path: Path):
        payload = {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "kind": self.kind,
            "csv_paths": [str(p) for p in self.csv_paths],
            "cell_wall_times": self.cell_wall_times,
            "total_seconds": self.total_seconds,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, fieldnames, rows, config_hash: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# config={config_hash}\n")
        w = csv.DictWriter(f, fieldnames=fieldnames)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def read_csv(path) -> list[dict]:
    with open(path) as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_probe_result_csv(result: ProbeResult, path, config_hash: str = ""):
    """One row per repeat plus a summary row with the z-test."""
    st = result.stats
    rows = [
        {"row": f"repeat-{i}", "mean_sim": float(s), "std_dev": "", "z_score": "",
         "p_value": "", "verdict": ""}
        for i, s in enumerate(result.repeat_sims)
    ]
    rows.append({
        "row": "summary",
        "mean_sim": float(st.mean_sim),
        "std_dev": float(st.std_dev),
        "z_score": float(st.z_score),
        "p_value": float(st.p_value),
        "verdict": st.verdict,
    })
    write_csv(Path(path), ["row", "mean_sim", "std_dev", "z_score", "p_value", "verdict"],
              rows, config_hash)


def verdict_report(result: ProbeResult) -> str:
    """Plain-text verdict summary for one identification run."""
    st = result.stats
    lines = [
        f"variant: {result.variant}",
        f"repeats: {len(result.repeat_sims)}",
        f"mean similarity: {st.mean_sim:.6f} (std {st.std_dev:.6f})",
        f"z score: {st.z_score:.4f}  (p = {st.p_value:.3e})",
        f"verdict: {st.verdict}",
    ]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Service construction from config
# --------------------------------------------------------------------------


def build_model(cfg: ExperimentConfig):
    s = cfg.raw["service"]
    kwargs = {}
    if "slot_sizes" in s:
        kwargs["slot_sizes"] = tuple(int(x) for x in s["slot_sizes"])
    return build_default_model(
        int(s["model_seed"]),
        answer_count=int(s["answer_count"]),
        pair_kl=float(s["pair_kl"]),
        extra_questions=int(s["extra_questions"]),
        prefix_jitter=float(s["prefix_jitter"]),
        **kwargs,
    )


def rule_label(spec) -> str:
    if spec in (None, "none"):
        return "none"
    if "scheme" in spec:
        return spec["scheme"]
    if spec.get("kind") == "water_bag":
        return f"water_bag({spec.get('bag_size', 1)})"
    return f"{spec['kind']}(m={spec.get('length', 420)})"


def build_rule(spec, master_seed: int, index: int):
    """Instantiate the service rule for one grid entry; masters derive from
    the run seed and the entry's position so reruns are reproducible."""
    if spec in (None, "none"):
        return None
    if "scheme" in spec:
        params = RuleParams(
            spec["scheme"],
            gamma=float(spec.get("gamma", 0.5)),
            delta=float(spec.get("delta", 2.0)),
            alpha=float(spec.get("alpha", 0.45)),
            window=spec.get("window"),
        )
        return NgramRule(params, mix64(master_seed, 1000 + index))
    kind = spec.get("kind")
    if kind in ("exp_edit", "its_edit"):
        return FixedListRule(kind, mix64(master_seed, 2000 + index),
                             int(spec.get("length", 420)))
    if kind == "water_bag":
        params = RuleParams(
            spec.get("scheme", "kgw"),
            gamma=float(spec.get("gamma", 0.5)),
            delta=float(spec.get("delta", 2.0)),
            window=spec.get("window"),
        )
        bag = KeyBag.from_seed(mix64(master_seed, 3000 + index),
                               int(spec.get("bag_size", 1)))
        return BagRule(bag, params)
    raise LabError("bad-config", f"unknown rule spec {spec!r}")


def _probe_config(cfg: ExperimentConfig, model, variant: str,
                  samples=None, rank=None) -> ProbeConfig:
    p = cfg.raw["probe"]
    rank_on = p["rank_transform"] if rank is None else rank
    default_samples = p["samples"]
    if variant == "v1":
        prompts = question_prompts(model, "fixed", 3)
        prefixes = fixed_prefix_pool(model, int(p["prefix_count"]))
        kind = "v1"
    elif variant == "v2n5":
        prompts = question_prompts(model, "quasi_random", 5)
        prefixes = ()
        default_samples = p["samples_n5"]
        kind = "v2"
    else:
        prompts = question_prompts(model, "quasi_random", int(p["prefix_len"]))
        prefixes = ()
        kind = "v2"
    return ProbeConfig(
        variant=kind,
        prompts=prompts,
        fixed_prefixes=prefixes,
        samples=int(samples if samples is not None else default_samples),
        mu=float(p["mu"]),
        repeats=int(p["repeats"]),
        rank_transform_enabled=bool(rank_on),
    )


def _probe_row(result: ProbeResult | None, error: str = "") -> dict:
    if result is None:
        return {"mean_sim": "", "std_dev": "", "z_score": "", "p_value": "",
                "verdict": "", "repeat_sims": "", "error": error}
    st = result.stats
    return {
        "mean_sim": float(st.mean_sim),
        "std_dev": float(st.std_dev),
        "z_score": float(st.z_score),
        "p_value": float(st.p_value),
        "verdict": st.verdict,
        "repeat_sims": ";".join(repr(float(s)) for s in result.repeat_sims),
        "error": error,
    }


def _run_cells(cells, fn, workers: int):
    """Evaluate fn over cells, preserving order; timings returned separately."""
    def timed(cell):
        t0 = time.perf_counter()
        out = fn(cell)
        return out, time.perf_counter() - t0

    if workers <= 1:
        results = [timed(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(timed, cells))
    return [r for r, _ in results], {str(c[0]): t for c, (_, t) in zip(cells, results)}


# --------------------------------------------------------------------------
# Verbs
# --------------------------------------------------------------------------

PROBE_FIELDS = ["rule", "variant", "mean_sim", "std_dev", "z_score", "p_value",
                "verdict", "repeat_sims", "error"]


def run_probe_grid(cfg: ExperimentConfig) -> RunManifest:
    t_start = time.perf_counter()
    rules = cfg.raw.get("rules")
    if not rules:
        raise LabError("empty-grid", "no rules configured")
    model = build_model(cfg)
    temperature = float(cfg.raw["service"]["temperature"])
    variants = list(cfg.raw["probe"]["variants"])
    cells = [
        (f"{rule_label(spec)}|{variant}", idx, spec, variant)
        for idx, spec in enumerate(rules)
        for variant in variants
    ]

    def cell_fn(cell):
        _, idx, spec, variant = cell
        service = ToyService(model, build_rule(spec, cfg.seed, idx), temperature)
        pc = _probe_config(cfg, model, variant)
        vi = variants.index(variant)
        try:
            result = probe(service, pc, mix64(cfg.seed, idx, vi))
            row = _probe_row(result)
        except LabError as exc:
            row = _probe_row(None, exc.code)
        row["rule"] = rule_label(spec)
        row["variant"] = variant
        return row

    rows, times = _run_cells(cells, cell_fn, cfg.workers)
    out = cfg.out_dir / "probe_grid.csv"
    write_csv(out, PROBE_FIELDS, rows, cfg.config_hash)
    manifest = RunManifest(cfg.config_hash, cfg.seed, cfg.kind, [out], times,
                           time.perf_counter() - t_start)
    manifest.write(cfg.out_dir / "manifest.json")
    return manifest


def run_temperature_sweep(cfg: ExperimentConfig) -> RunManifest:
    t_start = time.perf_counter()
    rules = cfg.raw.get("rules") or ["none", {"scheme": "kgw"}]
    temperatures = list(cfg.raw["temperatures"])
    if not temperatures:
        raise LabError("bad-config", "empty temperature grid")
    model = build_model(cfg)
    variants = list(cfg.raw["probe"]["variants"])
    cells = [
        (f"T{t}|{rule_label(spec)}|{variant}", ti, t, idx, spec, variant)
        for ti, t in enumerate(temperatures)
        for idx, spec in enumerate(rules)
        for variant in variants
    ]

    def cell_fn(cell):
        _, ti, t, idx, spec, variant = cell
        service = ToyService(model, build_rule(spec, cfg.seed, idx), float(t))
        pc = _probe_config(cfg, model, variant)
        vi = variants.index(variant)
        try:
            row = _probe_row(probe(service, pc, mix64(cfg.seed, idx, vi)))
        except LabError as exc:
            row = _probe_row(None, exc.code)
        row.update(temperature=float(t), rule=rule_label(spec), variant=variant)
        return row

    rows, times = _run_cells(cells, cell_fn, cfg.workers)
    out = cfg.out_dir / "temperature_sweep.csv"
    write_csv(out, ["temperature"] + PROBE_FIELDS, rows, cfg.config_hash)
    manifest = RunManifest(cfg.config_hash, cfg.seed, cfg.kind, [out], times,
                           time.perf_counter() - t_start)
    manifest.write(cfg.out_dir / "manifest.json")
    return manifest


def run_sample_sweep(cfg: ExperimentConfig) -> RunManifest:
    t_start = time.perf_counter()
    rules = cfg.raw.get("rules") or [{"scheme": "kgw"}]
    counts = list(cfg.raw["sample_counts"])
    if not counts:
        raise LabError("bad-config", "empty sample grid")
    model = build_model(cfg)
    temperature = float(cfg.raw["service"]["temperature"])
    variants = list(cfg.raw["probe"]["variants"])
    cells = [
        (f"W{w}|{rule_label(spec)}|{variant}", wi, w, idx, spec, variant)
        for wi, w in enumerate(counts)
        for idx, spec in enumerate(rules)
        for variant in variants
    ]

    def cell_fn(cell):
        _, wi, w, idx, spec, variant = cell
        service = ToyService(model, build_rule(spec, cfg.seed, idx), temperature)
        pc = _probe_config(cfg, model, variant, samples=w)
        vi = variants.index(variant)
        try:
            row = _probe_row(probe(service, pc, mix64(cfg.seed, idx, vi)))
        except LabError as exc:
            row = _probe_row(None, exc.code)
        row.update(samples=int(w), rule=rule_label(spec), variant=variant)
        return row

    rows, times = _run_cells(cells, cell_fn, cfg.workers)
    out = cfg.out_dir / "sample_sweep.csv"
    write_csv(out, ["samples"] + PROBE_FIELDS, rows, cfg.config_hash)
    manifest = RunManifest(cfg.config_hash, cfg.seed, cfg.kind, [out], times,
                           time.perf_counter() - t_start)
    manifest.write(cfg.out_dir / "manifest.json")
    return manifest


def run_prefix_histogram(cfg: ExperimentConfig) -> RunManifest:
    t_start = time.perf_counter()
    rules = cfg.raw.get("rules")
    if not rules or len(rules) != 1:
        raise LabError("bad-config", "prefix_histogram takes exactly one rule")
    model = build_model(cfg)
    service = ToyService(model, build_rule(rules[0], cfg.seed, 0),
                         float(cfg.raw["service"]["temperature"]))
    prompt = question_prompts(model, "quasi_random",
                              int(cfg.raw["probe"]["prefix_len"]))[0]
    n = int(cfg.raw["generations"])
    prefixes, keys = service.prefix_key_samples(
        prompt, n, np.random.default_rng((cfg.seed, 0)))
    labels = ["-".join(str(int(t)) for t in row) for row in prefixes]
    counter: dict[tuple[str, int], int] = {}
    for lab, key in zip(labels, keys.tolist()):
        counter[(lab, int(key))] = counter.get((lab, int(key)), 0) + 1
    rows = [
        {"prefix": lab, "key": key, "count": cnt}
        for (lab, key), cnt in sorted(counter.items())
    ]
    out = cfg.out_dir / "prefix_histogram.csv"
    write_csv(out, ["prefix", "key", "count"], rows, cfg.config_hash)
    manifest = RunManifest(cfg.config_hash, cfg.seed, cfg.kind, [out],
                           {"histogram": time.perf_counter() - t_start},
                           time.perf_counter() - t_start)
    manifest.write(cfg.out_dir / "manifest.json")
    return manifest


def _detect_corpus_rows(service_w: ToyService, service_n: ToyService, detector,
                        corpus_size: int, text_length: int, seed: int):
    """Per-text detection rows over matched watermarked/unwatermarked corpora."""
    rows = []
    tp = fp = 0
    for i in range(corpus_size):
        text = service_w.generate_text(text_length, np.random.default_rng((seed, 0, i)))
        rep = detector(text, i)
        tp += bool(rep["verdict"])
        rows.append({"text_id": i, "watermarked": 1, **rep})
    for i in range(corpus_size):
        text = service_n.generate_text(text_length, np.random.default_rng((seed, 1, i)))
        rep = detector(text, corpus_size + i)
        fp += bool(rep["verdict"])
        rows.append({"text_id": corpus_size + i, "watermarked": 0, **rep})
    fn = corpus_size - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / corpus_size
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    summary = {
        "corpus_size": corpus_size,
        "true_positives": tp,
        "false_positives": fp,
        "false_negatives": fn,
        "f1": f1,
        "fpr": fp / corpus_size,
    }
    return rows, summary


def _make_detector(scheme: str, rule, model, trials: int, seed: int):
    V = model.vocab.size
    if scheme in ("kgw", "kgw_min", "kgw_skip", "unigram"):
        def det(text, i):
            rep = kgw_detect(text, rule.master, rule.params, V)
            return {"score": rep.score, "stat": rep.z_or_p, "verdict": int(rep.verdict)}
    elif scheme == "aar":
        def det(text, i):
            rep = aar_detect(text, rule.master, V)
            return {"score": rep.score, "stat": rep.z_or_p, "verdict": int(rep.verdict)}
    elif scheme == "water_bag":
        def det(text, i):
            rep = bag_detect(text, rule.bag, rule.params, V)
            return {"score": rep.score, "stat": rep.z_or_p, "verdict": int(rep.verdict)}
    elif scheme in ("exp_edit", "its_edit"):
        key_list = KeyList(rule.master_seed, rule.length, V)

        def det(text, i):
            p = edit_distance_detect(text, key_list, trials=trials,
                                     rng_seed=mix64(seed, 7000 + i))
            return {"score": p, "stat": p, "verdict": int(p < 0.05)}
    else:
        raise LabError("bad-config", f"no detector for scheme {scheme!r}")
    return det


def run_detect_corpus(cfg: ExperimentConfig) -> RunManifest:
    t_start = time.perf_counter()
    rules = cfg.raw.get("rules")
    if not rules or len(rules) != 1:
        raise LabError("bad-config", "detect_corpus takes exactly one rule")
    model = build_model(cfg)
    d = cfg.raw["detect"]
    temperature = float(cfg.raw["service"]["temperature"])
    rule = build_rule(rules[0], cfg.seed, 0)
    if rule is None:
        raise LabError("bad-config", "detect_corpus needs a watermarked rule")
    scheme = rule_label(rules[0]).split("(")[0]
    service_w = ToyService(model, rule, temperature)
    service_n = ToyService(model, None, temperature)
    detector = _make_detector(scheme, rule, model, int(d["trials"]), cfg.seed)
    rows, summary = _detect_corpus_rows(
        service_w, service_n, detector,
        int(d["corpus_size"]), int(d["text_length"]), cfg.seed)
    out1 = cfg.out_dir / "detect_corpus.csv"
    out2 = cfg.out_dir / "detect_summary.csv"
    write_csv(out1, ["text_id", "watermarked", "score", "stat", "verdict"],
              rows, cfg.config_hash)
    write_csv(out2, list(summary), [summary], cfg.config_hash)
    manifest = RunManifest(cfg.config_hash, cfg.seed, cfg.kind, [out1, out2],
                           {"corpus": time.perf_counter() - t_start},
                           time.perf_counter() - t_start)
    manifest.write(cfg.out_dir / "manifest.json")
    return manifest


def run_waterbag_table(cfg: ExperimentConfig) -> RunManifest:
    t_start = time.perf_counter()
    model = build_model(cfg)
    temperature = float(cfg.raw["service"]["temperature"])
    # Bag sizes share one master family (nested bags) and every service in a
    # variant shares the sampling stream, so rows compare on matched seeds.
    services = [("none", None)]
    for bs in cfg.raw["bag_sizes"]:
        spec = {"kind": "water_bag", "bag_size": int(bs)}
        services.append((rule_label(spec), build_rule(spec, cfg.seed, 100)))
    for i, m in enumerate(cfg.raw["key_lengths"]):
        spec = {"kind": "exp_edit", "length": int(m)}
        services.append((rule_label(spec), build_rule(spec, cfg.seed, 200 + i)))

    variants = list(cfg.raw["probe"].get("variants", ["v1", "v2"]))
    ident_cells = [
        (f"{label}|{variant}", si, label, rule, variant)
        for si, (label, rule) in enumerate(services)
        for variant in variants
    ]

    def ident_fn(cell):
        _, si, label, rule, variant = cell
        service = ToyService(model, rule, temperature)
        pc = _probe_config(cfg, model, variant)
        try:
            row = _probe_row(probe(service, pc, mix64(cfg.seed, 4000 + variants.index(variant))))
        except LabError as exc:
            row = _probe_row(None, exc.code)
        row.update(rule=label, variant=variant)
        return row

    ident_rows, ident_times = _run_cells(ident_cells, ident_fn, cfg.workers)
    out1 = cfg.out_dir / "waterbag_identification.csv"
    write_csv(out1, PROBE_FIELDS, ident_rows, cfg.config_hash)

    d = cfg.raw["detect"]
    detect_rows = []
    detect_times = {}
    service_n = ToyService(model, None, temperature)
    for si, (label, rule) in enumerate(services):
        if rule is None:
            continue
        scheme = label.split("(")[0]
        t0 = time.perf_counter()
        detector = _make_detector(scheme, rule, model, int(d["trials"]), cfg.seed)
        service_w = ToyService(model, rule, temperature)
        size = int(d["exp_corpus_size"] if scheme in ("exp_edit", "its_edit")
                   else d["corpus_size"])
        _, summary = _detect_corpus_rows(
            service_w, service_n, detector,
            size, int(d["text_length"]), mix64(cfg.seed, 500 + si))
        detect_times[label] = time.perf_counter() - t0
        detect_rows.append({"rule": label, **summary})
    out2 = cfg.out_dir / "waterbag_detection.csv"
    write_csv(out2, ["rule", "corpus_size", "true_positives", "false_positives",
                     "false_negatives", "f1", "fpr"], detect_rows, cfg.config_hash)
    times = {**ident_times, **{f"detect:{k}": v for k, v in detect_times.items()}}
    manifest = RunManifest(cfg.config_hash, cfg.seed, cfg.kind, [out1, out2], times,
                           time.perf_counter() - t_start)
    manifest.write(cfg.out_dir / "manifest.json")
    return manifest


def run_contrast_table(cfg: ExperimentConfig) -> RunManifest:
    t_start = time.perf_counter()
    c = cfg.raw["contrast"]
    n_prompts = int(c["prompts"])
    svc_cfg = dict(cfg.raw["service"])
    svc_cfg["extra_questions"] = max(int(svc_cfg.get("extra_questions", 0)), n_prompts)
    model = build_default_model(
        int(svc_cfg["model_seed"]),
        answer_count=int(svc_cfg["answer_count"]),
        pair_kl=float(svc_cfg["pair_kl"]),
        extra_questions=int(svc_cfg["extra_questions"]),
        prefix_jitter=float(svc_cfg["prefix_jitter"]),
    )
    qids = tuple(f"q{i}" for i in range(2, 2 + n_prompts))
    prompts = question_prompts(model, "none", question_ids=qids)
    offset = float(c["proxy_offset"])
    proxies = []
    for i, ps in enumerate(c["proxy_seeds"]):
        if offset > 0:
            proxies.append(perturb_model(model, mix64(cfg.seed, 600 + i, int(ps)), offset))
        else:
            proxies.append(model)
    prior = PriorModel.from_proxies(proxies, prompts)
    rules = cfg.raw.get("rules") or ["none", {"scheme": "unigram"}]
    temperature = float(cfg.raw["service"]["temperature"])
    rows = []
    times = {}
    for idx, spec in enumerate(rules):
        t0 = time.perf_counter()
        service = ToyService(model, build_rule(spec, cfg.seed, idx), temperature)
        try:
            result = contrast_probe(
                service, prior, prompts,
                samples=int(c["samples"]), repeats=int(c["repeats"]),
                mu=float(c["mu"]), rng_seed=mix64(cfg.seed, idx))
            row = _probe_row(result)
        except LabError as exc:
            row = _probe_row(None, exc.code)
        row.update(rule=rule_label(spec), variant="contrast")
        rows.append(row)
        times[rule_label(spec)] = time.perf_counter() - t0
    out = cfg.out_dir / "contrast_table.csv"
    write_csv(out, PROBE_FIELDS, rows, cfg.config_hash)
    manifest = RunManifest(cfg.config_hash, cfg.seed, cfg.kind, [out], times,
                           time.perf_counter() - t_start)
    manifest.write(cfg.out_dir / "manifest.json")
    return manifest


_RUNNERS = {
    "probe_grid": run_probe_grid,
    "temperature_sweep": run_temperature_sweep,
    "sample_sweep": run_sample_sweep,
    "prefix_histogram": run_prefix_histogram,
    "waterbag_table": run_waterbag_table,
    "contrast_table": run_contrast_table,
    "detect_corpus": run_detect_corpus,
}


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    return _RUNNERS[cfg.kind](cfg)


def render_sweep_chart(csv_path, png_path, x_column: str):
    """Line chart of z-score against the sweep column, one line per
    (rule, variant); cells with errors are skipped."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_csv(csv_path)
    series: dict[str, list] = {}
    for row in rows:
        if row["error"]:
            continue
        key = f"{row['rule']}/{row['variant']}"
        series.setdefault(key, []).append((float(row[x_column]), float(row["z_score"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=key)
    if x_column == "samples":
        ax.set_xscale("log")
    ax.axhline(4.0, color="grey", linestyle="--", linewidth=1)
    ax.set_xlabel(x_column)
    ax.set_ylabel("z score")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
