"""Parameter sweeps: cross-product run sets, presets and CSV output."""

import csv
import io
import itertools
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import ConfigError, KPolicy, ScenarioConfig, config_from_dict, tomllib
from .metrics import RECORD_COLUMNS, RUN_COLUMNS, aggregate, fmt, latency, srb, summarize
from .network import simulate

REPORTS = ("runs", "latency_by_hops")
DENSITIES = (50, 75, 100, 125)
PRESET_SEEDS = (1, 2, 3, 4, 5)


class SweepError(RuntimeError):
    def __init__(self, key, cause):
        super().__init__(f"run {format_key(key)} failed: {cause!r}")
        self.key = key


def format_key(key):
    n, flows, k, proto, seed = key
    return f"node_count={n} flow_count={flows} k_policy={k.label} protocol={proto} seed={seed}"


@dataclass(frozen=True)
class SweepSpec:
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    node_counts: tuple = ()
    k_policies: tuple = ()
    flow_counts: tuple = ()
    protocols: tuple = ()
    seeds: tuple = (1,)
    report: str = "runs"

    def runs(self) -> list[ScenarioConfig]:
        """The full cross product, validated, in output order."""
        b = self.base
        axes = itertools.product(
            self.node_counts or (b.node_count,),
            self.flow_counts or (b.flow_count,),
            self.k_policies or (b.k_policy,),
            self.protocols or (b.protocol,),
            self.seeds,
        )
        out = []
        for n, flows, k, proto, seed in axes:
            cfg = b.replace(node_count=n, flow_count=flows, k_policy=k, protocol=proto,
                            rng_seed=seed)
            out.append(cfg.validate())
        out.sort(key=run_key_sort)
        return out


def run_key(cfg):
    return (cfg.node_count, cfg.flow_count, cfg.k_policy, cfg.protocol, cfg.rng_seed)


def run_key_sort(cfg):
    return (cfg.node_count, cfg.flow_count, cfg.k_policy.sort_key, cfg.protocol, cfg.rng_seed)


def _run_one(cfg):
    try:
        return simulate(cfg).records
    except Exception as exc:
        raise SweepError(run_key(cfg), exc) from exc


def execute(configs, parallel: int = 1):
    """Run every config; returns [(config, records)] in the input order."""
    if parallel < 1:
        raise ValueError("parallel must be a positive integer")
    if parallel == 1 or len(configs) < 2:
        results = [_run_one(cfg) for cfg in configs]
    else:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_run_one, configs))
    return list(zip(configs, results))


def _key_cells(cfg):
    return [cfg.node_count, cfg.flow_count, cfg.k_policy.label, cfg.protocol]


def run_rows(results):
    """One row per (scenario, protocol, seed)."""
    rows = []
    for cfg, records in results:
        s = summarize(records)
        rows.append(_key_cells(cfg) + [cfg.rng_seed, s.discoveries, s.success_rate,
                                       s.mean_srb, s.mean_latency_s, s.mean_path_stretch])
    return RUN_COLUMNS, rows


AGGREGATE_COLUMNS = ("node_count", "flow_count", "k_policy", "protocol", "replications",
                     "discoveries", "success_rate", "mean_srb", "srb_ci95",
                     "mean_latency_s", "mean_path_stretch")


def aggregate_rows(results):
    """One row per scenario, averaged over seeds."""
    groups = defaultdict(list)
    first = {}
    for cfg, records in results:
        key = (cfg.node_count, cfg.flow_count, cfg.k_policy.sort_key, cfg.protocol)
        groups[key].append(summarize(records))
        first.setdefault(key, cfg)
    rows = []
    for key in sorted(groups):
        cfg = first[key]
        rep = aggregate(key, cfg.protocol, groups[key])
        rows.append(_key_cells(cfg) + [len(groups[key]), rep.discovery_count, rep.success_rate,
                                       rep.mean_srb, rep.srb_ci, rep.mean_latency_s,
                                       rep.mean_path_stretch])
    return AGGREGATE_COLUMNS, rows


LATENCY_COLUMNS = ("node_count", "flow_count", "k_policy", "protocol", "path_hops",
                   "discoveries", "mean_latency_s")


def latency_rows(results):
    """Mean route-acquisition latency per established path length, pooled over seeds."""
    groups = defaultdict(list)
    first = {}
    for cfg, records in results:
        for rec in records:
            if rec.succeeded:
                key = (cfg.node_count, cfg.flow_count, cfg.k_policy.sort_key, cfg.protocol,
                       rec.path_hops)
                groups[key].append(latency(rec))
                first.setdefault(key, cfg)
    rows = []
    for key in sorted(groups):
        vals = sorted(groups[key])
        rows.append(_key_cells(first[key]) + [key[-1], len(vals), sum(vals) / len(vals)])
    return LATENCY_COLUMNS, rows


def record_rows(results):
    rows = []
    for cfg, records in results:
        for rec in records:
            rows.append(_key_cells(cfg) + [
                cfg.rng_seed, rec.origin, rec.target, rec.seq, rec.start, rec.end, rec.r, rec.t,
                srb(rec.r, rec.t) if rec.r else None, rec.succeeded, rec.path_hops,
                rec.oracle_hops, latency(rec) if rec.succeeded else None,
            ])
    return RECORD_COLUMNS, rows


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def report_csv(spec: SweepSpec, results, aggregated: bool = False) -> str:
    if spec.report == "latency_by_hops":
        return to_csv(*latency_rows(results))
    if aggregated:
        return to_csv(*aggregate_rows(results))
    return to_csv(*run_rows(results))


# -- sweep files -----------------------------------------------------------------

_AXES = {"node_count": int, "k_policy": KPolicy.parse, "flow_count": int, "protocol": str}


def spec_from_dict(data: dict) -> SweepSpec:
    unknown = set(data) - {"base", "axes", "seeds", "report"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    base = config_from_dict(data.get("base", {}))
    axes = data.get("axes", {})
    values = {}
    for name, items in axes.items():
        if name not in _AXES:
            raise ConfigError(f"axes.{name}", "unknown axis")
        if not isinstance(items, list) or not items:
            raise ConfigError(f"axes.{name}", "expected a non-empty list")
        try:
            values[name] = tuple(_AXES[name](v) for v in items)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"axes.{name}", str(exc)) from None
    seeds = data.get("seeds", [base.rng_seed])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds", "expected a non-empty list of integers")
    report = data.get("report", "runs")
    if report not in REPORTS:
        raise ConfigError("report", f"must be one of {REPORTS}")
    spec = SweepSpec(base, values.get("node_count", ()), values.get("k_policy", ()),
                     values.get("flow_count", ()), values.get("protocol", ()), tuple(seeds),
                     report)
    spec.runs()  # validate every combination up front
    return spec


def load_sweep(path) -> SweepSpec:
    try:
        data = tomllib.loads(Path(path).read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"not valid TOML ({exc})") from None
    return spec_from_dict(data)


# -- presets -----------------------------------------------------------------------

def presets() -> dict[str, SweepSpec]:
    """Built-in grids for the density, K, multi-flow and latency experiments."""
    base = ScenarioConfig()
    rand37 = KPolicy.random(3, 7)
    return {
        "fig3": SweepSpec(
            base, DENSITIES,
            tuple(KPolicy.fixed(k) for k in (2, 3, 5, 7, 9)) + (KPolicy.random(3, 9),),
            (1,), ("PRP",), PRESET_SEEDS),
        "fig5_6": SweepSpec(base, DENSITIES, (rand37,), (1,), ("PRP", "Flood"), PRESET_SEEDS),
        "fig7": SweepSpec(base, DENSITIES, (rand37,), (2, 3, 5), ("PRP", "Flood"), PRESET_SEEDS),
        "fig8": SweepSpec(base, DENSITIES, (rand37,), (1, 2, 3, 5), ("PRP", "Flood"),
                          PRESET_SEEDS, report="latency_by_hops"),
    }


def get_preset(name: str) -> SweepSpec:
    table = presets()
    if name not in table:
        raise ConfigError("preset", f"unknown preset {name!r}; available: {', '.join(table)}")
    return table[name]
