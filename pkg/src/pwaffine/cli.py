"""Command-line harness: run lemma checks, convergence sweeps, the BV study
or a point-location demo from a JSON config; write a JSON report, CSV tables
and (for sweeps) an SVG log-log plot.

Exit codes: 0 all configured tolerances pass, 2 invalid config, 3 tolerance
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    TV_BOUND_CONSTANT,
    VertexRegion,
    averaged_error,
    bv_counterexample,
    check_lemma1,
    check_lemma2,
    random_ball,
    random_simplex,
)
from .fields import FIELD_NAMES, make_field, smooth_corpus
from .mesh import BaseTriangulation, Box, TriangulationFrame
from .quadrature import gauss01

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TOLERANCE = 3

COMMANDS = ("lemma1", "lemma2", "converge", "bv", "locate-demo")

DEFAULT_TOLERANCES = {
    "lemma1": {"residual": 1e-8},
    "lemma2": {"residual": 1e-8},
    "converge": {"ratio_low": 1.7, "ratio_high": 2.6},
    "bv": {"min_tv": 3.8, "mean_tv": 3.9, "tv_constant": TV_BOUND_CONSTANT,
           "exact_tv_tol": 1e-12},
    "locate-demo": {"containment": 1e-9},
}


class ConfigError(ValueError):
    """The run configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    n: int = 2
    field_name: str = "gaussian"
    p: float = 2.0
    q: float = 2.0
    r_schedule: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    samples: int = 32
    seed: int = 7
    domain: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    out_dir: str = "out"
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "n": self.n,
            "field": self.field_name,
            "p": self.p,
            "q": self.q,
            "r_schedule": list(self.r_schedule),
            "samples": self.samples,
            "seed": self.seed,
            "domain": None if self.domain is None else [list(self.domain[0]), list(self.domain[1])],
            "out_dir": self.out_dir,
            "tolerances": dict(self.tolerances),
        }

    def effective_tolerances(self) -> dict:
        merged = dict(DEFAULT_TOLERANCES.get(self.command, {}))
        merged.update(self.tolerances)
        return merged


_CONFIG_KEYS = {"command", "n", "field", "p", "q", "r_schedule", "samples",
                "seed", "domain", "out_dir", "tolerances"}


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "command" not in raw:
        raise ConfigError("config must name a command")
    try:
        cfg = RunConfig(
            command=str(raw["command"]),
            n=int(raw.get("n", 2)),
            field_name=str(raw.get("field", "gaussian")),
            p=float(raw.get("p", 2.0)),
            q=float(raw.get("q", 2.0)),
            r_schedule=tuple(float(r) for r in raw.get("r_schedule", (0.4, 0.2, 0.1, 0.05))),
            samples=int(raw.get("samples", 32)),
            seed=int(raw.get("seed", 7)),
            domain=_parse_domain(raw.get("domain")),
            out_dir=str(raw.get("out_dir", "out")),
            tolerances=dict(raw.get("tolerances", {})),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config value: {exc}") from None
    validate_config(cfg)
    return cfg


def _parse_domain(raw):
    if raw is None:
        return None
    try:
        lo, up = raw
        return tuple(float(v) for v in lo), tuple(float(v) for v in up)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"domain must be a [lower, upper] pair: {exc}") from None


def validate_config(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}; choose from {COMMANDS}")
    if cfg.n not in (1, 2, 3):
        raise ConfigError("the dimension n must be 1, 2 or 3")
    if cfg.p < 1 or cfg.q < 1:
        raise ConfigError("the exponents p and q must be at least 1")
    if cfg.samples < 1:
        raise ConfigError("need at least one sample")
    if not cfg.r_schedule or any(r <= 0 for r in cfg.r_schedule):
        raise ConfigError("r_schedule must be nonempty with positive entries")
    if cfg.field_name != "corpus" and cfg.field_name not in FIELD_NAMES:
        raise ConfigError(f"unknown field {cfg.field_name!r}")
    if cfg.field_name == "indicator_triangle":
        if cfg.n != 2:
            raise ConfigError("the triangle indicator needs n = 2")
        if cfg.command in ("lemma1", "lemma2"):
            raise ConfigError("lemma checks need a field with pointwise gradients")
    if cfg.domain is not None:
        lo, up = cfg.domain
        if len(lo) != cfg.n or len(up) != cfg.n:
            raise ConfigError("domain dimension does not match n")
        if any(l > u for l, u in zip(lo, up)):
            raise ConfigError("domain lower must not exceed upper")
    if cfg.command == "bv" and any(r > 0.1 for r in cfg.r_schedule):
        raise ConfigError("the bv study needs r <= 0.1 for meaningful statistics")
    for key, val in cfg.tolerances.items():
        if not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ConfigError(f"tolerance {key!r} must be a finite number")


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(raw)


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def parse_config(text: str) -> RunConfig:
    return config_from_dict(json.loads(text))


@dataclass
class RunReport:
    config: dict
    results: dict
    passed: bool
    failures: list[str]
    wall_time_s: float
    version: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        raw = json.loads(text)
        return cls(**raw)


def _domain_box(cfg: RunConfig) -> Box | None:
    return None if cfg.domain is None else Box(cfg.domain[0], cfg.domain[1])


# -- command runners (results dict, failures, tables) ---------------------------


def _run_lemmas(cfg: RunConfig, which: str):
    tol = cfg.effective_tolerances()["residual"]
    rng = np.random.default_rng(cfg.seed)
    if cfg.field_name == "corpus":
        fields = smooth_corpus(cfg.n)
    else:
        fields = [make_field(cfg.field_name, cfg.n)]
    rows = []
    for fld in fields:
        for _ in range(cfg.samples):
            s = random_simplex(rng, cfg.n)
            if which == "lemma1":
                res = check_lemma1(fld, VertexRegion(s, int(rng.integers(0, cfg.n + 1))))
            else:
                res = check_lemma2(fld, s)
            rows.append(res.to_dict())
        if which == "lemma1":
            for _ in range(max(1, cfg.samples // 2)):
                res = check_lemma1(fld, random_ball(rng, cfg.n))
                rows.append(res.to_dict())
        if which == "lemma2" and cfg.n == 1:
            rows.extend(_lemma2_reduction_rows(fld, rng, max(1, cfg.samples // 4)))
    worst = max(row["residual"] for row in rows)
    failures = [] if worst <= tol else [f"max residual {worst:.3e} exceeds {tol:.1e}"]
    results = {"checks": rows, "max_residual": worst, "tolerance": tol}
    table = [
        (
            "residuals.csv",
            ["field", "region", "n", "lhs", "rhs", "residual"],
            [
                [
                    row["context"].get("field", ""),
                    row["context"].get("region", "simplex"),
                    row["context"]["n"],
                    row["lhs"],
                    row["rhs"],
                    row["residual"],
                ]
                for row in rows
            ],
        )
    ]
    return results, failures, table, None


def _lemma2_reduction_rows(fld, rng: np.random.Generator, count: int) -> list[dict]:
    """In dimension 1 the kernel average reduces to the plain mean of u'."""
    t, wt = gauss01(24)
    rows = []
    for _ in range(count):
        a = float(rng.uniform(-1.5, 1.5))
        b = a + float(rng.uniform(0.3, 1.5))
        pts = (a + (b - a) * t)[:, None]
        mean_du = float(wt @ fld.gradient(pts)[:, 0])
        slope = (float(fld.value(np.array([b]))) - float(fld.value(np.array([a])))) / (b - a)
        rows.append(
            {
                "lhs": slope,
                "rhs": mean_du,
                "residual": abs(slope - mean_du),
                "context": {"field": fld.name, "region": "reduction", "n": 1,
                            "interval": [a, b]},
            }
        )
    return rows


def _run_converge(cfg: RunConfig):
    tols = cfg.effective_tolerances()
    fld = make_field(cfg.field_name, cfg.n)
    domain = _domain_box(cfg)
    levels = []
    for i, r in enumerate(cfg.r_schedule):
        rep = averaged_error(fld, r, cfg.p, cfg.q, cfg.samples, cfg.seed + i, domain)
        levels.append(rep)
    means = [lev.mean for lev in levels]
    monotone = all(b < a for a, b in zip(means, means[1:]))
    failures = []
    if not monotone:
        failures.append(f"mean error is not strictly decreasing: {means}")
    ratio = None
    if len(levels) >= 2 and levels[-1].mean_grad and levels[-2].mean_grad:
        ratio = (levels[-2].mean_grad / levels[-1].mean_grad) ** (1.0 / cfg.p)
        if not tols["ratio_low"] <= ratio <= tols["ratio_high"]:
            failures.append(
                f"gradient-norm halving ratio {ratio:.3f} outside "
                f"[{tols['ratio_low']}, {tols['ratio_high']}]"
            )
    results = {
        "levels": [lev.to_dict() for lev in levels],
        "grad_norm_ratio_finest": ratio,
        "monotone_mean": monotone,
    }
    header = ["r", "samples", "mean", "min", "max", "mean_grad", "mean_value", "rejected"]
    rows = [
        [lev.r, lev.samples, lev.mean, lev.min, lev.max,
         lev.mean_grad if lev.mean_grad is not None else float("nan"),
         lev.mean_value, lev.rejected_offsets]
        for lev in levels
    ]
    sample_rows = []
    for lev in levels:
        for idx, (err, h) in enumerate(zip(lev.per_sample, lev.offsets)):
            sample_rows.append([lev.r, idx] + list(h) + [err])
    tables = [
        ("convergence.csv", header, rows),
        (
            "convergence_samples.csv",
            ["r", "sample"] + [f"h{i}" for i in range(cfg.n)] + ["combined_error"],
            sample_rows,
        ),
    ]
    return results, failures, tables, ("convergence.svg", levels, cfg)


def _run_bv(cfg: RunConfig):
    tols = cfg.effective_tolerances()
    studies = [bv_counterexample(r, cfg.samples, cfg.seed) for r in cfg.r_schedule]
    exact = studies[0].exact_tv
    failures = []
    if abs(exact - (2.0 + math.sqrt(2.0))) > tols["exact_tv_tol"]:
        failures.append(f"exact TV {exact!r} is not 2 + sqrt(2)")
    finest = min(studies, key=lambda s: s.r)
    if finest.min_tv < tols["min_tv"]:
        failures.append(f"min sampled TV {finest.min_tv:.4f} below {tols['min_tv']}")
    if finest.mean_tv < tols["mean_tv"]:
        failures.append(f"mean sampled TV {finest.mean_tv:.4f} below {tols['mean_tv']}")
    bound = tols["tv_constant"] * exact
    worst = max(s.max_tv for s in studies)
    if worst > bound:
        failures.append(
            f"sampled TV {worst:.4f} exceeds the frozen bound {bound:.4f}"
        )
    results = {
        "studies": [s.to_dict() for s in studies],
        "exact_tv": exact,
        "tv_constant": tols["tv_constant"],
        "max_tv_over_all": worst,
    }
    tables = [
        (
            "bv.csv",
            ["r", "samples", "exact_tv", "min_tv", "mean_tv", "max_tv", "max_ratio", "rejected"],
            [[s.r, s.samples, s.exact_tv, s.min_tv, s.mean_tv, s.max_tv,
              s.max_ratio, s.rejected_offsets] for s in studies],
        ),
        (
            "bv_samples.csv",
            ["r", "sample", "h0", "h1", "tv"],
            [[s.r, idx] + list(h) + [tv]
             for s in studies for idx, (h, tv) in enumerate(zip(s.offsets, s.tvs))],
        ),
    ]
    return results, failures, tables, None


def _run_locate_demo(cfg: RunConfig):
    tol = cfg.effective_tolerances()["containment"]
    rng = np.random.default_rng(cfg.seed)
    frame = TriangulationFrame(BaseTriangulation(cfg.n), cfg.r_schedule[0],
                               rng.uniform(-0.5, 0.5, cfg.n))
    box = _domain_box(cfg) or Box([-1.0] * cfg.n, [1.0] * cfg.n)
    pts = rng.uniform(box.lower, box.upper, (cfg.samples, cfg.n))
    rows = []
    worst = math.inf
    for pt in pts:
        key = frame.locate(pt)
        s = frame.simplex_of(key)
        bmin = float(np.min(s.barycentric(pt)))
        worst = min(worst, bmin)
        rows.append(list(pt) + [list(key.lattice), list(key.perm), bmin])
    failures = [] if worst >= -tol else [f"containment violated: min barycentric {worst:.3e}"]
    results = {"points": cfg.samples, "min_barycentric": worst,
               "r": frame.r, "h": frame.h.tolist()}
    tables = [
        (
            "locate.csv",
            [f"x{i}" for i in range(cfg.n)] + ["lattice", "perm", "min_barycentric"],
            rows,
        )
    ]
    return results, failures, tables, None


def _write_plot(path: Path, levels, cfg: RunConfig) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rs = [lev.r for lev in levels]
    means = [lev.mean for lev in levels]
    fig, ax = plt.subplots(figsize=(5.0, 3.75))
    ax.loglog(rs, means, "o-", label=f"mean grad^{cfg.p:g} + value^{cfg.q:g}")
    if all(lev.mean_grad for lev in levels):
        norms = [lev.mean_grad ** (1.0 / cfg.p) for lev in levels]
        ax.loglog(rs, norms, "s--", label="mean gradient error norm")
        anchor = norms[0] / rs[0]
        ax.loglog(rs, [anchor * r for r in rs], ":", color="gray", label="slope 1")
    ax.set_xlabel("scale r")
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    ax.set_title(f"{cfg.field_name}, n={cfg.n}")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


_RUNNERS = {
    "lemma1": lambda cfg: _run_lemmas(cfg, "lemma1"),
    "lemma2": lambda cfg: _run_lemmas(cfg, "lemma2"),
    "converge": _run_converge,
    "bv": _run_bv,
    "locate-demo": _run_locate_demo,
}


def execute(cfg: RunConfig, out_dir: str | Path | None = None) -> tuple[RunReport, int]:
    """Run the configured command, write report/tables/plots, return the report
    and the exit status."""
    start = time.perf_counter()
    results, failures, tables, plot = _RUNNERS[cfg.command](cfg)
    report = RunReport(
        config=cfg.to_dict(),
        results=results,
        passed=not failures,
        failures=failures,
        wall_time_s=time.perf_counter() - start,
        version=__version__,
    )
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    tables_dir = out / "tables"
    tables_dir.mkdir(exist_ok=True)
    for name, header, rows in tables:
        with open(tables_dir / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    if plot is not None:
        plots_dir = out / "plots"
        plots_dir.mkdir(exist_ok=True)
        name, levels, plot_cfg = plot
        _write_plot(plots_dir / name, levels, plot_cfg)
    return report, EXIT_OK if report.passed else EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pwaffine",
        description="Piecewise affine interpolation experiments",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to a JSON run config")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="seed override")
    parser.add_argument("--samples", type=int, help="sample-count override")
    parser.add_argument("--r", type=float, nargs="+", help="r-schedule override")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.command != args.command:
            raise ConfigError(
                f"config names command {cfg.command!r} but {args.command!r} was requested"
            )
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.samples is not None:
            overrides["samples"] = args.samples
        if args.r is not None:
            overrides["r_schedule"] = tuple(args.r)
        if overrides:
            cfg = replace(cfg, **overrides)
            validate_config(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report, status = execute(cfg, out_dir=args.out)
    summary = "pass" if report.passed else "FAIL: " + "; ".join(report.failures)
    print(f"{cfg.command}: {summary}")
    return status


if __name__ == "__main__":
    sys.exit(main())
