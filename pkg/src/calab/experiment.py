"""Batch experiment pipeline: config parsing, task execution, report files."""
from __future__ import annotations

import csv
import io
import json
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .core import BernoulliMeasure, GuardExceeded, LocalRule, SeedStream, load_rule
from .decider import is_balanced_up_to, is_surjective
from .gilman import GilmanParams, classify_gilman
from .kurka import classify_kurka
from .spectral import (
    Observable,
    eigenvalue_scan,
    nearest_rational,
    rationality_verdict,
    uniform_grid,
)

SCHEMA = "calab.report/1"
TASKS = ("surjectivity", "kurka", "gilman", "spectral", "full")


class ConfigError(ValueError):
    pass


def _int_list(text) -> tuple[int, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", part)
        if m:
            out.extend(range(int(m.group(1)), int(m.group(2)) + 1))
        else:
            out.append(int(part))
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    rule: str = ""
    task: str = "full"
    seed: int = 0
    out: str = "out"
    # exact decider
    L: int = 8
    # blocking-word search
    kurka_max_len: int = 6
    kurka_T: int = 16
    # gilman
    m: int = 1
    n_grid: tuple[int, ...] = (2, 4, 8, 16)
    ratio_T: int = 64
    ratio_samples: int = 2000
    points: int = 3
    t_grid: tuple[int, ...] = tuple(range(17))
    prop_T: int = 64
    samples: int = 10_000
    gilman_threshold: float = 0.99
    # spectral
    N: int = 4096
    T: int = 1024
    orbits: int = 100
    grid: int = 1024
    threshold: float = 0.0
    Q: int = 64
    # corpus
    rules: str = ""
    workers: int = 1

    _positive = ("L", "kurka_max_len", "kurka_T", "m", "ratio_T", "ratio_samples", "points",
                 "prop_T", "samples", "N", "T", "orbits", "grid", "Q", "workers")

    def __post_init__(self):
        object.__setattr__(self, "n_grid", _int_list(self.n_grid))
        object.__setattr__(self, "t_grid", _int_list(self.t_grid))
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        for name in self._positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.threshold < 0:
            raise ConfigError("threshold must be >= 0 (0 selects the calibrated default)")
        if not self.n_grid or not self.t_grid:
            raise ConfigError("n_grid and t_grid must be nonempty")

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_mapping(cls, values: dict) -> ExperimentConfig:
        unknown = sorted(set(values) - set(cls.keys()))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        typed = {}
        for f in fields(cls):
            if f.name not in values or values[f.name] is None:
                continue
            raw = values[f.name]
            try:
                if f.name in ("n_grid", "t_grid"):
                    typed[f.name] = _int_list(raw)
                elif f.type in ("int", int):
                    typed[f.name] = int(raw)
                elif f.type in ("float", float):
                    typed[f.name] = float(raw)
                else:
                    typed[f.name] = str(raw)
            except ValueError:
                raise ConfigError(f"bad value for {f.name}: {raw!r}") from None
        return cls(**typed)

    def gilman_params(self) -> GilmanParams:
        return GilmanParams(
            kurka_max_len=self.kurka_max_len, kurka_T=self.kurka_T, m=self.m,
            n_list=self.n_grid, ratio_T=self.ratio_T, ratio_samples=self.ratio_samples,
            points=self.points, t_list=self.t_grid, prop_T=self.prop_T,
            prop_samples=self.samples, threshold=self.gilman_threshold,
        )

    def echo(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def parse_config_text(text: str) -> dict:
    """key=value lines; '#' starts a comment; blank lines ignored."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = val
    return values


def load_config_file(path: str | Path) -> dict:
    return parse_config_text(Path(path).read_text())


@dataclass
class Report:
    config: ExperimentConfig
    results: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    scan_rows: list = field(default_factory=list)
    profile_rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "tool_version": __version__,
            "seed": self.config.seed,
            "config": self.config.echo(),
            "results": self.results,
            "timings": self.timings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def results_json(self) -> str:
        return json.dumps(self.results, indent=2, sort_keys=True)


def _timed(report: Report, name: str, fn):
    t0 = time.perf_counter()
    out = fn()
    report.timings[name] = round(time.perf_counter() - t0, 6)
    return out


def off_rational_max(scan, Q: int) -> float:
    """Largest atom mass at grid points farther than one grid step from every p/q, q <= Q."""
    step = scan.grid_step
    worst = 0.0
    for alpha, mass in zip(scan.alpha_grid, scan.atom_mass):
        d = abs(alpha - float(nearest_rational(alpha, Q)))
        if min(d, 1 - d) > step * (1 + 1e-9):
            worst = max(worst, mass)
    return worst


def run(config: ExperimentConfig, rule: LocalRule | None = None) -> Report:
    """Execute ``config.task``; 'full' chains every stage and adds a consistency line."""
    if rule is None:
        if not config.rule:
            raise ConfigError("no rule given (use --rule eca:<n> or a rule file)")
        rule = load_rule(config.rule)
    report = Report(config)
    res = report.results
    res["rule"] = {"id": rule.label(), "k": rule.k, "r": rule.r}
    rng = SeedStream(config.seed)
    task = config.task
    surj = gilman = verdict = None

    if task in ("surjectivity", "full"):
        surj = _timed(report, "surjectivity", lambda: is_surjective(rule))
        res["surjectivity"] = surj.to_dict()
        try:
            balanced = is_balanced_up_to(rule, config.L)
        except GuardExceeded:
            balanced = None
        res["surjectivity"]["balance_oracle"] = {"L": config.L, "balanced": balanced}

    if task == "kurka":
        kv = _timed(report, "kurka", lambda: classify_kurka(rule, config.kurka_max_len, config.kurka_T))
        res["kurka"] = kv.to_dict()

    if task in ("gilman", "full"):
        if surj is None:
            surj = is_surjective(rule)
        gilman = _timed(report, "gilman", lambda: classify_gilman(
            rule, config.gilman_params(), rng.substream(1), surjective=surj.surjective))
        gd = gilman.to_dict()
        res["kurka"] = gd.pop("kurka")
        res["gilman"] = gd
        for prof in gilman.profiles.values():
            for e in prof:
                report.profile_rows.append({"t": e.t, "p_hat": e.p_hat, "ci_lo": e.ci[0],
                                            "ci_hi": e.ci[1], "direction": e.direction})

    if task in ("spectral", "full"):
        measure = BernoulliMeasure.uniform(rule.k)
        g = Observable.letter_at_zero(measure)
        scan = _timed(report, "spectral", lambda: eigenvalue_scan(
            rule, measure, g, uniform_grid(config.grid), config.T, config.orbits, config.N,
            rng.substream(2)))
        verdict = rationality_verdict(scan, config.threshold or None, config.Q)
        res["spectral"] = {
            "scan": scan.to_dict(),
            "rationality": verdict.to_dict(),
            "max_off_rational_mass": off_rational_max(scan, config.Q),
        }
        report.scan_rows = list(scan.csv_rows())

    if task == "full":
        applicable = gilman.cls == "C" and surj.surjective
        res["consistency"] = {
            "surjective": surj.surjective,
            "gilman_class": gilman.cls,
            "rationality": "PASS" if verdict.passed else "FAIL",
            "scan_guard_ok": res["spectral"]["scan"]["guard_ok"],
            "almost_expansive_no_irrational_eigenvalue":
                ("PASS" if verdict.passed else "FAIL") if applicable else "not-applicable",
        }
    return report


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_report(report: Report, out: str | Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "report.json", report.to_json() + "\n")
    if report.scan_rows:
        _atomic_write(out / "scan.csv", _csv_text(report.scan_rows, ["alpha", "atom_mass", "guard"]))
    if report.profile_rows:
        _atomic_write(out / "profile.csv",
                      _csv_text(report.profile_rows, ["t", "p_hat", "ci_lo", "ci_hi", "direction"]))
    return out / "report.json"


# ---------------------------------------------------------------- corpus

SUMMARY_COLUMNS = ["rule", "surjective", "kurka", "gilman", "max_off_rational_mass", "error"]


def expand_rules(text: str) -> list[str]:
    """'eca:0-255', 'eca:30,90,110', rule-file paths, or a comma mix of those."""
    out = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        m = re.fullmatch(r"eca:(\d+)-(\d+)", part)
        if m:
            out.extend(f"eca:{n}" for n in range(int(m.group(1)), int(m.group(2)) + 1))
        elif re.fullmatch(r"\d+", part) and out and out[-1].startswith("eca:"):
            out.append(f"eca:{part}")
        else:
            out.append(part)
    return out


def summary_row(rule_id: str, report: Report | None, error: str = "") -> dict:
    res = report.results if report else {}
    return {
        "rule": rule_id,
        "surjective": res.get("surjectivity", {}).get("surjective", ""),
        "kurka": res.get("kurka", {}).get("verdict", ""),
        "gilman": res.get("gilman", {}).get("class", ""),
        "max_off_rational_mass": res.get("spectral", {}).get("max_off_rational_mass", ""),
        "error": error,
    }


def _safe_name(rule_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", rule_id)


def _corpus_one(args) -> dict:
    rule_id, config = args
    try:
        report = run(replace(config, rule=rule_id))
    except Exception as exc:  # isolate per-rule failures in the summary
        return summary_row(rule_id, None, f"{type(exc).__name__}: {exc}")
    write_report(report, Path(config.out) / _safe_name(rule_id))
    return summary_row(rule_id, report)


def corpus(rules: list[str], config: ExperimentConfig) -> list[dict]:
    """Run ``config.task`` for every rule; writes per-rule reports and summary.csv."""
    if not rules:
        raise ConfigError("corpus must contain at least one rule")
    jobs = [(r, config) for r in rules]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            rows = list(pool.map(_corpus_one, jobs))
    else:
        rows = [_corpus_one(j) for j in jobs]
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "summary.csv", _csv_text(rows, SUMMARY_COLUMNS))
    return rows
