"""Experiment configs, presets, and result persistence.

Every experiment writes into ``<out>/<name>/``: CSV tables, a ``summary.json``
and one ``plot_<curve>.tsv`` per curve.  Files are written to a temporary name
and renamed into place; contents carry no timestamps, so identical configs
produce byte-identical outputs.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Any

from posharm import grigorchuk
from posharm.ballcache import atomic_write, cached_build_ball, default_cache_dir
from posharm.balls import DEFAULT_SIZE_CAP, BallSizeError, growth_profile
from posharm.exit import (
    EXACT_LIMIT,
    ExactSizeError,
    ExitMeasure,
    check_exit_invariants,
    epsilon,
    epsilon_scan,
)
from posharm.groups import GroupSpecError, StepDistribution, make_group, uniform_steps, weighted_steps
from posharm.harmonic import build_fn, growth_certificate, harmonicity_residual, select_extremal_boundary
from posharm.suites import harmonic_suite, lemma2_suite, telescoping_suite
from posharm.walks import compare_to_exact, sample_exit

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVARIANT, EXIT_BAD_INPUT, EXIT_RESOURCE = 0, 1, 2, 3

KINDS = (
    "ball", "exit", "epsilon-scan", "growth", "certify", "lemma2",
    "telescope", "harmonic", "simulate", "probe-grigorchuk",
)
MODES = ("exact", "float", "auto")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    group: str = "z:1"
    probs: dict | None = None  # generator name -> probability (rational string)
    name: str | None = None
    radius_min: int = 1
    radius_max: int = 8
    mode: str = "auto"
    a: str = "e"
    b: str | None = None  # defaults to the first step generator
    delta: str = "1/4"
    r0: int = 4
    samples: int = 1_000_000
    seed: int = 0
    instances: int = 100
    workers: int = 1
    out: str = "results"
    cache_dir: str | None = None
    size_cap: int = DEFAULT_SIZE_CAP
    exact_limit: int = EXACT_LIMIT

    @property
    def label(self) -> str:
        return self.name or self.experiment

    def validate(self) -> StepDistribution:
        """Check the config and return its step distribution; raises ConfigError."""
        if self.experiment not in KINDS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(KINDS)}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.radius_min < 0 or self.radius_max < self.radius_min:
            raise ConfigError(f"empty radius range [{self.radius_min}, {self.radius_max}]")
        try:
            group = make_group(self.group)
        except GroupSpecError as exc:
            raise ConfigError(str(exc)) from None
        try:
            if self.probs:
                dist = weighted_steps(group, {k: Fraction(str(v)) for k, v in self.probs.items()})
            else:
                dist = uniform_steps(group)
            dist.check_strongly_connected()
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad step distribution: {exc}") from None
        try:
            delta = Fraction(self.delta)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"bad delta {self.delta!r}") from None
        if self.experiment == "certify":
            if not 0 < delta < 1:
                raise ConfigError("delta must lie in (0, 1)")
            if not 1 <= self.r0 < self.radius_max:
                raise ConfigError("need 1 <= r0 < radius_max")
        if self.experiment == "growth" and self.radius_max < 2:
            raise ConfigError("growth needs radius_max >= 2")
        if self.size_cap < 1 or self.exact_limit < 1:
            raise ConfigError("size_cap and exact_limit must be positive")
        if self.samples < 1 or self.instances < 1:
            raise ConfigError("samples and instances must be positive")
        try:
            group.parse(self.a)
            if self.b is not None:
                group.parse(self.b)
        except (GroupSpecError, ValueError) as exc:
            raise ConfigError(f"bad vertex: {exc}") from None
        return dist

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' field")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class Result:
    config: ExperimentConfig
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    plots: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    reports: dict[str, dict] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    partial: bool = False

    @property
    def status(self) -> int:
        if self.failures:
            return EXIT_INVARIANT
        if self.partial:
            return EXIT_RESOURCE
        return EXIT_OK


def _num(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


def _nonincreasing(values: list, exact: list[bool]) -> bool:
    for prev, cur, ex in zip(values, values[1:], exact[1:]):
        tol = 0 if ex else 1e-9 * max(1.0, float(prev))
        if cur > prev + tol:
            return False
    return True


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

def _run_epsilon_scan(cfg: ExperimentConfig, dist: StepDistribution, res: Result) -> None:
    group = dist.group
    a = group.parse(cfg.a)
    b = group.parse(cfg.b) if cfg.b else a * group.generator(dist.names[0])
    radii = range(max(cfg.radius_min, 1), cfg.radius_max + 1)
    try:
        rows = epsilon_scan(
            dist, a, b, radii, mode=cfg.mode, exact_limit=cfg.exact_limit,
            cache_dir=cfg.cache_dir, size_cap=cfg.size_cap,
        )
    except ValueError as exc:
        if "is not in B(a" in str(exc):
            raise ConfigError(str(exc)) from None
        raise
    header = ["family", "a", "b", "r", "eps_num", "eps_den", "eps_float", "mode",
              "argmax_boundary", "excluded_mass_count"]
    table = []
    plot_ab, plot_ba = [], []
    for row in rows:
        for (aa, bb, val, word, excl, sink) in (
            (a, b, row.value, row.argmax_word, row.excluded_count, plot_ab),
            (b, a, row.reverse_value, row.reverse_argmax_word, row.reverse_excluded_count, plot_ba),
        ):
            exact = isinstance(val, Fraction)
            table.append([
                group.spec, str(aa), str(bb), row.r,
                val.numerator if exact else "", val.denominator if exact else "",
                repr(float(val)), row.mode, word, excl,
            ])
            sink.append([row.r, _num(val), row.mode])
    res.tables["epsilon_scan.csv"] = (header, table)
    res.plots["eps_ab"] = (["r", "value", "mode"], plot_ab)
    res.plots["eps_ba"] = (["r", "value", "mode"], plot_ba)
    exact_flags = [r.mode == "exact" for r in rows]
    for label, vals in (("(a,b)", [r.value for r in rows]), ("(b,a)", [r.reverse_value for r in rows])):
        if not _nonincreasing(vals, exact_flags):
            res.failures.append(f"epsilon scan {label} is not nonincreasing")
    res.summary.update(
        a=str(a), b=str(b),
        eps=[[r.r, _num(r.value)] for r in rows],
        eps_reverse=[[r.r, _num(r.reverse_value)] for r in rows],
    )


def _run_growth(cfg, dist, res):
    prof = growth_profile(dist, cfg.radius_max, cfg.size_cap)
    header = ["family", "r", "ball", "boundary", "new_vertices"]
    res.tables["growth.csv"] = (
        header,
        [[prof.family, r, b, nb, nv] for (r, b, nb), nv in zip(prof.rows, prof.new_vertices)],
    )
    res.plots["growth"] = (
        ["r", "ball", "boundary", "log_ball"],
        [[r, b, nb, repr(math.log(b))] for r, b, nb in prof.rows],
    )
    # the boundary of B(r) is the sphere of radius r + 1
    for (r, _, nb), nxt in zip(prof.rows, prof.new_vertices[1:]):
        if nb != nxt:
            res.failures.append(f"boundary size at r={r} differs from sphere size at r+1")
    sizes = prof.sizes
    if any(x >= y for x, y in zip(sizes, sizes[1:])):
        res.failures.append("ball sizes not strictly increasing")
    res.partial = prof.truncated
    res.summary.update(
        classification=prof.classification,
        exp_rate=prof.exp_rate,
        poly_degree=prof.poly_degree,
        exp_residual=prof.exp_residual,
        poly_residual=prof.poly_residual,
        truncated=prof.truncated,
    )


def _run_certify(cfg, dist, res):
    mode = "float" if cfg.mode == "float" else "exact"
    cert = growth_certificate(dist, Fraction(cfg.delta), cfg.r0, cfg.radius_max, mode=mode)
    header = ["family", "delta", "r0", "r", "premise_holds", "bound_num", "bound_den",
              "min_mu_num", "min_mu_den", "boundary_size", "conclusion_holds"]
    table, plot = [], []
    for row in cert.rows:
        b, m = Fraction(row.bound), row.min_mu
        table.append([
            cert.family, str(cert.delta), cert.r0, row.r, row.premise_holds,
            b.numerator, b.denominator,
            m.numerator if isinstance(m, Fraction) else repr(float(m)),
            m.denominator if isinstance(m, Fraction) else "",
            row.boundary_size, row.conclusion_holds,
        ])
        plot.append([row.r, _num(row.bound), _num(row.min_mu), row.conclusion_holds])
    res.tables["certificate.csv"] = (header, table)
    res.plots["certificate"] = (["r", "bound", "measured_min_mu", "holds"], plot)
    if cert.violations:
        res.failures.append(f"premise holds but conclusion fails at r={cert.violations}")
    res.summary.update(
        premise_holds=cert.premise_holds,
        failing_s=cert.failing_s,
        one_step_eps={str(s): _num(v) for s, v in cert.one_step_eps.items()},
        p=str(cert.p),
        alt_form_holds=[row.r for row in cert.rows if row.alt_conclusion_holds],
    )


def _suite_result(res: Result, report) -> None:
    res.reports[f"{report.lemma}_{report.family.replace(':', '_')}.json"] = report.to_dict()
    res.summary.setdefault("suites", []).append(
        {"lemma": report.lemma, "family": report.family, "instances": report.instances,
         "failures": len(report.failures)}
    )
    if report.failures:
        res.failures.append(f"{report.lemma} suite failed on {report.family}: {len(report.failures)} instances")


def _run_lemma2(cfg, dist, res):
    _suite_result(res, lemma2_suite(cfg.group, cfg.instances, cfg.radius_max, cfg.seed, cfg.workers))


def _run_harmonic(cfg, dist, res):
    _suite_result(res, harmonic_suite(cfg.group, cfg.instances, cfg.radius_max, cfg.seed, cfg.workers))


def _run_telescope(cfg, dist, res):
    _suite_result(res, telescoping_suite(cfg.group, cfg.radius_max))


def _pick_mode(cfg, n_interior: int) -> str:
    if cfg.mode == "auto":
        return "exact" if n_interior <= 3000 else "float"
    return cfg.mode


def _run_ball(cfg, dist, res):
    group = dist.group
    ball = cached_build_ball(group.parse(cfg.a), dist, cfg.radius_max, cfg.cache_dir, cfg.size_cap)
    res.tables["vertices.csv"] = (
        ["index", "distance", "word", "payload"],
        [[i, ball.distance[i], ball.word(i), group.format(v)] for i, v in enumerate(ball.vertices)],
    )
    res.tables["boundary.csv"] = (
        ["boundary_index", "word", "payload", "predecessors"],
        [[j, ball.boundary_word(j), group.format(x), " ".join(map(str, ball.boundary_preds[j]))]
         for j, x in enumerate(ball.boundary)],
    )
    res.summary.update(center=cfg.a, radius=cfg.radius_max, interior=ball.n_interior, boundary=ball.n_boundary)


def _run_exit(cfg, dist, res):
    group = dist.group
    ball = cached_build_ball(group.parse(cfg.a), dist, cfg.radius_max, cfg.cache_dir, cfg.size_cap)
    mode = _pick_mode(cfg, ball.n_interior)
    em = ExitMeasure(ball, mode, cfg.exact_limit)
    mat = em.matrix()
    if em.exact:
        header = ["interior_index", "boundary_index", "numerator", "denominator"]
        rows = [[i, j, q.numerator, q.denominator] for i, row in enumerate(mat) for j, q in enumerate(row) if q]
    else:
        header = ["interior_index", "boundary_index", "value"]
        rows = [[i, j, repr(float(q))] for i, row in enumerate(mat) for j, q in enumerate(row) if q]
    res.tables["exit_measure.csv"] = (header, rows)
    problems = check_exit_invariants(em)
    res.failures.extend(problems[:10])
    res.summary.update(mode=mode, interior=ball.n_interior, boundary=ball.n_boundary,
                       invariant_problems=len(problems))


def _run_simulate(cfg, dist, res):
    group = dist.group
    ball = cached_build_ball(group.parse(cfg.a), dist, cfg.radius_max, cfg.cache_dir, cfg.size_cap)
    em = ExitMeasure(ball, _pick_mode(cfg, ball.n_interior), cfg.exact_limit)
    emp = sample_exit(ball, 0, cfg.samples, cfg.seed)
    cmp = compare_to_exact(emp, em)
    res.tables["exit_counts.csv"] = (
        ["boundary_index", "word", "count", "mu"],
        [[j, ball.boundary_word(j), int(c), _num(m)] for j, (c, m) in enumerate(zip(emp.counts, em.row(0)))],
    )
    if not emp.valid:
        res.failures.append(f"{emp.cap_hits} walks hit the step cap")
    if cmp.z_max >= 5:
        res.failures.append(f"z_max = {cmp.z_max:.3f} >= 5")
    res.summary.update(
        samples=cfg.samples, seed=cfg.seed, radius=cfg.radius_max,
        max_abs_diff=cmp.max_abs_diff, total_variation=cmp.total_variation, z_max=cmp.z_max,
    )


def _run_probe_grigorchuk(cfg, dist, res):
    if dist.group.spec != "grigorchuk":
        raise ConfigError("probe-grigorchuk needs --group grigorchuk")
    group = dist.group
    relations = {
        "a^2": "aa", "b^2": "bb", "c^2": "cc", "d^2": "dd",
        "bc=d": "bcd", "cb=d": "cbd", "bd=c": "bdc", "db=c": "dbc", "cd=b": "cdb", "dc=b": "dcb",
        "(ad)^4": "ad" * 4,
    }
    rel_ok = {}
    for label, word in relations.items():
        ok = grigorchuk.word_is_identity(word) and group.word(word) == group.one
        rel_ok[label] = ok
        if not ok:
            res.failures.append(f"relation {label} not verified")
    sizes, eps_rows, plot = [], [], {n: [] for n in dist.names}
    f_checks = 0
    for r in range(0, cfg.radius_max + 1):
        ball = cached_build_ball(None, dist, r, cfg.cache_dir, cfg.size_cap)
        sizes.append([r, ball.n_interior, ball.n_boundary])
        if r == 0:
            continue
        mode = "exact" if ball.n_interior <= 3000 and cfg.mode != "float" else "float"
        em = ExitMeasure(ball, mode, cfg.exact_limit)
        problems = check_exit_invariants(em)
        res.failures.extend(f"r={r}: {p}" for p in problems[:5])
        for name in dist.names:
            s = group.generator(name)
            rep = epsilon(em, 0, s)
            eps_rows.append([group.spec, "e", name, r, _num(rep.value), mode, ball.boundary_word(rep.argmax)])
            plot[name].append([r, _num(rep.value), mode])
            x = select_extremal_boundary(em, 0, s)
            if x is None or not em.exact:
                continue
            f = build_fn(em, 0, x)
            f_checks += 1
            if harmonicity_residual(f) != 0 or f.interior[0] != 1 or min(f.interior) < 0:
                res.failures.append(f"f_n invariants fail at r={r}, b={name}")
    if any(x[1] >= y[1] for x, y in zip(sizes, sizes[1:])):
        res.failures.append("Grigorchuk ball sizes not strictly increasing")
    res.tables["ball_sizes.csv"] = (["r", "ball", "boundary"], sizes)
    res.tables["epsilon_scan.csv"] = (["family", "a", "b", "r", "eps", "mode", "argmax_boundary"], eps_rows)
    for name, rows in plot.items():
        res.plots[f"eps_e_{name}"] = (["r", "value", "mode"], rows)
    res.summary.update(relations=rel_ok, ball_sizes=sizes, fn_instances=f_checks)


RUNNERS = {
    "ball": _run_ball,
    "exit": _run_exit,
    "epsilon-scan": _run_epsilon_scan,
    "growth": _run_growth,
    "certify": _run_certify,
    "lemma2": _run_lemma2,
    "harmonic": _run_harmonic,
    "telescope": _run_telescope,
    "simulate": _run_simulate,
    "probe-grigorchuk": _run_probe_grigorchuk,
}


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _csv_bytes(header: list[str], rows: list[list], delimiter: str = ",") -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def emit_plot_data(res: Result, directory: Path) -> list[Path]:
    """One tab-separated file per curve, rows sorted by r."""
    paths = []
    for curve, (header, rows) in sorted(res.plots.items()):
        path = directory / f"plot_{curve}.tsv"
        atomic_write(path, _csv_bytes(header, sorted(rows, key=lambda row: row[0]), "\t"))
        paths.append(path)
    return paths


def write_result(res: Result, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for fname, (header, rows) in res.tables.items():
        atomic_write(directory / fname, _csv_bytes(header, rows))
    for fname, report in res.reports.items():
        atomic_write(directory / fname, json.dumps(report, sort_keys=True, indent=2, default=str).encode())
    emit_plot_data(res, directory)
    cfg = asdict(res.config)
    cfg.pop("out", None)
    cfg.pop("cache_dir", None)
    summary = {
        "config": cfg,
        "status": res.status,
        "failures": res.failures,
        "partial": res.partial,
        **res.summary,
    }
    atomic_write(directory / "summary.json", json.dumps(summary, sort_keys=True, indent=2, default=str).encode())


def run_experiment(cfg: ExperimentConfig, out: Path | None = None) -> Result:
    """Validate, run and persist one experiment.  Raises ConfigError on bad input."""
    dist = cfg.validate()
    if cfg.cache_dir is None:
        env = default_cache_dir()
        cfg = replace(cfg, cache_dir=str(env) if env else None)
    res = Result(cfg)
    try:
        RUNNERS[cfg.experiment](cfg, dist, res)
    except (BallSizeError, ExactSizeError) as exc:
        log.warning("resource cap: %s", exc)
        res.partial = True
        res.summary["resource_error"] = str(exc)
    directory = Path(out if out is not None else cfg.out) / cfg.label
    write_result(res, directory)
    return res


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

PRESETS: dict[str, list[ExperimentConfig]] = {
    "z1-control": [ExperimentConfig("epsilon-scan", "z:1", radius_max=8, mode="exact", name="z1-control")],
    "z2-control": [ExperimentConfig("epsilon-scan", "z:2", radius_max=16, mode="float", name="z2-control")],
    "heisenberg-growth": [ExperimentConfig("growth", "heis", radius_max=16, name="heisenberg-growth")],
    "f2-floor": [ExperimentConfig("epsilon-scan", "free:2", radius_max=6, mode="exact", name="f2-floor")],
    "lamplighter-scan": [ExperimentConfig("epsilon-scan", "lamplighter", radius_max=8, name="lamplighter-scan")],
    "bs12-scan": [ExperimentConfig("epsilon-scan", "bs:1:2", radius_max=6, name="bs12-scan")],
    "lemma2-suite": [
        ExperimentConfig("lemma2", fam, radius_max=4, instances=100, name=f"lemma2-{fam.replace(':', '')}")
        for fam in ("z:2", "free:2", "lamplighter", "bs:1:2")
    ],
    "telescoping-suite": [
        ExperimentConfig("telescope", fam, radius_max=r, name=f"telescope-{fam.replace(':', '')}")
        for fam, r in (("z:1", 8), ("z:2", 5), ("free:2", 4))
    ],
    "certify": [
        ExperimentConfig("certify", "z:1", delta="1/4", r0=4, radius_max=12, name="certify-z1"),
        ExperimentConfig("certify", "free:2", delta="1/4", r0=2, radius_max=6, name="certify-f2"),
    ],
    "mc-crosscheck": [
        ExperimentConfig("simulate", "z:1", radius_max=4, samples=10**6, seed=20240601, name="mc-z1"),
        ExperimentConfig("simulate", "free:2", radius_max=3, samples=10**6, seed=20240601, name="mc-f2"),
    ],
    "grigorchuk-probe": [ExperimentConfig("probe-grigorchuk", "grigorchuk", radius_max=8, name="grigorchuk-probe")],
}

PRESET_DESCRIPTIONS = {
    "z1-control": "epsilon(B(0,r); 0, 1) on Z for r <= 8, exact; expect 1/(r+1)",
    "z2-control": "epsilon(B(0,r); 0, e1) on Z^2 for r <= 16, float",
    "heisenberg-growth": "ball growth of the Heisenberg group to r = 16",
    "f2-floor": "epsilon(B(e,r); e, a) on F_2 for r <= 6, exact; stays bounded away from 0",
    "lamplighter-scan": "epsilon scan on the lamplighter group",
    "bs12-scan": "epsilon scan on BS(1,2)",
    "lemma2-suite": "monotonicity of epsilon under inclusion, 100 random nested balls per family",
    "telescoping-suite": "geodesic ratio products and bounds on every boundary point",
    "certify": "growth-bound certificate on Z (premise holds) and F_2 (premise fails)",
    "mc-crosscheck": "Monte Carlo exit laws against the exact solver, N = 10^6",
    "grigorchuk-probe": "relations, balls to r = 8, invariants and epsilon scans for the Grigorchuk group",
}


def list_presets() -> list[tuple[str, str]]:
    return [(name, PRESET_DESCRIPTIONS[name]) for name in PRESETS]


def run_preset(name: str, out: Path | str = "results", **overrides) -> tuple[int, list[Result]]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    results = []
    for cfg in PRESETS[name]:
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
        log.info("running %s", cfg.label)
        results.append(run_experiment(cfg, Path(out) / name))
    statuses = [r.status for r in results]
    status = EXIT_INVARIANT if EXIT_INVARIANT in statuses else max(statuses, default=EXIT_OK)
    return status, results
