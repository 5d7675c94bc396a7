"""Command-line driver.

Four modes, all reading one JSON config validated against a strict schema:

  sample                stage the partition estimates, run a long tempering
                        chain, write samples plus run metadata
  verify-decomposition  random finite instances of the decomposition bounds
  verify-divergences    closed-form vs quadrature divergences and the
                        analytic sandwich/envelope checks
  baseline-compare      tempering vs plain Langevin at an equal gradient
                        budget on a multimodal target

Exit codes: 0 all checks passed, 1 a check failed (the failing report path
is printed), 2 usage or config/schema errors.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import divergences as dv
from .decomposition import (
    random_simple_instance,
    random_tempering_instance,
    verify_simple_decomposition,
    verify_tempering_decomposition,
)
from .diagnostics import empirical_tv, integrated_autocorr, mode_masses
from .fixtures import (
    Fixture,
    FixtureError,
    fixture_summaries,
    get_fixture,
    target_from_dict,
)
from .oracles import MixtureOracle
from .ladder import ScheduleConstants, build_ladder_gaussian
from .sampler import RngStream, run_main, run_plain_langevin, run_stlmc

__all__ = ["main"]


class ConfigError(ValueError):
    """Config is schema-valid but semantically unusable for this mode."""


def _config_schema() -> dict:
    text = resources.files("temperlab.data").joinpath("config.schema.json").read_text()
    return json.loads(text)


def _load_config(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    jsonschema.validate(doc, _config_schema())
    return doc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _write_samples_csv(path: Path, X: np.ndarray) -> None:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    d = X.shape[1] if X.size else 1
    with open(path, "w") as fh:
        fh.write(",".join(f"x{i}" for i in range(d)) + "\n")
        for row in X:
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def _write_manifest(out_dir: Path, mode: str, config: dict, files: list) -> Path:
    entries = []
    for name in sorted(files):
        data = (out_dir / name).read_bytes()
        entries.append(
            {
                "path": name,
                "sha256": hashlib.sha256(data).hexdigest(),
                "bytes": len(data),
            }
        )
    digest_src = json.dumps(
        [[e["path"], e["sha256"]] for e in entries], sort_keys=True
    ).encode()
    manifest = {
        "version": 1,
        "mode": mode,
        "config": _jsonable(config),
        "files": entries,
        "digest": hashlib.sha256(digest_src).hexdigest(),
        # informational only; the digest above ignores it on purpose
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = out_dir / "manifest.json"
    _write_json(path, manifest)
    return path


def _fixture_from_config(config: dict) -> Fixture:
    doc = config.get("fixture")
    if doc is None:
        raise ConfigError("this mode needs a 'fixture' entry in the config")
    if isinstance(doc, str):
        try:
            return get_fixture(doc)
        except FixtureError as e:
            raise ConfigError(str(e)) from None
    try:
        target = target_from_dict(doc)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"fixture/{where}: {e.message}") from None
    return Fixture(
        name=doc.get("name", "inline"),
        description=doc.get("description", "inline fixture"),
        kind="mixture",
        dim=target.dim,
        oracle=MixtureOracle(target),
        target=target,
        D=target.scale_bound(),
        w_min=target.w_min,
    )


def _schedule_constants(config: dict) -> ScheduleConstants:
    return ScheduleConstants(**config.get("schedule", {}))


def _ladder_for(fixture: Fixture, config: dict):
    constants = _schedule_constants(config)
    eps = config.get("target_accuracy", 0.1)
    if fixture.target is not None and fixture.target.base.kind == "isotropic-gaussian":
        sigma = fixture.target.base.sigma
    else:
        sigma = 1.0
    ladder, params = build_ladder_gaussian(
        dim=fixture.dim,
        D=max(fixture.D, sigma),
        sigma=sigma,
        w_min=fixture.w_min,
        target_accuracy=eps,
        constants=constants,
    )
    ov = config.get("overrides", {})
    if ov:
        params = replace(
            params,
            swap_rate=ov.get("swap_rate", params.swap_rate),
            step_size=ov.get("step_size", params.step_size),
            total_time=ov.get("total_time", params.total_time),
            init_std=ov.get("init_std", params.init_std),
        )
    return ladder, params


# ---------------------------------------------------------------------------
# sample


def _mode_sample(config: dict, out_dir: Path) -> bool:
    fixture = _fixture_from_config(config)
    ladder, params = _ladder_for(fixture, config)
    sample_cfg = config.get("sample", {})
    thin = sample_cfg.get("thin", 10)
    confidence = sample_cfg.get("confidence", 0.05)
    rng = RngStream(config["seed"])

    staged = run_main(
        fixture.oracle, ladder, params, rng, confidence=confidence, num_final_samples=1
    )
    full = ladder.with_partition_estimates(staged.zhat)
    main_time = sample_cfg.get("main_time", params.total_time)
    long_params = replace(params, total_time=main_time)
    rec = run_stlmc(fixture.oracle, full, long_params, rng, thin=thin)
    samples = rec.positions_at_level(ladder.num_levels)

    _write_samples_csv(out_dir / "samples.csv", samples)
    run_doc = {
        "mode": "sample",
        "seed": config["seed"],
        "fixture": fixture.name,
        "betas": ladder.betas,
        "zhat": staged.zhat,
        "params": {
            "swap_rate": long_params.swap_rate,
            "step_size": long_params.step_size,
            "total_time": long_params.total_time,
            "init_std": long_params.init_std,
            "target_accuracy": long_params.target_accuracy,
        },
        "stages": [
            {
                "levels": s.num_levels,
                "samples_kept": s.samples_kept,
                "runs_attempted": s.runs_attempted,
                "runs_accepted": s.runs_accepted,
                "ratio": s.ratio,
                "zhat_next": s.zhat_next,
            }
            for s in staged.stage_stats
        ],
    }
    _write_json(out_dir / "run.json", run_doc)

    metrics = {
        "num_samples": int(samples.shape[0]),
        "total_steps": rec.total_steps,
        "level_occupancy": rec.level_occupancy(),
        "swap": {
            "attempts": rec.swap_stats.attempts,
            "accepts": rec.swap_stats.accepts,
            "out_of_bounds": rec.swap_stats.out_of_bounds,
        },
    }
    target = fixture.target
    if target is not None and target.dim == 1 and samples.shape[0] >= 1:
        tv, _ = empirical_tv(samples, target)
        metrics["tv"] = tv
        if target.m >= 2:
            try:
                metrics["mode_masses"] = mode_masses(samples, target)
            except ValueError:
                pass
    if samples.shape[0] >= 4:
        ac = integrated_autocorr(samples[:, 0])
        metrics["autocorr"] = {
            "tau_int": ac.tau_int,
            "ess": ac.ess,
            "lag": ac.lag,
            "degenerate": ac.degenerate,
        }
    _write_json(out_dir / "metrics.json", metrics)
    _write_manifest(out_dir, "sample", config, ["samples.csv", "run.json", "metrics.json"])
    print(f"wrote {out_dir}/samples.csv ({samples.shape[0]} samples)")
    return True


# ---------------------------------------------------------------------------
# verify-decomposition


def _simple_worker(args):
    seed_seq, tol = args
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    inst = random_simple_instance(rng)
    return [r.to_dict() for r in verify_simple_decomposition(inst, tol=tol)]


def _tempering_worker(args):
    seed_seq, tol = args
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    inst = random_tempering_instance(rng)
    return [verify_tempering_decomposition(inst, tol=tol).to_dict()]


def _mode_verify_decomposition(config: dict, out_dir: Path, jobs: int) -> bool:
    v = config.get("verify", {})
    ns = v.get("num_simple", 20)
    nt = v.get("num_tempering", 10)
    tol = v.get("bound_tolerance", 1e-6)
    root = np.random.SeedSequence(config["seed"])
    children = root.spawn(ns + nt)
    simple_args = [(s, tol) for s in children[:ns]]
    temper_args = [(s, tol) for s in children[ns:]]

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            simple_out = list(pool.map(_simple_worker, simple_args))
            temper_out = list(pool.map(_tempering_worker, temper_args))
    else:
        simple_out = [_simple_worker(a) for a in simple_args]
        temper_out = [_tempering_worker(a) for a in temper_args]

    files = []
    rows = []
    for i, reports in enumerate(simple_out + temper_out):
        kind = "simple" if i < ns else "tempering"
        j = i if i < ns else i - ns
        name = f"{kind}_{j:03d}.json"
        _write_json(out_dir / name, reports)
        files.append(name)
        rows.extend(reports)

    csv_path = out_dir / "decomposition_summary.csv"
    cols = ["theorem", "instance_hash", "C", "C_bar", "C_star", "bound", "slack", "passed"]
    with open(csv_path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            cells = []
            for c in cols:
                val = r[c]
                cells.append("%.17g" % val if isinstance(val, float) else str(val))
            fh.write(",".join(cells) + "\n")
    files.append("decomposition_summary.csv")
    _write_manifest(out_dir, "verify-decomposition", config, files)

    failed = [r for r in rows if not r["passed"]]
    print(
        f"decomposition: {len(rows) - len(failed)}/{len(rows)} bounds hold "
        f"({ns} simple + {nt} tempering instances)"
    )
    if failed:
        print(f"FAIL: see {csv_path}")
        return False
    return True


# ---------------------------------------------------------------------------
# verify-divergences


def _gaussian_pair_cases(rng: np.random.Generator, count: int, rel_tol: float) -> dict:
    """Closed-form Gaussian chi-squared against quadrature, `count` pairs."""
    worst = 0.0
    cases = []
    # pinned reference pair first: chi^2(N(1,1) || N(0,1)) = e - 1
    forced = dv.chi2_gaussian([1.0], [[1.0]], [0.0], [[1.0]])
    expected = math.e - 1.0
    forced_ok = abs(forced - expected) <= 1e-12 * expected
    for k in range(count):
        d = 1 if k % 3 else 2
        mq = rng.uniform(-3.0, 3.0, d)
        mp = rng.uniform(-3.0, 3.0, d)
        sp = rng.uniform(0.7, 1.4, d)
        sq = sp * rng.uniform(0.8, 1.25, d)
        closed = dv.chi2_gaussian(mq, np.diag(sq**2), mp, np.diag(sp**2))
        # cover the pair and the q^2/p product Gaussian
        a = 2.0 / sq**2 - 1.0 / sp**2
        b = 2.0 * mq / sq**2 - mp / sp**2
        means = np.vstack([mq, mp, b / a])
        spreads = np.concatenate([[float(sq.max())], [float(sp.max())], [float((1.0 / np.sqrt(a)).max())]])
        grid = dv.QuadratureGrid.for_gaussians(
            means, spreads, nodes_per_axis=640 if d == 1 else 192
        )

        def gauss(mean, sig):
            def f(x):
                pts = np.atleast_2d(np.asarray(x, dtype=float).reshape(-1, d))
                z = (pts - mean[None, :]) / sig[None, :]
                lognorm = np.sum(np.log(sig)) + 0.5 * d * math.log(2.0 * math.pi)
                return np.exp(-0.5 * np.sum(z**2, axis=1) - lognorm)

            return f

        numeric = dv.chi2_numeric(gauss(mq, sq), gauss(mp, sp), grid)
        rel = abs(numeric - closed) / max(closed, 1e-12)
        worst = max(worst, rel)
        cases.append({"dim": d, "closed": closed, "numeric": numeric, "rel_err": rel})
    passed = forced_ok and worst <= rel_tol
    return {
        "check": "chi2-closed-vs-quadrature",
        "num_cases": count + 1,
        "forced_value": forced,
        "forced_expected": expected,
        "forced_ok": forced_ok,
        "worst_rel_err": worst,
        "tolerance": rel_tol,
        "passed": passed,
        "cases": cases,
    }


def _mode_verify_divergences(config: dict, out_dir: Path) -> bool:
    v = config.get("verify", {})
    count = v.get("num_gaussian_pairs", 50)
    rel_tol = v.get("tolerance_rel", 1e-5)
    num_probes = v.get("num_probes", 10000)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config["seed"])))

    checks = [_gaussian_pair_cases(rng, count, rel_tol)]

    betas = np.linspace(0.05, 1.0, 12)
    for name in ("single-gaussian", "two-mode-symmetric", "two-mode-asymmetric", "simplex-centers"):
        fx = get_fixture(name)
        t = fx.target
        spread = fx.D + 3.0 * t.base.sigma_equiv
        pts = np.vstack(
            [rng.normal(0.0, spread, (num_probes, t.dim)), t.centers]
        )
        rep = dv.check_temp_scaling_bounds(t, betas, pts)
        rep.details["fixture"] = name
        checks.append(rep.to_dict())

    for name in ("single-gaussian", "two-mode-symmetric", "two-mode-asymmetric"):
        fx = get_fixture(name)
        t = fx.target
        grid = dv.QuadratureGrid.for_gaussians(
            t.centers, t.base.sigma, nodes_per_axis=512, span=10.0
        )
        for alpha, beta in ((0.1, 0.5), (0.2, 1.0), (0.5, 1.0), (0.9, 1.0)):
            rep = dv.check_partition_ratio_bound(t, alpha, beta, grid)
            rep.details["fixture"] = name
            checks.append(rep.to_dict())

    for _ in range(5):
        means_p = rng.uniform(-2.0, 2.0, 2)
        means_q = rng.uniform(-2.0, 2.0, 2)
        sig_p = rng.uniform(0.7, 1.3, 2)
        sig_q = rng.uniform(0.7, 1.3, 2)
        wp = rng.uniform(0.2, 0.8)
        wq = rng.uniform(0.2, 0.8)
        grid = dv.QuadratureGrid.for_gaussians(
            np.concatenate([means_p, means_q]).reshape(-1, 1),
            float(max(sig_p.max(), sig_q.max())),
            nodes_per_axis=512,
        )

        def g1(mean, sig):
            def f(x):
                z = (np.asarray(x, dtype=float).reshape(-1) - mean) / sig
                return np.exp(-0.5 * z**2) / (sig * math.sqrt(2.0 * math.pi))

            return f

        rep = dv.kl_mixture_upper_bound_check(
            [wp, 1.0 - wp],
            [g1(means_p[0], sig_p[0]), g1(means_p[1], sig_p[1])],
            [wq, 1.0 - wq],
            [g1(means_q[0], sig_q[0]), g1(means_q[1], sig_q[1])],
            grid,
        )
        checks.append(rep.to_dict())

    passed = all(c["passed"] for c in checks)
    report_path = out_dir / "divergences_report.json"
    _write_json(report_path, {"checks": checks, "passed": passed})
    _write_manifest(out_dir, "verify-divergences", config, ["divergences_report.json"])
    print(f"divergences: {sum(c['passed'] for c in checks)}/{len(checks)} checks passed")
    if not passed:
        print(f"FAIL: see {report_path}")
    return passed


# ---------------------------------------------------------------------------
# baseline-compare


def _mode_baseline_compare(config: dict, out_dir: Path) -> bool:
    fixture = _fixture_from_config(config)
    target = fixture.target
    if target is None or target.dim != 1 or target.m < 2:
        raise ConfigError("baseline-compare needs a 1-d mixture fixture with >= 2 modes")
    ladder, params = _ladder_for(fixture, config)
    b = config.get("baseline", {})
    thin = b.get("thin", 1)
    rng = RngStream(config["seed"])

    staged = run_main(fixture.oracle, ladder, params, rng, num_final_samples=1)
    full = ladder.with_partition_estimates(staged.zhat)
    long_params = replace(params, total_time=b.get("main_time", params.total_time))
    rec = run_stlmc(fixture.oracle, full, long_params, rng, thin=thin)
    samples = rec.positions_at_level(ladder.num_levels)

    start_idx = b.get("start_center", target.m - 1)
    if start_idx >= target.m:
        raise ConfigError(f"start_center must index one of the {target.m} centers")
    x0 = target.centers[start_idx]
    base_rec = run_plain_langevin(
        fixture.oracle,
        1.0,
        long_params.step_size,
        max(rec.total_steps, 1),
        x0,
        rng,
        thin=thin,
    )
    plain = base_rec.positions[1:]

    tv_t, _ = empirical_tv(samples, target)
    tv_p, _ = empirical_tv(plain, target)
    masses_t = mode_masses(samples, target)
    masses_p = mode_masses(plain, target)
    metrics = {
        "tempering": {
            "num_samples": int(samples.shape[0]),
            "mode_masses": masses_t,
            "tv": tv_t,
        },
        "langevin": {
            "num_samples": int(plain.shape[0]),
            "mode_masses": masses_p,
            "tv": tv_p,
            "minority_mass": float(masses_p.min()),
            "start_center": int(start_idx),
        },
        "budget": {
            "tempering_steps": rec.total_steps,
            "langevin_steps": max(rec.total_steps, 1),
        },
    }
    balanced = bool(np.all(masses_t >= 0.40) and np.all(masses_t <= 0.60)) if target.m == 2 else True
    passed = balanced and tv_t < 0.10 and float(masses_p.min()) <= 0.01
    metrics["passed"] = passed
    path = out_dir / "baseline_metrics.json"
    _write_json(path, metrics)
    _write_manifest(out_dir, "baseline-compare", config, ["baseline_metrics.json"])
    print(
        f"baseline: tempering tv={tv_t:.4f} masses={np.round(masses_t, 3)}; "
        f"langevin tv={tv_p:.4f} minority={masses_p.min():.4f}"
    )
    if not passed:
        print(f"FAIL: see {path}")
    return passed


# ---------------------------------------------------------------------------


def _print_fixtures() -> None:
    rows = fixture_summaries()
    print(f"{'name':<26} {'dim':>3} {'m':>2} {'D':>8}  kind         description")
    for name, dim, m, D, kind, desc in rows:
        print(f"{name:<26} {dim:>3} {m:>2} {D:>8.3f}  {kind:<12} {desc}")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="temperlab",
        description="simulated-tempering Langevin sampling and its bound checks",
    )
    p.add_argument("--config", help="path to a JSON run configuration")
    p.add_argument(
        "--mode",
        choices=["sample", "verify-decomposition", "verify-divergences", "baseline-compare"],
        help="what to run",
    )
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output directory (default: artifacts)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for verification")
    p.add_argument(
        "--list-fixtures", action="store_true", help="print built-in fixtures and exit"
    )
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.list_fixtures:
        _print_fixtures()
        return 0
    if not args.config or not args.mode:
        parser.error("--config and --mode are required (or use --list-fixtures)")
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")

    try:
        config = _load_config(args.config)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        print(f"config error: {where}: {e.message}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        config["seed"] = args.seed

    out_dir = Path(args.out or "artifacts")
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        if args.mode == "sample":
            ok = _mode_sample(config, out_dir)
        elif args.mode == "verify-decomposition":
            ok = _mode_verify_decomposition(config, out_dir, args.jobs)
        elif args.mode == "verify-divergences":
            ok = _mode_verify_divergences(config, out_dir)
        else:
            ok = _mode_baseline_compare(config, out_dir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
