"""Command-line front end.

Usage::

    brwlevel classify --config run.toml
    brwlevel rate     --config run.toml --out results/
    brwlevel simulate --config run.toml --seed 7 --oracle-check
    brwlevel pmf      --config run.toml

Config grammar (TOML, comments allowed)::

    [model.offspring]
    probs = { "1" = 0.5, "2" = 0.5 }    # or: zeta_beta = 2.0
    [model.step]
    kind = "normal"                     # normal | rademacher | two_point | uniform | lattice | tilted
    sigma = 1.0
    [query]
    x = 1.0
    a = 0.2
    n = 10                              # simulate / pmf
    replicates = 100000                 # simulate
    seed = 1                            # simulate
    [rate]
    x_min = 0.0
    x_max = 2.0
    x_step = 0.1
    [simulate]
    max_particles = 10000000
    per_replicate_csv = false

Exit codes: 0 success, 2 config error, 3 regime mismatch, 4 population cap breach.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .cgf import classify_cgf
from .deviation import (
    Regime,
    classify_regime,
    ratio_infimum,
    result_to_dict,
    pareto_bounds,
    solve,
)
from .errors import AssumptionViolated, BRWError, ConfigError, TooLarge, WrongRegime
from .model import CheckedModel, Normal, offspring_from_dict, step_from_dict, validate_model
from .rate import rate_I, speed_xstar

EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_CAP = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


@dataclass
class QueryConfig:
    x: float
    a: float
    n: int | None = None
    replicates: int | None = None
    seed: int | None = None


@dataclass
class RateOptions:
    x_min: float = 0.0
    x_max: float = 2.0
    x_step: float = 0.1

    def grid(self) -> list[float]:
        count = int(math.floor((self.x_max - self.x_min) / self.x_step + 1e-9)) + 1
        return [round(self.x_min + i * self.x_step, 12) for i in range(count)]


@dataclass
class SimulateOptions:
    max_particles: int = 10_000_000
    per_replicate_csv: bool = False


@dataclass
class RunConfig:
    model: dict
    query: QueryConfig
    rate: RateOptions = field(default_factory=RateOptions)
    simulate: SimulateOptions = field(default_factory=SimulateOptions)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        model = raw.get("model")
        if not isinstance(model, dict):
            raise ConfigError("model", "missing section")
        for part in ("offspring", "step"):
            if not isinstance(model.get(part), dict):
                raise ConfigError(f"model.{part}", "missing section")
        q = raw.get("query")
        if not isinstance(q, dict):
            raise ConfigError("query", "missing section")
        query = QueryConfig(
            x=_number(q, "x", "query", float, required=True),
            a=_number(q, "a", "query", float, required=True),
            n=_number(q, "n", "query", int),
            replicates=_number(q, "replicates", "query", int),
            seed=_number(q, "seed", "query", int),
        )
        r = raw.get("rate") or {}
        rate = RateOptions(**{k: _number(r, k, "rate", float) for k in r})
        s = raw.get("simulate") or {}
        sim = SimulateOptions(
            max_particles=_number(s, "max_particles", "simulate", int) or SimulateOptions.max_particles,
            per_replicate_csv=bool(s.get("per_replicate_csv", False)),
        )
        unknown = set(r) - {"x_min", "x_max", "x_step"}
        if unknown:
            raise ConfigError(f"rate.{sorted(unknown)[0]}", "unknown option")
        if rate.x_step <= 0:
            raise ConfigError("rate.x_step", "must be positive")
        return cls(model={"offspring": dict(model["offspring"]), "step": dict(model["step"])},
                   query=query, rate=rate, simulate=sim)


def _number(section: dict, key: str, prefix: str, kind, required: bool = False):
    if section.get(key) is None:
        if required:
            raise ConfigError(f"{prefix}.{key}", "required field is missing")
        return None
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{prefix}.{key}", f"expected a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"{prefix}.{key}", f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), str(exc)) from None
    except OSError as exc:
        raise ConfigError(str(path), exc.strerror or str(exc)) from None
    return RunConfig.from_dict(raw)


def build_model(cfg: RunConfig) -> CheckedModel:
    try:
        off = offspring_from_dict(cfg.model["offspring"])
        step = step_from_dict(cfg.model["step"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError("model", str(exc)) from None
    return validate_model(off, step)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _clean(v):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(v, float):
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if hasattr(v, "item"):
        return _clean(v.item())
    if isinstance(v, Regime):
        return v.value
    return v


def _envelope(cfg: RunConfig, command: str, body: dict) -> dict:
    return {"version": __version__, "command": command, "config": cfg.to_dict(), **body}


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return "" if v is None else str(v)


def _write_csv(path: Path, cfg: RunConfig, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    buf.write(f"# version: {__version__}\n")
    buf.write(f"# config: {json.dumps(_clean(cfg.to_dict()), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_classify(cfg: RunConfig, out: Path) -> int:
    model = build_model(cfg)
    q = cfg.query
    regime = classify_regime(model, q.a, q.x)
    prof = classify_cgf(model.step)
    diag = {"inf_ratio": None, "argmin_s": None}
    if regime not in (Regime.A_GE_LOGM, Regime.THM1_L_INF):
        diag["inf_ratio"], diag["argmin_s"] = ratio_infimum(model, q.a, q.x)
    body = {
        "regime": regime.value,
        "x_star": speed_xstar(model),
        "L": model.L,
        "lambda_star": prof.lambda_star,
        "case": prof.case,
        "T": prof.T,
        "mass_at_L": prof.mass_at_L,
        "m": model.m,
        "b": model.b,
        **diag,
    }
    _write_json(out / "regime.json", _envelope(cfg, "classify", body))
    return EXIT_OK


DEV_HEADER = [
    "a", "x", "regime", "kind", "I_ax", "s_star", "y_star", "closed_form",
    "c_star", "lower_exponent", "upper_exponent", "lower_rate", "upper_rate", "note",
]


def _deviation_row(model: CheckedModel, a: float, x: float) -> tuple[dict, bool]:
    """One deviation record and whether it is a regime mismatch."""
    row = dict.fromkeys(DEV_HEADER)
    row.update(a=a, x=x)
    if model.offspring.is_zeta:
        if not (isinstance(model.step, Normal) and model.step.sigma == 1.0):
            row.update(kind="MISMATCH", note="Pareto bounds need N(0,1) steps")
            return row, True
        pb = pareto_bounds(model.m, model.offspring.zeta_beta, a, x)
        row.update(kind=pb.kind, lower_rate=pb.lower_rate, upper_rate=pb.upper_rate)
        return row, False
    res = solve(model, a, x)
    d = result_to_dict(res)
    row.update(regime=d.get("regime"), kind=res.kind)
    if res.kind == "EXPONENTIAL":
        row.update(I_ax=res.I_ax, s_star=res.s_star, y_star=res.y_star,
                   closed_form=res.diagnostics.get("closed_form"))
    elif res.kind == "DOUBLE_EXP":
        row.update(c_star=res.diagnostics.get("c_star"), lower_exponent=res.lower_exponent,
                   upper_exponent=res.upper_exponent)
    else:
        row.update(note=res.reason)
        return row, True
    return row, False


def cmd_rate(cfg: RunConfig, out: Path, fmt: str = "csv") -> int:
    model = build_model(cfg)
    q = cfg.query
    xs = cfg.rate.grid()
    rate_rows = [[x, rate_I(model.step, x)] for x in xs]
    dev, mismatch = _deviation_row(model, q.a, q.x)
    if fmt == "json":
        body = {
            "rates": [{"x": x, "I": i} for x, i in rate_rows],
            "deviation": dev,
        }
        _write_json(out / "rates.json", _envelope(cfg, "rate", body))
    else:
        _write_csv(out / "rates.csv", cfg, ["x", "I"], rate_rows)
        _write_csv(out / "deviation_rates.csv", cfg, DEV_HEADER, [[dev[k] for k in DEV_HEADER]])
    if mismatch:
        print(f"regime mismatch: {dev.get('note')}", file=sys.stderr)
        return EXIT_REGIME
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: Path, fmt: str = "json", oracle_check: bool = False) -> int:
    from .sim import estimate_upper_dev

    q = cfg.query
    for name in ("n", "replicates", "seed"):
        if getattr(q, name) is None:
            raise ConfigError(f"query.{name}", "required for simulate")
    if q.replicates < 1:
        raise ConfigError("query.replicates", "must be >= 1")
    if q.n < 0:
        raise ConfigError("query.n", "must be >= 0")
    model = build_model(cfg)
    est = estimate_upper_dev(
        model, q.a, q.x, q.n, q.replicates, q.seed,
        max_particles=cfg.simulate.max_particles, keep_replicates=cfg.simulate.per_replicate_csv,
    )
    body = {"estimate": est.to_dict()}
    if oracle_check:
        body["oracle"] = _oracle_report(model, q, est)
    if fmt == "csv":
        flat = est.to_dict()
        keys = sorted(flat)
        _write_csv(out / "estimate.csv", cfg, keys, [[_csv_cell(flat[k]) for k in keys]])
    else:
        _write_json(out / "estimate.json", _envelope(cfg, "simulate", body))
    if est.per_replicate is not None:
        cols = list(est.per_replicate)
        rows = zip(*(est.per_replicate[c].tolist() for c in cols))
        _write_csv(out / "replicates.csv", cfg, cols, [list(r) for r in rows])
    if est.cap_warning:
        print(f"population cap breached in {est.capped} replicates", file=sys.stderr)
        return EXIT_CAP
    return EXIT_OK


def _csv_cell(v):
    return json.dumps(v) if isinstance(v, (list, tuple)) else v


def _oracle_report(model: CheckedModel, q: QueryConfig, est) -> dict:
    from .oracle import exact_upper_dev

    try:
        exact = float(exact_upper_dev(model, q.a, q.x, q.n))
    except (TypeError, TooLarge) as exc:
        raise ConfigError("--oracle-check", f"not available for this model: {exc}") from None
    sigma = math.sqrt(exact * (1 - exact) / est.replicates)
    diff = abs(est.p_hat - exact)
    return {
        "exact": exact,
        "abs_diff": diff,
        "sigma": sigma,
        "sigma_distance": diff / sigma if sigma > 0 else (0.0 if diff == 0 else math.inf),
    }


def cmd_pmf(cfg: RunConfig, out: Path) -> int:
    from .oracle import exact_level_dist
    from .sim import level_for

    q = cfg.query
    if q.n is None:
        raise ConfigError("query.n", "required for pmf")
    model = build_model(cfg)
    try:
        dist = exact_level_dist(model, q.n, level_for(q.x, q.n))
    except (TypeError, TooLarge) as exc:
        raise ConfigError("model", str(exc)) from None
    rows = [[k, float(p)] for k, p in enumerate(dist.pmf)]
    _write_csv(out / "pmf.csv", cfg, ["count", "probability"], rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="brwlevel", description="Level-set deviations of branching random walks")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("classify", "write regime.json"),
        ("rate", "write rates.csv and deviation_rates.csv"),
        ("simulate", "write estimate.json"),
        ("pmf", "write pmf.csv (lattice models only)"),
    ]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--seed", type=int, help="overrides query.seed")
        s.add_argument("--out", type=Path, default=Path("."))
        s.add_argument("--format", choices=("json", "csv"), default=None)
        s.add_argument("--oracle-check", action="store_true", help="compare with the exact law (lattice only)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed", "must be an unsigned 64-bit integer")
            cfg.query.seed = args.seed
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "classify":
            return cmd_classify(cfg, args.out)
        if args.command == "rate":
            return cmd_rate(cfg, args.out, args.format or "csv")
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.format or "json", args.oracle_check)
        return cmd_pmf(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolated as exc:
        print(f"config error: model violates {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WrongRegime as exc:
        print(f"regime mismatch: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (ValueError, BRWError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
