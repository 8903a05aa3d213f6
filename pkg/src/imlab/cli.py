"""Command-line front end.

Examples::

    imlab rei --state plus-i
    imlab regularize --state plus-i --n-max 3
    imlab threshold --state plus-i --n 4 --epsilon 0.05 --trials 32 --seed 42 --ensemble real-pauli
    imlab verify --suite all --samples 1000 --dims 2,3,4 --seed 7 --output reports.json

Exit codes: 0 success, 1 a verification suite recorded violations, 2 bad
configuration, 3 resource limit exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigError, ImlabError, InvalidStateError, ResourceLimitError, ShapeError
from .imaginarity import rei, rei_sequence
from .matcore import Seed, dim_cap, load_matrix, random_density, validate_state
from .protocols import (
    ENSEMBLE_KINDS,
    _resolve_kind,
    exhaustive_threshold,
    qubit_z_twirl,
    results_to_csv,
    sampled_twirl,
    threshold_rate,
)
from .typicality import typical_projector, typical_report_csv
from .verify import CHERNOFF_GENERATORS, SUITES, chernoff_experiment, converse_chain, run_suite

log = logging.getLogger("imlab")

COMMANDS = ("rei", "regularize", "twirl", "threshold", "typical", "verify", "chernoff", "converse")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3

PLUS_I = np.array([[0.5, -0.5j], [0.5j, 0.5]])


@dataclass
class ExperimentConfig:
    command: str
    state: str = "plus-i"
    n: int = 1
    n_max: int = 3
    delta: float = 0.1
    epsilon: float = 0.05
    trials: int = 32
    quantile: float = 0.5
    N: int = 1
    ensemble: str = "real-pauli"
    exhaustive: bool = False
    max_N: int = 4096
    suite: str = "all"
    samples: int = 1000
    dims: tuple = (2, 3, 4, 5, 6)
    d: int = 2
    generator: str = "projector"
    seed: int = 0
    output: Optional[str] = None
    format: str = "csv"
    rho: Optional[np.ndarray] = field(default=None, repr=False)

    def echo(self) -> dict:
        out = asdict(self)
        out.pop("rho")
        out["dims"] = list(self.dims)
        return out


def parse_state(source: str, problems: list) -> Optional[np.ndarray]:
    """Builtin name (plus-i, maximally-mixed(d), diag(p...), random(d, seed)) or JSON file."""
    s = source.strip()
    try:
        if s == "plus-i":
            return PLUS_I.copy()
        m = re.fullmatch(r"maximally-mixed\((\d+)\)", s)
        if m:
            d = int(m.group(1))
            if d < 1:
                raise ConfigError("state: maximally-mixed dimension must be positive")
            return np.eye(d, dtype=complex) / d
        m = re.fullmatch(r"diag\(([^)]*)\)", s)
        if m:
            p = [float(x) for x in m.group(1).split(",")]
            return validate_state(np.diag(p).astype(complex))
        m = re.fullmatch(r"random\((\d+),\s*(\d+)\)", s)
        if m:
            return random_density(int(m.group(1)), Seed(int(m.group(2))))
        if os.path.exists(s):
            return validate_state(load_matrix(s))
        problems.append(f"state: unknown builtin or missing file {s!r}")
    except ShapeError as exc:
        problems.append(f"state ({s}): shape error: {exc}")
    except InvalidStateError as exc:
        problems.append(f"state ({s}): invalid state: {exc}")
    except ConfigError as exc:
        problems.extend(exc.problems)
    except ValueError as exc:
        problems.append(f"state ({s}): {exc}")
    return None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imlab", description="Imaginarity resource-theory laboratory")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON file with option defaults (command-line flags win)")
    p.add_argument("--state")
    p.add_argument("--n", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--quantile", type=float)
    p.add_argument("--N", dest="N", type=int)
    p.add_argument("--ensemble")
    p.add_argument("--exhaustive", action="store_true", default=None)
    p.add_argument("--max-N", dest="max_N", type=int)
    p.add_argument("--suite")
    p.add_argument("--samples", type=int)
    p.add_argument("--dims")
    p.add_argument("--d", type=int)
    p.add_argument("--generator")
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_config(argv) -> ExperimentConfig:
    """Parse and validate; raises ConfigError listing every invalid field."""
    parser = build_parser()
    parser.__class__ = _Parser
    args = vars(parser.parse_args(argv))
    args.pop("verbose")
    problems: list[str] = []
    values = {}
    cfg_path = args.pop("config")
    if cfg_path:
        try:
            with open(cfg_path) as fh:
                values.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            problems.append(f"config: cannot read {cfg_path}: {exc}")
    values.update({k: v for k, v in args.items() if v is not None})
    if isinstance(values.get("dims"), str):
        try:
            values["dims"] = tuple(int(x) for x in values["dims"].split(","))
        except ValueError:
            problems.append(f"dims: expected comma-separated integers, got {values['dims']!r}")
            values.pop("dims")
    elif "dims" in values:
        values["dims"] = tuple(values["dims"])
    known = set(ExperimentConfig.__dataclass_fields__) - {"rho"}
    unknown = set(values) - known
    if unknown:
        problems.append(f"config: unknown fields {sorted(unknown)}")
    cfg = ExperimentConfig(**{k: v for k, v in values.items() if k in known})
    _validate(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def _validate(cfg: ExperimentConfig, problems: list) -> None:
    c = cfg.command
    if c not in COMMANDS:
        problems.append(f"command: unknown {c!r}")
        return
    if not 0 <= cfg.seed < 2**64:
        problems.append("seed: must be a 64-bit unsigned integer")
    if cfg.format not in ("csv", "json"):
        problems.append("format: must be csv or json")
    if c in ("rei", "regularize", "twirl", "threshold", "typical", "converse"):
        cfg.rho = parse_state(cfg.state, problems)
    pos = {"n": cfg.n, "n_max": cfg.n_max, "trials": cfg.trials, "N": cfg.N, "max_N": cfg.max_N,
           "samples": cfg.samples, "d": cfg.d}
    needs = {
        "regularize": ["n_max"],
        "twirl": ["n", "N"],
        "threshold": ["n", "trials", "max_N"],
        "typical": ["n"],
        "verify": ["samples"],
        "chernoff": ["d", "N", "trials"],
        "converse": ["n"],
    }.get(c, [])
    for name in needs:
        if not isinstance(pos[name], int) or pos[name] < 1:
            problems.append(f"{name}: must be a positive integer, got {pos[name]!r}")
    if c in ("typical",) and not cfg.delta > 0:
        problems.append(f"delta: must be positive, got {cfg.delta}")
    if c == "threshold":
        if not 0 < cfg.epsilon < 2:
            problems.append(f"epsilon: must lie in (0, 2), got {cfg.epsilon}")
        if not 0 < cfg.quantile <= 1:
            problems.append(f"quantile: must lie in (0, 1], got {cfg.quantile}")
    if c == "chernoff":
        if not 0 <= cfg.epsilon <= 1:
            problems.append(f"epsilon: must lie in [0, 1], got {cfg.epsilon}")
        if cfg.generator not in CHERNOFF_GENERATORS:
            problems.append(f"generator: must be one of {CHERNOFF_GENERATORS}")
    if c in ("twirl", "threshold", "converse"):
        kinds = ENSEMBLE_KINDS + ("z-twirl",)
        if cfg.ensemble not in kinds:
            problems.append(f"ensemble: must be one of {kinds}")
        elif cfg.rho is not None and cfg.ensemble != "z-twirl":
            try:
                _resolve_kind(cfg.ensemble, cfg.rho.shape[0], max(cfg.n, 1))
            except ResourceLimitError:
                pass  # reported as exit code 3 at run time
            except ImlabError as exc:
                problems.append(f"ensemble: {exc}")
    if c == "verify":
        if cfg.suite != "all" and cfg.suite not in SUITES:
            problems.append(f"suite: must be 'all' or one of {SUITES}")
        if not cfg.dims or any(x < 1 for x in cfg.dims):
            problems.append("dims: must be positive integers")


# ---------------------------------------------------------------------------
# dispatch


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(cfg: ExperimentConfig, header, rows, payload) -> str:
    if cfg.format == "json":
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    return _csv(header, rows)


def _f(x: float) -> str:
    return repr(float(x))


def _cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return _f(v)
    return v


def _run_rei(cfg):
    val = rei(cfg.rho)
    return _emit(cfg, ["state_label", "rei"], [[cfg.state, _f(val)]], {"state_label": cfg.state, "rei": val}), 0


def _run_regularize(cfg):
    seq = rei_sequence(cfg.rho, cfg.n_max, cfg.state)
    if cfg.format == "csv":
        return seq.to_csv(), 0
    return _emit(cfg, None, None, {"state_label": cfg.state,
                                   "values": [{"n": n, "rei": v, "rei_per_copy": p} for n, v, p in seq.values]}), 0


def _ensemble_arg(cfg):
    if cfg.ensemble == "z-twirl":
        if cfg.n != 1 or cfg.rho.shape[0] != 2:
            raise ConfigError("ensemble: z-twirl is a single-qubit ensemble (n = 1, d = 2)")
        return qubit_z_twirl()
    return cfg.ensemble


def _run_twirl(cfg):
    state, dist = sampled_twirl(cfg.rho, cfg.n, cfg.N, _ensemble_arg(cfg), Seed(cfg.seed), cfg.exhaustive)
    header = ["state_label", "n", "N", "ensemble", "exhaustive", "imag_distance", "seed"]
    row = [cfg.state, cfg.n, cfg.N, cfg.ensemble, str(cfg.exhaustive).lower(), _f(dist), cfg.seed]
    return _emit(cfg, header, [row], dict(zip(header, [cfg.state, cfg.n, cfg.N, cfg.ensemble,
                                                        cfg.exhaustive, dist, cfg.seed]))), 0


def _run_threshold(cfg):
    if cfg.exhaustive:
        res = exhaustive_threshold(cfg.rho, cfg.n, cfg.epsilon, pool=_ensemble_arg(cfg), label=cfg.state)
    else:
        res = threshold_rate(cfg.rho, cfg.n, cfg.epsilon, _ensemble_arg(cfg), cfg.trials, cfg.quantile,
                             Seed(cfg.seed), cfg.max_N, cfg.state)
    if cfg.format == "csv":
        return results_to_csv([res]), 0
    payload = dict(zip(res.CSV_FIELDS, [res.state_label, res.n, res.epsilon, res.trials, res.quantile,
                                        res.N_star, res.rate, res.saturated, res.seed.master_seed]))
    payload.update(mode=res.mode, distance=res.distance)
    return _emit(cfg, None, None, payload), 0


def _run_typical(cfg):
    tp = typical_projector(cfg.rho, cfg.n, cfg.delta)
    if cfg.format == "csv":
        return typical_report_csv([tp]), 0
    payload = dict(zip(tp.CSV_FIELDS, [tp.eigenbasis.shape[0], tp.n, tp.delta, tp.D, tp.mu, tp.dim_bound,
                                       tp.op_bound_ok, tp.pi_real]))
    payload["op_bound_slack"] = tp.op_bound_slack
    return _emit(cfg, None, None, payload), 0


def _run_verify(cfg, manifest):
    names = SUITES if cfg.suite == "all" else (cfg.suite,)
    reports = [run_suite(name, cfg.samples, cfg.dims, Seed(cfg.seed)) for name in names]
    manifest["runtime_ms"] = {r.lemma_id: r.runtime_ms for r in reports}
    code = EXIT_OK if all(r.passed for r in reports) else EXIT_VIOLATION
    if cfg.format == "csv":
        header = ["lemma_id", "samples", "violations", "worst_margin", "seed"]
        rows = [[r.lemma_id, r.samples, r.violations, _f(r.worst_margin), r.seed] for r in reports]
        return _csv(header, rows), code
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n", code


def _run_chernoff(cfg):
    rep = chernoff_experiment(cfg.d, cfg.N, cfg.trials, cfg.epsilon, cfg.generator, Seed(cfg.seed))
    payload = rep.to_dict()
    code = EXIT_OK if rep.ok else EXIT_VIOLATION
    if cfg.format == "csv":
        keys = sorted(payload)
        return _csv(keys, [[_cell(payload[k]) for k in keys]]), code
    return json.dumps(payload, indent=2, sort_keys=True) + "\n", code


def _run_converse(cfg):
    ens = _resolve_kind(_ensemble_arg(cfg), cfg.rho.shape[0], cfg.n) if cfg.ensemble != "z-twirl" \
        else qubit_z_twirl()
    rep = converse_chain(cfg.rho, ens, cfg.n)
    code = EXIT_OK if rep["ok"] else EXIT_VIOLATION
    if cfg.format == "csv":
        flat = {k: v for k, v in rep.items() if k != "margins"}
        flat.update({f"margin_{k}": v for k, v in rep["margins"].items()})
        keys = list(flat)
        return _csv(keys, [[_cell(v) for v in flat.values()]]), code
    return json.dumps(rep, indent=2, sort_keys=True) + "\n", code


def run(cfg: ExperimentConfig) -> int:
    """Dispatch, write output and manifest, return the exit code."""
    manifest = {"config": cfg.echo(), "version": __version__, "dim_cap": dim_cap(),
                "seeds": {"master_seed": cfg.seed}}
    t0 = time.perf_counter()
    log.debug("dispatching %s with seed %d", cfg.command, cfg.seed)
    try:
        if cfg.command == "verify":
            text, code = _run_verify(cfg, manifest)
        else:
            text, code = {
                "rei": _run_rei,
                "regularize": _run_regularize,
                "twirl": _run_twirl,
                "threshold": _run_threshold,
                "typical": _run_typical,
                "chernoff": _run_chernoff,
                "converse": _run_converse,
            }[cfg.command](cfg)
    except ResourceLimitError as exc:
        print(f"imlab: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"imlab: config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    manifest["wall_time_s"] = time.perf_counter() - t0
    manifest["exit_code"] = code
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
        with open(cfg.output + ".manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    else:
        sys.stdout.write(text)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.DEBUG if ("-v" in argv or "--verbose" in argv) else logging.WARNING)
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"imlab: config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(f"imlab: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
