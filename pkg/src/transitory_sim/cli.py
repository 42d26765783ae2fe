"""``transitory-sim``: sample conditioned renewal rows, compute conditional means,
simulate transitory workloads and run the verification experiments.

Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 on usage
errors (bad flags, missing seed, unreadable or invalid config) and 3 on other
operational errors (refusing to overwrite, sampler gave up).
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import InvalidModel, RandomStream, grid_times, parse_model
from .experiments import ConfigError, ExperimentConfig, run_experiment
from .experiments.engine import EXPERIMENTS, TOLERANCES, worker_count
from .experiments.report import ExperimentReport, canonical_json, config_sha256, csv_text, write_outputs
from .reflection import netput_gamma_n, parse_service, reflect
from .samplers import AcceptanceTooLow, DEFAULT_MAX_ATTEMPTS, conditional_mean_mu_n, sample_conditioned_renewal_rejection
from .stats import mean_and_se

__all__ = ["CliInvocation", "UsageError", "parse_invocation", "execute", "main"]

SUBCOMMANDS = ("sample", "mu", "simulate-workload", "verify", "compare-ht", "report")
STOCHASTIC = frozenset({"sample", "simulate-workload", "verify", "compare-ht"})

# config-file keys and how to parse them; dotted ``model.*``/``service.*`` keys
# assemble a model spec, ``tolerance.<name>`` overrides one tolerance
_SCALARS = {
    "experiment": str, "seed": int, "model": str, "service": str, "T": float, "reps": int,
    "grid": int, "autoscale": lambda s: _parse_bool(s), "max_attempts": int, "paths": int,
    "out": str, "format": str,
}
_LISTS = {"n": int, "theta": float, "t": float}
_MODEL_KEYS = {"family", "rate", "b", "shape", "scale", "spec"}
_SERVICE_KEYS = {"family", "sigma2", "spec"}


class UsageError(Exception):
    """Invalid command line or configuration (exit status 2)."""


@dataclass(frozen=True)
class CliInvocation:
    subcommand: str
    seed: int | None = None
    out: Path | None = None
    format: str | None = None      # None: json files / a bare number for ``mu``
    force: bool = False
    experiment: str = ""
    model: str = ""
    service: str = "exp"
    n: tuple = ()
    T: float = 1.0
    reps: int = 0
    grid: int = 1024
    theta: tuple = ()
    t: tuple = ()
    autoscale: bool = True
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    paths: int = 0
    tolerances: tuple = ()
    config_path: str | None = None

    def echo(self) -> dict:
        """Resolved invocation as recorded in reports (output location excluded)."""
        return {
            "subcommand": self.subcommand, "seed": self.seed, "format": self.format or "json",
            "experiment": self.experiment, "model": self.model or "exp:1", "service": self.service,
            "n": list(self.n), "T": self.T, "reps": self.reps, "grid": self.grid,
            "theta": list(self.theta), "t": list(self.t), "autoscale": self.autoscale,
            "max_attempts": self.max_attempts, "paths": self.paths,
            "tolerances": dict(self.tolerances),
        }

    def experiment_config(self, experiment: str | None = None) -> ExperimentConfig:
        return ExperimentConfig(
            experiment=experiment or self.experiment, seed=self.seed, model=self.model,
            service=self.service, n=self.n, reps=self.reps, grid=self.grid, T=self.T,
            t=self.t, theta=self.theta, autoscale=self.autoscale,
            max_attempts=self.max_attempts, paths=self.paths, tolerances=self.tolerances,
        )


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _model_from_parts(parts: dict) -> str:
    if "spec" in parts:
        return parts["spec"]
    family = parts.get("family", "").lower()
    try:
        if family in ("exponential", "exp"):
            return f"exp:{float(parts.get('rate', 1.0))!r}"
        if family in ("uniform", "unif"):
            return f"unif:{float(parts['b'])!r}"
        if family == "gamma":
            return f"gamma:{float(parts['shape'])!r},{float(parts.get('scale', 1.0))!r}"
    except KeyError as exc:
        raise UsageError(f"model.{exc.args[0]} is required for family {family!r}") from None
    raise UsageError(f"unknown model.family {family!r}")


def _service_from_parts(parts: dict) -> str:
    if "spec" in parts:
        return parts["spec"]
    family = parts.get("family", "").lower()
    if family == "lognormal":
        if "sigma2" not in parts:
            raise UsageError("service.sigma2 is required for the lognormal family")
        return f"lognormal:{parts['sigma2']}"
    return family


def read_config(path: str) -> dict:
    """Parse a flat ``key=value`` file (``#`` comments, dotted section prefixes)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    values: dict = {}
    model: dict = {}
    service: dict = {}
    tolerances: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        where = f"{path}:{lineno}"
        if not sep or not key:
            raise UsageError(f"{where}: expected key=value")
        try:
            if key in _SCALARS:
                values[key] = _SCALARS[key](value)
            elif key in _LISTS:
                values[key] = tuple(_LISTS[key](v) for v in value.split(",") if v.strip())
            elif key.startswith("model.") and key[6:] in _MODEL_KEYS:
                model[key[6:]] = value
            elif key.startswith("service.") and key[8:] in _SERVICE_KEYS:
                service[key[8:]] = value
            elif key.startswith("tolerance.") and key[10:] in TOLERANCES:
                tolerances[key[10:]] = float(value)
            else:
                raise UsageError(f"{where}: unknown key {key!r}")
        except ValueError as exc:
            raise UsageError(f"{where}: bad value for {key}: {exc}") from None
    if model:
        if "model" in values:
            raise UsageError("config sets both model and model.*")
        values["model"] = _model_from_parts(model)
    if service:
        if "service" in values:
            raise UsageError("config sets both service and service.*")
        values["service"] = _service_from_parts(service)
    if tolerances:
        values["tolerances"] = tolerances
    return values


def _tolerance(text: str):
    key, sep, value = text.partition("=")
    if not sep or key not in TOLERANCES:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE with NAME in {sorted(TOLERANCES)}")
    return key, float(value)


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="transitory-sim", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    helps = {
        "sample": "draw conditioned renewal rows by rejection",
        "mu": "conditional mean of one interarrival time given n renewals",
        "simulate-workload": "simulate the transitory-queue workload",
        "verify": "run one verification experiment",
        "compare-ht": "compare with the unconditioned heavy-traffic queue",
        "report": "summarise an existing report.json",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="flat key=value config file; flags override it")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("json", "csv"))
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        if name == "report":
            continue
        p.add_argument("--model", help="exp:RATE | unif:B | gamma:K,S | steps:... | rate:...")
        p.add_argument("--n", type=_csv_list(int), action="extend", help="conditioning count(s)")
        p.add_argument("--T", type=float, help="horizon")
        if name == "mu":
            continue
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed (required)")
        p.add_argument("--reps", type=int, help="replications")
        p.add_argument("--grid", type=int, help="grid size m for path output")
        p.add_argument("--paths", type=int, help="number of paths to write to paths.csv")
        p.add_argument("--max-attempts", type=int, dest="max_attempts")
        p.add_argument("--service", help="exp | det | lognormal:VAR")
        p.add_argument("--theta", type=_csv_list(float), action="extend")
        p.add_argument("--t", type=_csv_list(float), action="extend", help="time points")
        p.add_argument("--no-autoscale", dest="autoscale", action="store_false", default=None,
                       help="do not rescale the model to mean T/n")
        p.add_argument("--tol", type=_tolerance, action="append", help="tolerance override NAME=VALUE")
        if name == "verify":
            p.add_argument("--experiment", choices=EXPERIMENTS)
    return parser


def parse_invocation(argv) -> CliInvocation:
    """Resolve flags over config-file values; raises :class:`UsageError`."""
    args = build_parser().parse_args(list(argv))
    values = read_config(args.config) if args.config else {}
    if "experiment" in values and args.subcommand != "verify":
        raise UsageError("config key 'experiment' only applies to verify")
    flags = {k: v for k, v in vars(args).items()
             if v is not None and k not in ("subcommand", "config", "force", "tol")}
    for key in ("n", "theta", "t"):
        if key in flags:
            flags[key] = tuple(flags[key])
    values.update(flags)
    tolerances = dict(values.pop("tolerances", {}))
    tolerances.update(dict(getattr(args, "tol", None) or ()))
    sub = args.subcommand
    if sub in STOCHASTIC and values.get("seed") is None:
        raise UsageError(f"{sub} requires --seed")
    if sub == "verify" and not values.get("experiment"):
        raise UsageError("verify requires --experiment")
    if sub in ("sample", "mu", "simulate-workload") and not values.get("n"):
        raise UsageError(f"{sub} requires --n")
    if sub == "report" and not values.get("out"):
        raise UsageError("report requires --out (the directory holding report.json)")
    if "out" in values:
        values["out"] = Path(values["out"])
    return CliInvocation(subcommand=sub, force=args.force, config_path=args.config,
                         tolerances=tuple(sorted(tolerances.items())), **values)


# -- subcommands --------------------------------------------------------------

def _model_for(inv: CliInvocation, n: int):
    base = parse_model(inv.model or "exp:1")
    if inv.autoscale and n >= 1:
        return base.scaled(inv.T / (n * base.mean()))
    return base


def _validate_basic(inv: CliInvocation):
    if inv.seed is not None and not 0 <= inv.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if not (math.isfinite(inv.T) and inv.T > 0):
        raise ConfigError("T must be positive")
    if any(n < 0 for n in inv.n):
        raise ConfigError("n must be nonnegative")


def _cmd_mu(inv: CliInvocation, stdout) -> int:
    _validate_basic(inv)
    values = {}
    for n in inv.n:
        values[str(n)] = conditional_mean_mu_n(_model_for(inv, n), n, inv.T)
    if inv.format == "json" or len(inv.n) > 1:
        stdout.write(canonical_json({"T": inv.T, "model": inv.model or "exp:1", "mu_n": values}))
    else:
        stdout.write(f"{values[str(inv.n[0])]!r}\n")
    return 0


def _simple_report(inv: CliInvocation, name: str, results: dict, paths: list) -> ExperimentReport:
    echo = inv.echo()
    return ExperimentReport(name, echo, int(inv.seed), config_sha256(echo), results, [], paths)


def _cmd_sample(inv: CliInvocation) -> ExperimentReport:
    _validate_basic(inv)
    reps = inv.reps or 1
    results, paths = {}, []
    for n in inv.n:
        if n < 1:
            raise ConfigError("sample needs n >= 1")
        model = _model_for(inv, n)
        attempts, first, last = [], [], []
        for i in range(reps):
            row, a = sample_conditioned_renewal_rejection(
                model, n, inv.T, RandomStream(inv.seed, i, (1, n)), inv.max_attempts)
            attempts.append(a)
            first.append(row.xi[0])
            last.append(row.xi[n])
            if i < (inv.paths or reps) and len(inv.n) == 1:
                paths.extend((i, float(s), float(k)) for k, s in enumerate(row.epochs, 1))
        m, se = mean_and_se(np.array(first)) if reps >= 2 else (float(first[0]), float("nan"))
        results[f"n={n}"] = {
            "rows": reps, "mean_attempts": float(np.mean(attempts)),
            "acceptance_rate": reps / float(np.sum(attempts)),
            "mean_xi_1": m, "mean_xi_1_se": se, "mu_n": conditional_mean_mu_n(model, n, inv.T),
            "mean_residual": float(np.mean(last)),
        }
    return _simple_report(inv, "sample", results, paths)


def _cmd_workload(inv: CliInvocation) -> ExperimentReport:
    _validate_basic(inv)
    if inv.T != 1.0:
        raise ConfigError("the transitory workload lives on the unit horizon; use --T 1")
    service = parse_service(inv.service)
    reps = inv.reps or 100
    m = inv.grid
    results, paths = {}, []
    for n in inv.n:
        if n < 1:
            raise ConfigError("simulate-workload needs n >= 1")
        model = _model_for(inv, n)
        root = math.sqrt(n)
        terminal, peak = [], []
        for i in range(reps):
            row, _ = sample_conditioned_renewal_rejection(
                model, n, 1.0, RandomStream(inv.seed, i, (1, n)), inv.max_attempts)
            nu = service.sample(RandomStream(inv.seed, i, (2, n)).generator(), n)
            phi = reflect(netput_gamma_n(row, nu, n))
            terminal.append(root * float(phi(1.0)))
            peak.append(float(np.max(phi.sequence())))
            if i < inv.paths and len(inv.n) == 1:
                t = grid_times(m)
                paths.extend((i, float(a), root * float(b)) for a, b in zip(t, phi(t)))
        tm, tse = mean_and_se(np.array(terminal)) if reps >= 2 else (terminal[0], float("nan"))
        results[f"n={n}"] = {"reps": reps, "scaled_terminal_mean": tm, "scaled_terminal_se": tse,
                             "sup_workload_mean": float(np.mean(peak)),
                             "sup_workload_q95": float(np.quantile(peak, 0.95))}
    return _simple_report(inv, "simulate-workload", results, paths)


def _cmd_verify(inv: CliInvocation, experiment: str | None = None) -> ExperimentReport:
    report = run_experiment(inv.experiment_config(experiment), workers=worker_count())
    report.config = {**report.config, "invocation": {"subcommand": inv.subcommand, "format": inv.format or "json"}}
    report.config_hash = config_sha256(report.config)
    return report


def _cmd_report(inv: CliInvocation, stdout) -> int:
    import json

    path = inv.out / "report.json"
    try:
        data = json.loads(path.read_text(encoding="ascii"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    verdicts = data.get("verdicts", [])
    if inv.format == "csv":
        stdout.write("verdict,passed,statistic,relation,threshold\n")
    for v in verdicts:
        if inv.format == "csv":
            stdout.write(f"{v['name']},{str(v['passed']).lower()},{v['statistic']},{v['relation']},{v['threshold']}\n")
        else:
            mark = "PASS" if v["passed"] else "FAIL"
            stdout.write(f"{mark}  {v['criterion']}: {v['name']} "
                         f"({v['statistic']} {v['relation']} {v['threshold']})\n")
    passed = all(v["passed"] for v in verdicts)
    if inv.format != "csv":
        stdout.write(f"{data.get('experiment', '?')}: {'passed' if passed else 'FAILED'} "
                     f"({len(verdicts)} verdicts)\n")
    return 0 if passed else 1


def _emit(inv: CliInvocation, report: ExperimentReport, stdout) -> int:
    if inv.out is not None:
        written = write_outputs(report, inv.out, force=inv.force)
        for p in written:
            stdout.write(f"wrote {p}\n")
    elif inv.format == "csv" and report.paths:
        stdout.write(csv_text(("replication", "t", "value"), report.paths, report.seed, report.config_hash))
    elif inv.format == "csv":
        stdout.write(csv_text(("verdict", "criterion", "relation", "statistic", "threshold", "passed"),
                              report.summary_rows(), report.seed, report.config_hash))
    else:
        stdout.write(report.to_json())
    for v in report.verdicts:
        if not v.passed:
            sys.stderr.write(f"FAIL {v.criterion}: {v.name} ({v.statistic!r} {v.relation} {v.threshold!r})\n")
    return 0 if report.passed else 1


def execute(inv: CliInvocation, stdout=None) -> int:
    """Run a parsed invocation; returns the exit status."""
    stdout = stdout or sys.stdout
    try:
        if inv.subcommand == "mu":
            return _cmd_mu(inv, stdout)
        if inv.subcommand == "report":
            return _cmd_report(inv, stdout)
        if inv.subcommand == "sample":
            report = _cmd_sample(inv)
        elif inv.subcommand == "simulate-workload":
            report = _cmd_workload(inv)
        elif inv.subcommand == "compare-ht":
            report = _cmd_verify(inv, "ht_compare")
        else:
            report = _cmd_verify(inv)
        return _emit(inv, report, stdout)
    except (ConfigError, InvalidModel) as exc:
        sys.stderr.write(f"transitory-sim: configuration error: {exc}\n")
        return 2
    except (FileExistsError, AcceptanceTooLow, OSError) as exc:
        sys.stderr.write(f"transitory-sim: {exc}\n")
        return 3


def main(argv=None) -> int:
    try:
        inv = parse_invocation(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 2
    return execute(inv)


if __name__ == "__main__":
    sys.exit(main())
