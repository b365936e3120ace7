import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from Ansteckung.envelope import incidence_envelope
from Ansteckung.errors import AnsteckungError, ConvergenceError, SchemaError, ValidationError
from Ansteckung.events import EventHistory
from Ansteckung.fitting import FitResult, fit
from Ansteckung.formats import SCHEMAS, EventsFile, read_events, schema, write_events
from Ansteckung.intensity import IntensityModel
from Ansteckung.likelihood import LikelihoodModel
from Ansteckung.loader import DataBundle, check_events, load_grid, load_spec, load_validate
from Ansteckung.mark_sampler import EmpiricalMarkSampler, MarkSampler
from Ansteckung.model_search import build_lattice, model_search, ranking_rows
from Ansteckung.parameters import ParameterVector
from Ansteckung.plot_data import endemic_curve, interaction_curve
from Ansteckung.reproduction import reproduction_numbers
from Ansteckung.residuals import rescaled_residuals
from Ansteckung.simulation import simulate_replicates
from Ansteckung.synth import parameters_for, synth
from utils.config import config
from utils.globals import AppInfo
from utils.logging_setup import configure_logging, get_logger
from utils.utils import Utils

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3

COMMANDS = ("fit", "simulate", "diagnose", "search", "repro", "synth")


class Run:
    """One CLI invocation: loads its inputs, runs the subcommand and writes the artifacts to --out."""

    def __init__(self, args):
        self.args = args
        self.out = Utils.ensure_dir(args.out)
        self.threads = args.threads if args.threads is not None else config.threads
        self.float_format = config.output_float_format
        self.exit_code = EXIT_OK

    def require(self, *names):
        missing = [f"--{name}" for name in names if getattr(self.args, name) is None]
        if missing:
            raise ValidationError(f"{self.args.command} needs {' and '.join(missing)}")

    def bundle(self) -> DataBundle:
        self.require("events", "grid", "config")
        return load_validate(self.args.events, self.args.grid, self.args.config, tie_seed=self.args.seed)

    def seed(self, default: int) -> int:
        return self.args.seed if self.args.seed is not None else default

    def load_fit(self, model: IntensityModel) -> FitResult:
        try:
            result = FitResult.from_dict(Utils.read_json(self.args.fit))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"{self.args.fit}: not a fit result ({e})") from e
        if result.layout != model.layout:
            raise ValidationError(f"{self.args.fit}: parameters {result.layout.names} do not match the model {model.layout.names}")
        return result

    def fitted(self, bundle: DataBundle) -> FitResult:
        """The fit given by --fit, or a fresh fit of the bundle."""
        model = LikelihoodModel(bundle.grid, bundle.spec, bundle.history, threads=self.threads)
        if self.args.fit is not None:
            return self.load_fit(model)
        result = fit(model)
        self.note_convergence(result)
        return result

    def theta(self, spec, grid, mark_sampler: Optional[MarkSampler]) -> ParameterVector:
        if self.args.theta is not None:
            return parameters_for(spec, grid, Utils.read_json(self.args.theta), mark_sampler)
        self.require("fit")
        return parameters_for(spec, grid, FitResult.from_dict(Utils.read_json(self.args.fit)).theta.to_dict(), mark_sampler)

    def mark_source(self) -> Optional[EventHistory]:
        if self.args.events is None:
            return None
        return read_events(self.args.events).to_history()

    def note_convergence(self, result: FitResult):
        if not result.converged:
            self.exit_code = EXIT_NOT_CONVERGED

    def write_fit(self, path: Path, result: FitResult, bundle: DataBundle):
        Utils.write_json(path, {**result.to_dict(), "data": bundle.summary()})

    # Subcommands

    def do_fit(self):
        bundle = self.bundle()
        model = LikelihoodModel(bundle.grid, bundle.spec, bundle.history, threads=self.threads)
        result = fit(model)
        self.note_convergence(result)
        self.write_fit(self.out / "fit.json", result, bundle)
        with open(self.out / "table.txt", "w", encoding="utf-8") as f:
            f.write(result.table_text(self.float_format))
        print(result.table_text(self.float_format), end="")

    def do_simulate(self):
        self.require("grid", "config")
        spec = load_spec(self.args.config)
        grid = load_grid(self.args.grid)
        marks = self.mark_source()
        sampler = EmpiricalMarkSampler(marks) if marks is not None and marks.mark_names else None
        theta = self.theta(spec, grid, sampler)
        n = self.args.replicates or 1
        results = simulate_replicates(theta, grid, spec, n, mark_sampler=sampler, T=self.args.T,
                                      seed=self.seed(spec.seed), threads=self.threads)
        for k, result in enumerate(results):
            name = "events.json" if n == 1 else f"events_{k + 1:04d}.json"
            write_events(self.out / name, EventsFile.from_history(result.events, with_sources=True))
        logger.info(f"Wrote {n} simulated event files to {self.out}")

    def do_synth(self):
        self.require("grid", "config")
        spec = load_spec(self.args.config)
        grid = load_grid(self.args.grid)
        marks = self.mark_source()
        sampler = EmpiricalMarkSampler(marks) if marks is not None and marks.mark_names else None
        theta = self.theta(spec, grid, sampler)
        events_file = synth(spec, grid, theta, T=self.args.T, seed=self.seed(spec.seed), mark_sampler=sampler)
        write_events(self.out / "events.json", events_file)
        # The output must load against the grid it was simulated on
        check_events(events_file, grid, spec, what="synthesized events")

    def do_diagnose(self):
        bundle = self.bundle()
        result = self.fitted(bundle)
        theta = result.theta
        model = LikelihoodModel(bundle.grid, bundle.spec, bundle.history, threads=self.threads, reference_theta=theta)
        series = rescaled_residuals(theta, model, alpha=self.args.alpha)
        rows = [{"i": k + 2, "t": float(t), "Y": float(y), "U": float(u)} for k, (t, y, u) in enumerate(zip(series.times, series.Y, series.U))]
        Utils.write_csv(self.out / "residuals.csv", rows, ["i", "t", "Y", "U"], self.float_format)
        Utils.write_json(self.out / "ks.json", series.to_dict())
        Utils.write_csv(self.out / "cdf.csv", series.cdf_table(), ["u", "ecdf", "lower", "upper"], self.float_format)
        Utils.write_csv(self.out / "endemic_curve.csv", endemic_curve(theta, model).rows(), ["t", "linear", "multiplier"],
                        self.float_format)
        if model.has_epidemic:
            curve = interaction_curve(theta, model)
            Utils.write_csv(self.out / "siaf.csv", curve.rows(), curve.fieldnames, self.float_format)

        if bundle.grid.populations is None:
            logger.warning("The grid carries no tile populations; skipping the incidence envelope")
            return
        n_sims = self.args.replicates if self.args.replicates is not None else config.envelope_simulations
        envelope = incidence_envelope(theta, IntensityModel(bundle.grid, bundle.spec, bundle.history), n_sims=n_sims,
                                      seed=self.seed(bundle.spec.seed), threads=self.threads)
        Utils.write_csv(self.out / "envelope.csv", envelope.rows(),
                        ["tile", "population", "observed", "lower", "median", "upper", "flag"], self.float_format)
        Utils.write_json(self.out / "envelope.json", envelope.to_dict())

    def do_search(self):
        bundle = self.bundle()
        spec = bundle.spec
        candidates = build_lattice(spec, spec.endemic_terms, spec.epidemic_terms)
        logger.info(f"Searching {len(candidates)} candidate models")
        ranking = model_search(bundle.history, bundle.grid, candidates, top=self.args.top, threads=self.threads)
        rows = ranking_rows(ranking)
        Utils.write_csv(self.out / "ranking.csv", rows, list(rows[0].keys()), self.float_format)
        for entry in ranking:
            if entry.result is not None:
                self.write_fit(self.out / "models" / f"model_{entry.index:04d}.json", entry.result, bundle)
        if ranking[0].result is None or not ranking[0].result.converged:
            self.exit_code = EXIT_NOT_CONVERGED

    def do_repro(self):
        bundle = self.bundle()
        result = self.fitted(bundle)
        model = IntensityModel(bundle.grid, bundle.spec, bundle.history)
        summaries = reproduction_numbers(result.theta, result.covariance, model, n_bootstrap=self.args.bootstrap,
                                         seed=self.seed(bundle.spec.seed), by_type=self.args.by_type)
        Utils.write_json(self.out / "mu.json", {
            "parameters": result.theta.to_dict(),
            "reproduction_numbers": [s.to_dict() for s in summaries],
        })

    def execute(self) -> int:
        getattr(self, f"do_{self.args.command}")()
        return self.exit_code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--events", help="events JSON file")
    common.add_argument("--grid", help="grid JSON file")
    common.add_argument("--config", help="model config JSON file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="random seed (default: the config seed)")
    common.add_argument("--threads", type=int, help="worker threads for likelihood blocks and replicates")
    common.add_argument("--replicates", type=int, help="simulated trajectories (simulate, diagnose)")
    common.add_argument("--alpha", type=float, default=0.05, help="KS test level (diagnose)")
    common.add_argument("--fit", help="fit.json of an earlier fit (diagnose, repro, simulate, synth)")
    common.add_argument("--theta", help="JSON object of named parameter values (simulate, synth)")
    common.add_argument("--T", type=float, help="simulation end time (default: the grid end)")
    common.add_argument("--bootstrap", type=int, help="bootstrap draws (repro, default from app config)")
    common.add_argument("--by-type", action="store_true", help="average mu over each type's own events (repro)")
    common.add_argument("--top", type=int, default=10, help="candidates refit with Gaussian kernels (search)")
    common.add_argument("--log-level", help="console log level")

    parser = argparse.ArgumentParser(prog="ansteckung", description="Endemic-epidemic spatio-temporal point process models")
    parser.add_argument("--version", action="version", version=f"{AppInfo.APP_IDENTIFIER} {AppInfo.VERSION} (schema {AppInfo.SCHEMA_VERSION})")
    parser.add_argument("--schema", choices=sorted(SCHEMAS), help="print a file format description and exit")
    subparsers = parser.add_subparsers(dest="command")
    for command in COMMANDS:
        subparsers.add_parser(command, parents=[common])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 for --help/--version
        return int(e.code or 0)
    if args.schema is not None:
        print(json.dumps(schema(args.schema), indent=2))
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION
    try:
        configure_logging(level=args.log_level or config.log_level, log_to_file=config.log_to_file)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        return Run(args).execute()
    except ValidationError as e:
        logger.error(e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as e:
        logger.error(e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except AnsteckungError as e:
        logger.error(e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
