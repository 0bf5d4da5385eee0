"""
Command-line surface: one subcommand per experiment.

Exit status 0 when every criterion passes, 1 when one fails or an I/O step breaks,
2 when the configuration is invalid.
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import InvalidArgumentError
from app.core.rng import RngStream
from app.models.experiment_models import Command, ExperimentConfig, OutputFormat
from app.models.report_models import ConvergenceReport
from app.services.asep_service import asep_service
from app.services.convergence_service import (
    ASEP_STREAM,
    ENSEMBLE_STREAM,
    EQUIVALENCE_STREAM,
    convergence_service,
)
from app.services.export_service import export_service
from app.services.initial_data_service import initial_data_service
from app.services.sixvertex_service import sixvertex_service
from app.services.timegraph_service import timegraph_service
import logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2

# replicas written out as example trajectories
EXPORTED_REPLICAS = 5


def _floats(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _ints(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _pair(text: str) -> Tuple[int, int]:
    parts = _ints(text)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}")
    return parts[0], parts[1]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sixvertex-asep",
        description="Monte Carlo checks of the offset six-vertex model against the ASEP",
    )
    commands = [command.value for command in Command]
    parser.add_argument("command", nargs="?", choices=commands, help="experiment to run; --command is equivalent")
    parser.add_argument("--command", dest="command_flag", choices=commands, help="experiment to run")
    parser.add_argument("--config", help="JSON file with experiment settings; flags override it")
    parser.add_argument("--L", type=float, help="left jump rate")
    parser.add_argument("--R", type=float, help="right jump rate")
    parser.add_argument("--delta1", type=float, help="vertical path turns up with probability δ1")
    parser.add_argument("--delta2", type=float, help="horizontal path goes straight with probability δ2")
    parser.add_argument("--epsilons", type=_floats, help="comma-separated ε values")
    parser.add_argument("--M", type=int, help="left extent of the bounded window")
    parser.add_argument("--N", type=int, help="right extent of the bounded window")
    parser.add_argument("--sizes", type=_ints, help="comma-separated M = N values for the bounded-model decay")
    parser.add_argument("--replicas", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--phi", help="step, bernoulli:b1,b2 or file:PATH")
    parser.add_argument("--tags", type=_ints, help="comma-separated tags; write --tags=-1,-2 for negative tags")
    parser.add_argument("--times", type=_floats, help="comma-separated query times")
    parser.add_argument(
        "--set", type=_pair, help="lo,hi interval for the joint tagged-position event; write --set=-3,4 for negative lo"
    )
    parser.add_argument("--x", type=int, help="current / height function column")
    parser.add_argument("--r", type=int, help="current threshold")
    parser.add_argument("--n", type=int, help="triangle size for path ensembles")
    parser.add_argument("--steps", type=int, help="discrete steps for the offset model")
    parser.add_argument("--t", type=float, help="continuous horizon for single-time checks")
    parser.add_argument("--identity-replicas", dest="identity_replicas", type=int)
    parser.add_argument("--agreement-replicas", dest="agreement_replicas", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--format", choices=[fmt.value for fmt in OutputFormat])
    parser.add_argument("--threads", type=int)
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides: Dict[str, Any] = {
        key: value for key, value in vars(args).items()
        if value is not None and key not in ("config", "command", "command_flag")
    }
    positional, flag = args.command, args.command_flag
    if positional and flag and positional != flag:
        raise ValueError(f"conflicting commands {positional!r} and --command {flag!r}")
    command = positional or flag
    if command:
        overrides["command"] = command
    elif not args.config:
        raise ValueError("a command is required, either positional or through --command")
    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    return ExperimentConfig(**overrides)


def _export_ensemble(cfg: ExperimentConfig) -> List[Path]:
    stream = RngStream(seed=cfg.seed, stream_id=ENSEMBLE_STREAM).child(1)
    phi = initial_data_service.realize(cfg.phi, cfg.n, stream.child(2, 0))
    delta1, delta2 = cfg.vertex_params()
    ensemble = sixvertex_service.sample_path_ensemble(delta1, delta2, phi, cfg.n, stream.child(0))
    out = Path(cfg.out)
    return [
        export_service.write_ensemble(ensemble, out / "ensemble.csv", cfg.provenance()),
        export_service.write_initial_data(phi, out / "initial_data.json"),
    ]


def _export_asep(cfg: ExperimentConfig) -> List[Path]:
    stream = RngStream(seed=cfg.seed, stream_id=ASEP_STREAM).child(1)
    window = (-cfg.M, cfg.N)
    times = [cfg.t * (k + 1) / settings.ASEP_CHECKPOINTS for k in range(settings.ASEP_CHECKPOINTS)]
    trajectories = []
    first_graph = None
    for k in range(min(cfg.replicas, EXPORTED_REPLICAS)):
        phi = initial_data_service.realize(cfg.phi, max(cfg.M, cfg.N) + 1, stream.child(2, k))
        config = initial_data_service.asep_config_from_initial(phi, window)
        graph = timegraph_service.sample_continuous_graph(cfg.L, cfg.R, window, cfg.t, stream.child(0, k))
        trajectories.append(asep_service.evolve_asep(config, graph, cfg.t, times))
        first_graph = first_graph or graph
    out = Path(cfg.out)
    return [
        export_service.write_trajectories(trajectories, out / "asep_trajectories.csv", cfg.provenance()),
        export_service.write_graph(first_graph, out / "asep_graph.csv", cfg.provenance()),
    ]


def _export_offset(cfg: ExperimentConfig) -> List[Path]:
    stream = RngStream(seed=cfg.seed, stream_id=EQUIVALENCE_STREAM).child(1)
    delta1, delta2 = cfg.vertex_params()
    phi = initial_data_service.realize(cfg.phi, max(cfg.n, cfg.steps) + 1, stream.child(2, 0))
    state = sixvertex_service.initial_offset_state(phi, cfg.n)
    window = (-cfg.steps, 2 * cfg.n)
    trajectories = []
    first_graph = None
    for k in range(min(cfg.replicas, EXPORTED_REPLICAS)):
        graph = timegraph_service.sample_discrete_graph(delta1, delta2, window, cfg.steps, stream.child(0, k))
        trajectories.append(sixvertex_service.evolve_offset_graph(state, graph, phi, cfg.steps))
        first_graph = first_graph or graph
    out = Path(cfg.out)
    return [
        export_service.write_offset_trajectories(trajectories, out / "offset_trajectories.csv", cfg.provenance()),
        export_service.write_graph(first_graph, out / "offset_graph.csv", cfg.provenance()),
    ]


def _run_sample_ensemble(cfg: ExperimentConfig) -> Tuple[ConvergenceReport, List[Path]]:
    return convergence_service.run_vertex_calibration(cfg), _export_ensemble(cfg)


def _run_sim_asep(cfg: ExperimentConfig) -> Tuple[ConvergenceReport, List[Path]]:
    return convergence_service.run_asep_oracle(cfg), _export_asep(cfg)


def _run_sim_offset(cfg: ExperimentConfig) -> Tuple[ConvergenceReport, List[Path]]:
    return convergence_service.run_offset_equivalence(cfg), _export_offset(cfg)


def _run_converge(cfg: ExperimentConfig) -> Tuple[ConvergenceReport, List[Path]]:
    return convergence_service.run_convergence_experiment(cfg), []


def _run_bound_check(cfg: ExperimentConfig) -> Tuple[ConvergenceReport, List[Path]]:
    return convergence_service.run_bound_check(cfg), []


def _run_bad_events(cfg: ExperimentConfig) -> Tuple[ConvergenceReport, List[Path]]:
    census = convergence_service.run_bad_event_census(cfg)
    return census.merge(convergence_service.run_tilde_q_experiment(cfg)), []


HANDLERS: Dict[Command, Callable[[ExperimentConfig], Tuple[ConvergenceReport, List[Path]]]] = {
    Command.SAMPLE_ENSEMBLE: _run_sample_ensemble,
    Command.SIM_ASEP: _run_sim_asep,
    Command.SIM_OFFSET: _run_sim_offset,
    Command.CONVERGE: _run_converge,
    Command.BOUND_CHECK: _run_bound_check,
    Command.BAD_EVENTS: _run_bad_events,
}


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        field = ".".join(str(loc) for loc in item["loc"]) or "config"
        parts.append(f"{field}: {item['msg']}")
    return "; ".join(parts)


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ValidationError as e:
        print(f"invalid configuration: {_describe(e)}", file=sys.stderr)
        return EXIT_INVALID
    except (InvalidArgumentError, ValueError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"cannot read configuration: {e}", file=sys.stderr)
        return EXIT_FAILED

    logger.info(f"Running {cfg.command.value} with seed {cfg.seed}, {cfg.replicas} replicas")
    try:
        report, artifacts = HANDLERS[cfg.command](cfg)
        artifacts.append(export_service.write_report(report, cfg.out, cfg.command.value, cfg.format))
    except InvalidArgumentError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_FAILED

    for criterion in report.criteria:
        print(criterion.summary_line())
    for path in artifacts:
        logger.info(f"Artifact: {path}")
    return EXIT_OK if report.passed else EXIT_FAILED
