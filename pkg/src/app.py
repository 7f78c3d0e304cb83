import argparse
import json
import logging
import sys
from typing import Callable, Dict, List, Optional, TextIO

import pandas as pd

from config.settings import Config
from models.policy import PolicyConfig, PolicyKind
from models.results import RunSpec
from services.experiment_service import FIGURES, ExperimentService
from services.instance_service import ReferenceKind
from utils.errors import (ContractError, InstanceFormatError, InstanceValidationError, ParameterError,
                          SizeBudgetError, SolverError)
from utils.instance_io import dumps_instance, load_instance

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2
EXIT_SOLVER = 3
EXIT_BUDGET = 4


def create_parser() -> argparse.ArgumentParser:
    """Create the gigmatch argument parser"""
    parser = argparse.ArgumentParser(
        prog='gigmatch',
        description="Online matching and pricing under known heterogeneous arrival distributions."
    )
    commands = parser.add_subparsers(dest='command', required=True)

    source = argparse.ArgumentParser(add_help=False)
    group = source.add_mutually_exclusive_group()
    group.add_argument('--instance', help="Instance JSON file")
    group.add_argument('--ref', choices=ReferenceKind.ALL, help="Built-in tightness instance")
    source.add_argument('--eps', type=float, help="eps of att-cr / samp-cr")
    source.add_argument('--m', type=int, help="m of att-var / samp-var")
    source.add_argument('--ref-gamma', type=float, help="gamma fixing p in samp-var (defaults to --gamma)")

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument('--format', choices=('csv', 'json'), default='csv')
    output.add_argument('--out', help="Output path (stdout when omitted)")

    policy = argparse.ArgumentParser(add_help=False)
    policy.add_argument('--policy', choices=PolicyKind.ALL, default=PolicyKind.ATT)
    policy.add_argument('--gamma', type=float, default=0.5)
    policy.add_argument('--n', type=int, default=Config.GIGMATCH_DEFAULT_N)
    policy.add_argument('--seed', type=int, default=Config.GIGMATCH_DEFAULT_SEED)

    validate = commands.add_parser('validate', help="Check an instance file")
    validate.add_argument('path')

    lp = commands.add_parser('lp', parents=[source], help="Solve the benchmark LP")
    lp.add_argument('path', nargs='?', help="Instance JSON file (same as --instance)")
    lp.add_argument('--dump', action='store_true', help="Also write the LP in text form")
    lp.add_argument('--out', help="Where --dump writes (stdout when omitted)")

    run = commands.add_parser('run', parents=[source, policy, output], help="Monte Carlo run of one policy")
    run.add_argument('--trace', help="CSV path for per-round event logs")
    run.add_argument('--trace-reps', type=int, default=10, help="Replications exported by --trace")
    run.add_argument('--risk-threshold', type=float, help="Report the Chebyshev bound on Pr[profit <= E]")

    sweep = commands.add_parser('sweep', parents=[source, policy, output], help="Monte Carlo over a gamma grid")
    sweep.add_argument('--gammas', required=True, help="Comma separated gamma values")

    exact = commands.add_parser('exact', parents=[source, policy, output], help="Exact evaluation and optima")

    reproduce = commands.add_parser('reproduce', parents=[output], help="Check one tightness figure")
    reproduce.add_argument('figure', type=int, choices=sorted(FIGURES))
    reproduce.add_argument('--n', type=int, default=Config.GIGMATCH_DEFAULT_N)
    reproduce.add_argument('--seed', type=int, default=Config.GIGMATCH_DEFAULT_SEED)

    instance = commands.add_parser('instance', parents=[source], help="Write an instance as JSON")
    instance.add_argument('--random', type=int, metavar='SEED', help="Random unit-capacity instance")
    instance.add_argument('--size', default='3,2,2,3', help="|I|,|J|,K,T for --random")
    instance.add_argument('--density', type=float, default=1.0)
    instance.add_argument('--prophet', help="Comma separated values of a prophet problem")
    instance.add_argument('--horizon', type=int, help="Rounds of --prophet (uniform arrivals)")
    instance.add_argument('--capacity', type=int, default=1, help="Values kept in --prophet")
    instance.add_argument('--pricing', help="Comma separated price levels")
    instance.add_argument('--demand', help="Purchase probabilities: rows per price split by ';'")
    instance.add_argument('--inventory', type=int, default=1)
    instance.add_argument('--out', help="Output path (stdout when omitted)")

    return parser


def run(argv: Optional[List[str]] = None, stdout: Optional[TextIO] = None) -> int:
    """Parse argv, dispatch and map errors to exit codes"""
    stdout = stdout or sys.stdout
    args = create_parser().parse_args(argv)
    handlers: Dict[str, Callable[[argparse.Namespace, TextIO], int]] = {
        'validate': cmd_validate,
        'lp': cmd_lp,
        'run': cmd_run,
        'sweep': cmd_sweep,
        'exact': cmd_exact,
        'reproduce': cmd_reproduce,
        'instance': cmd_instance,
    }
    try:
        Config.validate()
        return handlers[args.command](args, stdout)
    except (InstanceFormatError, OSError) as e:
        logger.error(f"Cannot read input: {str(e)}")
        return EXIT_IO
    except SolverError as e:
        logger.error(f"Solver failure: {str(e)} {e.diagnostics}")
        return EXIT_SOLVER
    except SizeBudgetError as e:
        logger.error(str(e))
        return EXIT_BUDGET
    except (ParameterError, ContractError, InstanceValidationError, ValueError) as e:
        logger.error(str(e))
        return EXIT_DOMAIN


def cmd_validate(args: argparse.Namespace, stdout: TextIO) -> int:
    service = ExperimentService()
    report = service.instance_service.validate(load_instance(args.path))
    if report.ok:
        stdout.write("ok\n")
        return EXIT_OK
    for violation in report.violations:
        stdout.write(f"{violation.rule}\t{violation.location}\t{violation.message}\n")
    return EXIT_DOMAIN


def cmd_lp(args: argparse.Namespace, stdout: TextIO) -> int:
    service = ExperimentService()
    if args.path is not None:
        args.instance = args.path
    spec = _run_spec(args, policy=PolicyKind.ATT, gamma=0.0, n=1, seed=0)
    _require_source(spec)
    prepared = service.prepare(service.load(spec), service.describe_source(spec))
    stdout.write(f"{prepared.solution.objective:.9f}\n")

    if args.dump:
        text = service.lp_service.dump_lp(service.lp_service.build_lp(prepared.instance))
        _write_text(text, args.out, stdout)
    return EXIT_OK


def cmd_run(args: argparse.Namespace, stdout: TextIO) -> int:
    service = ExperimentService()
    spec = _run_spec(args)
    row = service.run(spec, risk_threshold=args.risk_threshold)
    _emit(pd.DataFrame([row]), args.format, spec.output_path, stdout)

    if args.trace:
        prepared = service.prepare(service.load(spec), service.describe_source(spec))
        trace = service.simulation_service.export_trajectories(
            prepared.instance, prepared.solution, PolicyConfig(spec.policy, spec.gamma),
            spec.master_seed, args.trace_reps
        )
        trace.to_csv(args.trace, index=False)
        logger.info(f"Wrote {len(trace)} trace rows to {args.trace}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, stdout: TextIO) -> int:
    gammas = _floats(args.gammas)
    spec = _run_spec(args, gamma=gammas[0] if gammas else args.gamma)
    frame = ExperimentService().sweep(spec, gammas)
    frame.insert(0, 'policy', spec.policy)
    frame['n'] = spec.n
    frame['seed'] = spec.master_seed
    _emit(frame, args.format, spec.output_path, stdout)
    return EXIT_OK


def cmd_exact(args: argparse.Namespace, stdout: TextIO) -> int:
    spec = _run_spec(args)
    report = ExperimentService().exact(spec)
    if args.format == 'json':
        _write_text(json.dumps(report, indent=2) + "\n", spec.output_path, stdout)
    else:
        flat = {k: v for k, v in report.items() if k != 'h_distribution'}
        _emit(pd.json_normalize(flat), 'csv', spec.output_path, stdout)
    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace, stdout: TextIO) -> int:
    frame = ExperimentService().reproduce(args.figure, args.n, args.seed)
    frame['n'] = args.n
    frame['seed'] = args.seed
    _emit(frame, args.format, args.out, stdout)
    return EXIT_OK if bool(frame['passed'].all()) else EXIT_DOMAIN


def cmd_instance(args: argparse.Namespace, stdout: TextIO) -> int:
    service = ExperimentService().instance_service
    if args.random is not None:
        n_offline, n_online, n_prices, horizon = _ints(args.size, 4)
        inst = service.random_instance(args.random, n_offline, n_online, n_prices, horizon, args.density)
    elif args.prophet is not None:
        values = _floats(args.prophet)
        if not args.horizon or args.horizon < 1:
            raise ParameterError("--prophet needs --horizon >= 1")
        rows = [[1.0 / len(values)] * args.horizon for _ in values]
        inst = service.from_prophet(values, rows, capacity=args.capacity)
    elif args.pricing is not None:
        if not args.demand:
            raise ParameterError("--pricing needs --demand")
        demand = [_floats(row) for row in args.demand.split(';')]
        inst = service.from_pricing(args.inventory, _floats(args.pricing), demand)
    else:
        spec = _run_spec(args, policy=PolicyKind.SAMP, gamma=args.ref_gamma or 0.5, n=1, seed=0)
        _require_source(spec)
        inst = ExperimentService(instance_service=service).load(spec)
    service.require_valid(inst)
    _write_text(dumps_instance(inst), args.out, stdout)
    return EXIT_OK


def _run_spec(args: argparse.Namespace, policy: Optional[str] = None, gamma: Optional[float] = None,
              n: Optional[int] = None, seed: Optional[int] = None) -> RunSpec:
    return RunSpec(
        policy=policy if policy is not None else args.policy,
        gamma=gamma if gamma is not None else args.gamma,
        n=n if n is not None else args.n,
        master_seed=seed if seed is not None else args.seed,
        instance_path=getattr(args, 'instance', None),
        ref_kind=getattr(args, 'ref', None),
        eps=getattr(args, 'eps', None),
        m=getattr(args, 'm', None),
        ref_gamma=getattr(args, 'ref_gamma', None),
        output_format=getattr(args, 'format', 'csv'),
        output_path=getattr(args, 'out', None)
    )


def _require_source(spec: RunSpec) -> None:
    if (spec.instance_path is None) == (spec.ref_kind is None):
        raise ParameterError("exactly one of --instance and --ref is required")


def _floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ParameterError(f"Expected comma separated numbers, got {text!r}") from e


def _ints(text: str, count: int) -> List[int]:
    try:
        values = [int(part) for part in text.split(',')]
    except ValueError as e:
        raise ParameterError(f"Expected {count} comma separated integers, got {text!r}") from e
    if len(values) != count:
        raise ParameterError(f"Expected {count} comma separated integers, got {text!r}")
    return values


def _emit(frame: pd.DataFrame, fmt: str, path: Optional[str], stdout: TextIO) -> None:
    if fmt == 'json':
        text = frame.to_json(orient='records', indent=2) + "\n"
    else:
        text = frame.to_csv(index=False)
    _write_text(text, path, stdout)


def _write_text(text: str, path: Optional[str], stdout: TextIO) -> None:
    if path:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        logger.info(f"Wrote {path}")
    else:
        stdout.write(text)
