"""
FlashSim command-line interface
"""
import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from .config import current_config
from .config.loader import load_run_config, override
from .exceptions import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_UNEXPECTED, ConfigError, FlashSimError
from .models.campaign import CampaignConfig, ReadScheme, RunConfig, WriteScheme
from .models.channel import ChannelParams
from .models.code import LdpcCode
from .models.quantization import CostWeights, WriteSearchResult
from .services import channel_service, lut_service, read_service, write_service
from .services.harness_service import harness_service
from .services.ldpc_service import ldpc_service
from .utils.helpers import create_output_filename, parse_float_list, write_csv
from .utils.logger import setup_logging

logger = logging.getLogger(__name__)

ENTROPY_TRACE_POINTS = 512
WRITE_COLUMNS = ['v1', 'v2', 'cost', 'omega_msb', 'omega_lsb']
READ_COLUMNS = ['theta_star', 'r1', 'r2', 'r3', 'r4', 'r5', 'r6', 'c1', 'c2', 'cost']


class FlashSimArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the configuration-error code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG_ERROR, f"{self.prog}: error: {message}\n")


def _weights_arg(text: str) -> CostWeights:
    try:
        return CostWeights.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _float_list_arg(text: str) -> List[float]:
    try:
        values = parse_float_list(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from e
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


# ---------------------------------------------------------------------------
# configuration assembly


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """File, then FLASHSIM_SEED, then command-line flags"""
    config = load_run_config(args.config)
    config = override(config, 'sweep', pe=args.pe, t_ret=args.t_ret,
                      frames=getattr(args, 'frames', None),
                      use_lut=True if getattr(args, 'use_lut', False) else None)
    config = override(config, 'run', master_seed=args.seed, threads=args.threads,
                      log_level=args.log_level)
    config = override(config, 'output', dir=args.output, lut=getattr(args, 'lut', None),
                      weights=getattr(args, 'weights_file', None))
    config = override(config, 'schemes', theta=getattr(args, 'theta', None),
                      weights=getattr(args, 'weights', None))
    return config


def operating_point(config: RunConfig) -> ChannelParams:
    """Single-point commands run at the first PE and retention time of the sweep grid"""
    return config.channel.at(config.sweep.pe[0], config.sweep.t_ret[0])


def campaign_code(config: RunConfig) -> LdpcCode:
    return ldpc_service.code_for(config.code)


def resolve_dmin(config: RunConfig) -> int:
    if config.code.d_min is not None:
        return config.code.d_min
    return campaign_code(config).d_min_est


def resolve_weights(config: RunConfig, required: bool = True) -> Optional[CostWeights]:
    """--weights, then [schemes] weights, then the weights file"""
    if config.schemes.weights is not None:
        return config.schemes.weights
    path = config.output.path_for(config.output.weights)
    if path.exists() or required:
        return read_service.load_weights(path)
    return None


def campaign_from(config: RunConfig, code: LdpcCode, write_scheme: WriteScheme,
                  read_scheme: ReadScheme, weights: Optional[CostWeights]) -> CampaignConfig:
    try:
        return CampaignConfig(
            channel=config.channel, code=code,
            pe_grid=list(config.sweep.pe), t_grid=list(config.sweep.t_ret),
            write_scheme=write_scheme, read_scheme=read_scheme,
            frames=config.sweep.frame_cap, min_events=config.sweep.min_events,
            batch_frames=config.sweep.batch, master_seed=config.run.master_seed,
            threads=config.run.threads, max_iter=config.code.max_iter,
            theta=config.schemes.theta, weights=weights, use_lut=config.sweep.use_lut,
            lut_path=str(config.output.path_for(config.output.lut)),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _output_path(config: RunConfig, prefix: str, params: ChannelParams) -> Path:
    return config.output.path_for(create_output_filename(prefix, params.pe, params.t_ret))


def _write(rows: List[Dict], path: Path, columns: List[str]) -> Path:
    path = write_csv(rows, path, columns, current_config.CSV_FLOAT_FORMAT)
    print(f"Wrote {path}")
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_inspect(args: argparse.Namespace, config: RunConfig) -> int:
    """State model, hard thresholds, page RBERs and an entropy trace"""
    params = operating_point(config)
    scheme = WriteScheme(args.scheme)
    d_min = resolve_dmin(config) if scheme is WriteScheme.PROPOSED else 1
    write = write_service.design_write(params, scheme, d_min).write
    model, th, omega_msb, omega_lsb = channel_service.evaluate(params, write)

    print(f"PE={params.pe:g} T={params.t_ret:g} write={scheme.value} V1={write.v1:.6f} V2={write.v2:.6f}")
    for name, value in model.to_dict().items():
        print(f"{name} = {value!r}")
    for name, value in th.to_dict().items():
        print(f"{name} = {value!r}")
    print(f"omega_msb = {omega_msb!r}")
    print(f"omega_lsb = {omega_lsb!r}")

    lo, hi = model.span()
    v = np.linspace(lo, hi, ENTROPY_TRACE_POINTS)
    h = read_service.entropy(model, v)
    rows = [{'v': float(x), 'entropy': float(y)} for x, y in zip(v, h)]
    _write(rows, _output_path(config, "entropy", params), ['v', 'entropy'])
    return EXIT_OK


def cmd_optimize_write(args: argparse.Namespace, config: RunConfig) -> int:
    """Write voltages for one operating point"""
    params = operating_point(config)
    scheme = WriteScheme(args.scheme or config.schemes.write.value)
    d_min = resolve_dmin(config)
    result: WriteSearchResult = write_service.design_write(params, scheme, d_min)
    print(f"{scheme.value}: V1={result.write.v1:.6f} V2={result.write.v2:.6f} "
          f"cost={result.cost(d_min):.6e} omega_msb={result.omega_msb:.6e} omega_lsb={result.omega_lsb:.6e}")
    _write([result.to_row(d_min)], _output_path(config, f"write_{scheme.value}", params), WRITE_COLUMNS)
    return EXIT_OK


def cmd_optimize_read(args: argparse.Namespace, config: RunConfig) -> int:
    """Read voltages for one operating point, on top of the configured write scheme"""
    params = operating_point(config)
    scheme = ReadScheme(args.scheme or config.schemes.read.value)
    d_min = resolve_dmin(config)
    weights = resolve_weights(config, required=scheme is ReadScheme.PROPOSED)

    write = write_service.design_write(params, config.schemes.write, d_min).write
    model = channel_service.build_state_model(params, write)
    reads, table = read_service.design_reads(model, scheme, d_min, weights, config.schemes.theta)

    cost = math.nan
    if weights is not None:
        cost = read_service.read_cost(read_service.alphas(table), d_min, weights)
    row = {'theta_star': reads.theta if reads.theta is not None else math.nan,
           'c1': weights.c1 if weights else math.nan,
           'c2': weights.c2 if weights else math.nan,
           'cost': cost}
    row.update({f"r{i}": v for i, v in enumerate(reads.r, start=1)})
    print(f"{scheme.value}: theta={row['theta_star']:.4f} reads={np.round(reads.r, 6).tolist()} cost={cost:.6e}")
    _write([row], _output_path(config, f"read_{scheme.value}", params), READ_COLUMNS)
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace, config: RunConfig) -> int:
    """Fit the read-cost weights with a theta sweep and save them"""
    params = operating_point(config)
    code = campaign_code(config)
    cfg = campaign_from(config, code, config.schemes.write, ReadScheme.ENTROPY_FIXED, None)
    thetas = args.thetas or current_config.CALIBRATION_THETAS
    # --frames, then [sweep] frames, then CALIBRATION_FRAMES
    frames = config.sweep.frames or current_config.CALIBRATION_FRAMES
    result = harness_service.calibrate(cfg, params.pe, params.t_ret, thetas, frames)
    path = read_service.save_weights(result.weights, config.output.path_for(config.output.weights),
                                     calibration=result.to_dict())
    print(f"c1={result.weights.c1!r} c2={result.weights.c2!r}")
    print(f"Wrote {path}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, config: RunConfig) -> int:
    """BER campaign over the (PE, T) grid"""
    code = campaign_code(config)
    write_scheme = WriteScheme(args.write_scheme or config.schemes.write.value)
    read_scheme = ReadScheme(args.read_scheme or config.schemes.read.value)
    weights = None
    if not config.sweep.use_lut:
        weights = resolve_weights(config, required=read_scheme is ReadScheme.PROPOSED)
    cfg = campaign_from(config, code, write_scheme, read_scheme, weights)

    name = config.output.csv or f"ber_{write_scheme.value}_{read_scheme.value}.csv"
    csv_path = config.output.path_for(name)
    report = harness_service.run_sweep(cfg, csv_path)
    for row in report.rows:
        print(f"PE={row.pe:g} T={row.t_ret:g} BER={row.ber_total:.3e} FER={row.fer:.3e} "
              f"frames={row.frames} stop={row.stop_rule.value}")
    print(f"Wrote {csv_path}")
    return EXIT_OK


def cmd_build_lut(args: argparse.Namespace, config: RunConfig) -> int:
    """Optimized voltages for every grid point, saved as a look-up table"""
    d_min = resolve_dmin(config)
    weights = resolve_weights(config)
    records = lut_service.build_lut(config.channel, config.sweep.pe, config.sweep.t_ret, d_min, weights)
    path = lut_service.save_lut(records, config.output.path_for(config.output.lut))
    invalid = sum(1 for r in records if not r.valid)
    print(f"{len(records)} grid points, {invalid} invalid")
    print(f"Wrote {path}")
    return EXIT_OK


def cmd_dmin(args: argparse.Namespace, config: RunConfig) -> int:
    """Minimum-distance estimate of the configured code"""
    if args.effort is not None:
        config = override(config, 'code', dmin_effort=args.effort)
    code = campaign_code(config)
    print(f"{code.name}: n={code.n} k={code.k} rate={code.rate:.4f} d_min<={code.d_min_est}")
    row = {'n': code.n, 'k': code.k, 'd_min': code.d_min_est, 'effort': config.code.dmin_effort}
    _write([row], config.output.path_for(f"dmin_n{code.n}_k{code.k}.csv"), ['n', 'k', 'd_min', 'effort'])
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    'inspect': cmd_inspect,
    'optimize-write': cmd_optimize_write,
    'optimize-read': cmd_optimize_read,
    'calibrate': cmd_calibrate,
    'sweep': cmd_sweep,
    'build-lut': cmd_build_lut,
    'dmin': cmd_dmin,
}


# ---------------------------------------------------------------------------
# argument parsing


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run configuration file (key-value text)")
    common.add_argument("--pe", type=_float_list_arg, help="PE cycle count(s), comma separated")
    common.add_argument("--t-ret", dest="t_ret", type=_float_list_arg,
                        help="Retention time(s) in hours, comma separated")
    common.add_argument("--seed", type=int, help="Master seed (overrides FLASHSIM_SEED and the file)")
    common.add_argument("--threads", type=int, help="Worker threads for Monte-Carlo frames")
    common.add_argument("--output", help="Output directory for CSV and artifact files")
    common.add_argument("--log-level", dest="log_level",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Logging level for this run")
    return common


def _add_weights_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--weights", type=_weights_arg, help="Read-cost weights as 'c1,c2'")
    parser.add_argument("--weights-file", dest="weights_file", help="Weights file to read or write")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = FlashSimArgumentParser(
        prog="flashsim",
        description="LDPC-coded MLC NAND flash simulator and voltage optimizer",
    )
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=FlashSimArgumentParser)
    sub.required = True
    write_choices = [s.value for s in WriteScheme]
    read_choices = [s.value for s in ReadScheme]

    p = sub.add_parser("inspect", parents=[common], help=cmd_inspect.__doc__, description=cmd_inspect.__doc__)
    p.add_argument("--scheme", choices=write_choices, default=WriteScheme.FIXED.value,
                   help="Write scheme placing V1, V2 (default: fixed)")

    p = sub.add_parser("optimize-write", parents=[common], help=cmd_optimize_write.__doc__,
                       description=cmd_optimize_write.__doc__)
    p.add_argument("--scheme", choices=write_choices, help="Write scheme (default: schemes.write)")

    p = sub.add_parser("optimize-read", parents=[common], help=cmd_optimize_read.__doc__,
                       description=cmd_optimize_read.__doc__)
    p.add_argument("--scheme", choices=read_choices, help="Read scheme (default: schemes.read)")
    p.add_argument("--theta", type=float, help="Entropy level for the entropy-fixed scheme")
    _add_weights_flags(p)

    p = sub.add_parser("calibrate", parents=[common], help=cmd_calibrate.__doc__,
                       description=cmd_calibrate.__doc__)
    p.add_argument("--frames", type=int, help="Frames simulated per theta")
    p.add_argument("--thetas", type=_float_list_arg, help="Theta grid, comma separated")
    p.add_argument("--weights-file", dest="weights_file", help="Where to save the fitted weights")

    p = sub.add_parser("sweep", parents=[common], help=cmd_sweep.__doc__, description=cmd_sweep.__doc__)
    p.add_argument("--frames", type=int, help="Frame cap per grid point")
    p.add_argument("--write-scheme", dest="write_scheme", choices=write_choices,
                   help="Write scheme (default: schemes.write)")
    p.add_argument("--read-scheme", dest="read_scheme", choices=read_choices,
                   help="Read scheme (default: schemes.read)")
    p.add_argument("--theta", type=float, help="Entropy level for the entropy-fixed scheme")
    p.add_argument("--use-lut", dest="use_lut", action="store_true",
                   help="Take write and read voltages from the look-up table")
    p.add_argument("--lut", help="Look-up table file")
    _add_weights_flags(p)

    p = sub.add_parser("build-lut", parents=[common], help=cmd_build_lut.__doc__,
                       description=cmd_build_lut.__doc__)
    p.add_argument("--lut", help="Look-up table file to write")
    _add_weights_flags(p)

    p = sub.add_parser("dmin", parents=[common], help=cmd_dmin.__doc__, description=cmd_dmin.__doc__)
    p.add_argument("--effort", type=int, help="Information-set trials for the estimate")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and return its exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        config = resolve_config(args)
        if args.log_level is None and config.run.log_level.upper() != current_config.LOG_LEVEL:
            logging.getLogger().setLevel(config.run.log_level.upper())
        return COMMANDS[args.command](args, config)
    except FlashSimError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning(f"{args.command} interrupted")
        print("Interrupted", file=sys.stderr)
        return EXIT_UNEXPECTED
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {e}")
        print(f"Unexpected error: {e}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
