import click
import json
import logging
import polars as pl

from pinwheelkit.__version__ import __version__
from pinwheelkit.bgt import BgtInstance
from pinwheelkit.bgt import bgt_approximate
from pinwheelkit.bgt import simulate_bgt
from pinwheelkit.certify import certify_unschedulable
from pinwheelkit.certify import min_leftpush_per_window
from pinwheelkit.config import load_config
from pinwheelkit.enumeration import get_spec
from pinwheelkit.enumeration import run_campaign
from pinwheelkit.errors import PinwheelError
from pinwheelkit.folds import FOLDS
from pinwheelkit.folds import FOLD_KINDS
from pinwheelkit.folds import pfold_to_single
from pinwheelkit.instances import KINDS
from pinwheelkit.instances import PACKING
from pinwheelkit.instances import TaskPeriods
from pinwheelkit.instances import format_ratio
from pinwheelkit.instances import parse_ratio
from pinwheelkit.selftest import run_selftest
from pinwheelkit.solvers import CyclicSchedule
from pinwheelkit.solvers import decide
from pinwheelkit.solvers import verify_covering
from pinwheelkit.solvers import verify_packing
from pinwheelkit.store import load_report
from pinwheelkit.tables import ScheduleTables
from pinwheelkit.tables import build_tables

FORMATS = ('text', 'json')


def _periods(ctx, param, value):
    if value is None:
        return None
    try:
        return tuple(parse_ratio(p) for p in value.split(',') if p.strip())
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter(f"{value!r} is not a comma separated list of periods")


def _format(ctx, fmt):
    return fmt or ctx.obj['output']['format']


def _echo_json(data):
    click.echo(json.dumps(data, sort_keys=True, indent=2))


def _cycle_text(schedule):
    text = 'cycle: ' + ','.join(str(s) for s in schedule.cycle)
    if schedule.prefix:
        text = 'prefix: ' + ','.join(str(s) for s in schedule.prefix) + '\n' + text
    return text


def _fail(error):
    raise click.ClickException(str(error))


@click.group()
@click.version_option(__version__, prog_name='pinwheelkit')
@click.option('--config', '-c', default=None, help='YAML configuration file')
@click.option('--verbose', '-v', is_flag=True, default=False, help='Log solver details')
@click.pass_context
def cli(ctx, config, verbose):

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='[%(asctime)s] %(levelname)s: %(message)s',
        datefmt='%H:%M:%S'
    )

    try:
        ctx.obj = load_config(config)
    except (OSError, ValueError) as error:
        raise click.UsageError(str(error))

    logging.getLogger(__name__).info(f"pinwheelkit {__version__}")
    logging.getLogger(__name__).info(f"effective configuration: {json.dumps(ctx.obj, sort_keys=True)}")


@cli.command(name='decide')
@click.option('--mode', '-m', type=click.Choice(KINDS), required=True, help='Packing or covering semantics')
@click.option('--periods', '-p', required=True, callback=_periods, help='Comma separated integer periods')
@click.option('--emit-schedule', '-e', default=None, help='Write the found schedule to this JSON file')
@click.option('--format', '-f', 'fmt', type=click.Choice(FORMATS), default=None, help='Output format')
@click.pass_context
def decide_cmd(ctx, mode, periods, emit_schedule, fmt):

    solver = ctx.obj['solver']
    try:
        verdict = decide(TaskPeriods(mode, periods), solver['state_budget'], solver['debug'])
    except ValueError as error:
        raise click.BadParameter(str(error), param_hint='--periods')
    except PinwheelError as error:
        _fail(error)

    if verdict.schedulable and emit_schedule is not None:
        verdict.schedule.dump(emit_schedule)

    if _format(ctx, fmt) == 'json':
        _echo_json({
            'verdict': 'schedulable' if verdict.schedulable else 'unschedulable',
            'schedule': verdict.schedule.to_dict() if verdict.schedulable else None,
            'states': verdict.states
        })
    else:
        click.echo('SCHEDULABLE' if verdict.schedulable else 'UNSCHEDULABLE')
        if verdict.schedulable:
            click.echo(_cycle_text(verdict.schedule))


@cli.command()
@click.option('--mode', '-m', type=click.Choice(KINDS), required=True, help='Packing or covering semantics')
@click.option('--periods', '-p', required=True, callback=_periods, help='Comma separated periods')
@click.option('--schedule', '-s', required=True, help='JSON file with prefix and cycle')
def verify(mode, periods, schedule):

    verifier = verify_packing if mode == PACKING else verify_covering

    try:
        A = TaskPeriods(mode, periods)
    except ValueError as error:
        raise click.BadParameter(str(error), param_hint='--periods')

    try:
        s = CyclicSchedule.load(schedule)
    except PinwheelError as error:
        _fail(error)
    except (OSError, TypeError, ValueError) as error:
        raise click.BadParameter(str(error), param_hint='--schedule')

    try:
        valid = verifier(A, s)
    except PinwheelError as error:
        _fail(error)

    click.echo('VALID' if valid else 'INVALID')
    if not valid:
        raise click.exceptions.Exit(1)


@cli.command()
@click.option('--op', '-o', type=click.Choice(sorted(FOLD_KINDS)), required=True, help='Fold operation')
@click.option('--theta', '-t', default=None, help='Fold threshold; not used by pfold1')
@click.option('--periods', '-p', required=True, callback=_periods, help='Comma separated periods')
@click.option('--trace', is_flag=True, default=False, help='Include the full rewrite trace')
@click.option('--format', '-f', 'fmt', type=click.Choice(FORMATS), default=None, help='Output format')
@click.pass_context
def fold(ctx, op, theta, periods, trace, fmt):

    try:
        A = TaskPeriods(FOLD_KINDS[op], periods)
        if op == 'pfold1':
            if not periods:
                raise ValueError('pfold1 needs at least one period')
            _, result = pfold_to_single(A)
        else:
            if theta is None:
                raise click.UsageError(f"--theta is required for {op}")
            result = FOLDS[op](A, parse_ratio(theta))
    except (ValueError, ZeroDivisionError) as error:
        raise click.UsageError(str(error))

    if _format(ctx, fmt) == 'json':
        data = {'op': op, 'theta': theta, 'output': result.output.to_strings()}
        if trace:
            data['trace'] = result.to_dict()
        _echo_json(data)
    else:
        click.echo(str(result.output))
        if trace:
            _echo_json(result.to_dict())


@cli.command()
@click.option('--periods', '-p', required=True, callback=_periods, help='Comma separated integer packing periods')
@click.option('--format', '-f', 'fmt', type=click.Choice(FORMATS), default=None, help='Output format')
@click.pass_context
def certify(ctx, periods, fmt):

    try:
        certification = certify_unschedulable(TaskPeriods.packing(periods))
    except ValueError as error:
        raise click.BadParameter(str(error), param_hint='--periods')

    if _format(ctx, fmt) == 'json':
        _echo_json({
            'outcome': certification.outcome,
            'density': format_ratio(certification.density),
            'barrier': format_ratio(certification.barrier.value),
            'origin': certification.barrier.describe()
        })
    else:
        click.echo(f"barrier: {format_ratio(certification.barrier.value)} ({certification.barrier.describe()})")
        click.echo(f"density: {format_ratio(certification.density)}")
        click.echo(certification.outcome)


@cli.command()
@click.option('--fixed', required=True, callback=_periods, help='Comma separated integer periods of the fixed jobs')
@click.option('--len', 'length', type=int, required=True, help='Window length in days')
@click.option('--format', '-f', 'fmt', type=click.Choice(FORMATS), default=None, help='Output format')
@click.pass_context
def window(ctx, fixed, length, fmt):

    try:
        report = min_leftpush_per_window(TaskPeriods.packing(fixed), length, ctx.obj['window']['max_states'])
    except PinwheelError as error:
        _fail(error)
    except ValueError as error:
        raise click.UsageError(str(error))

    if _format(ctx, fmt) == 'json':
        _echo_json({
            'fixed': report.jobs.to_strings(),
            'window': report.window,
            'min_leftpushes': report.min_leftpushes,
            'states': report.states
        })
    else:
        click.echo(f"jobs {report.jobs}, window {report.window}: at least {report.min_leftpushes} left-push(es)")


@cli.command(name='enumerate')
@click.option('--spec', '-s', 'spec_name', required=True, help='Name of a built-in family, e.g. CASE5')
@click.option('--out', '-o', required=True, help='JSON Lines certificate store, resumed if it exists')
@click.option('--workers', '-w', type=int, default=None, help='Number of worker processes')
@click.option('--limit', '-l', type=int, default=None, help='Only process the first members in canonical order')
@click.pass_context
def enumerate_cmd(ctx, spec_name, out, workers, limit):

    campaign = ctx.obj['campaign']
    try:
        spec = get_spec(spec_name)
    except ValueError as error:
        raise click.BadParameter(str(error), param_hint='--spec')

    try:
        report = run_campaign(
            spec,
            out,
            workers or campaign['workers'],
            limit,
            ctx.obj['solver']['state_budget'],
            campaign['progress_seconds'],
            campaign['chunksize']
        )
    except PinwheelError as error:
        _fail(error)

    _echo_json(report.to_dict())
    if not report.passed:
        raise click.ClickException(f"campaign {spec.name} did not pass")


@cli.command()
@click.option('--in', '-i', 'input', required=True, help='JSON Lines certificate store')
@click.option('--database', '-d', default=None, help='Persist the certificates to this duckdb file')
def report(input, database):

    try:
        summary = load_report(input, database)
    except OSError as error:
        raise click.BadParameter(str(error), param_hint='--in')
    except PinwheelError as error:
        _fail(error)

    pl.Config.set_tbl_rows(len(summary))
    click.echo(summary)


@cli.group()
def bgt():
    pass


def _open_tables(config, directory, solve_on_miss):
    tables = config['tables']
    directory = directory or tables['directory']
    solve_on_miss = tables['solve_on_miss'] if solve_on_miss is None else solve_on_miss
    if directory is None:
        if not solve_on_miss:
            raise click.UsageError('no schedule tables given; pass --tables or --solve-on-miss')
        return ScheduleTables(solve_on_miss=True, state_budget=config['solver']['state_budget'])

    try:
        return ScheduleTables.load(directory, solve_on_miss, config['solver']['state_budget'])
    except OSError as error:
        raise click.BadParameter(str(error), param_hint='--tables')
    except PinwheelError as error:
        _fail(error)


@bgt.command()
@click.option('--rates', '-r', required=True, help='Comma separated integer growth rates')
@click.option('--tables', '-t', 'directory', default=None, help='Directory with prebuilt schedule tables')
@click.option('--solve-on-miss/--no-solve-on-miss', default=None, help='Solve keys missing from the tables instead of failing')
@click.option('--format', '-f', 'fmt', type=click.Choice(FORMATS), default=None, help='Output format')
@click.pass_context
def approx(ctx, rates, directory, solve_on_miss, fmt):

    try:
        grove = BgtInstance.parse(rates)
    except ValueError as error:
        raise click.BadParameter(str(error), param_hint='--rates')

    tables = _open_tables(ctx.obj, directory, solve_on_miss)
    try:
        height, schedule = bgt_approximate(grove, tables)
    except PinwheelError as error:
        _fail(error)

    tallest = simulate_bgt(grove, schedule)
    if _format(ctx, fmt) == 'json':
        _echo_json({'rates': list(grove.rates), 'H': height, 'schedule': schedule.to_dict(), 'max_height': tallest})
    else:
        click.echo(f"H = {height}")
        click.echo(_cycle_text(schedule))
        click.echo(f"max height: {tallest}")


@bgt.group(name='tables')
def tables_group():
    pass


@tables_group.command()
@click.option('--out', '-o', required=True, help='Destination directory for T1.json, T2.json and T3.json')
@click.option('--workers', '-w', type=int, default=None, help='Number of worker processes')
@click.pass_context
def build(ctx, out, workers):

    tables = ctx.obj['tables']
    config = {
        'max_jobs': tables['max_jobs'],
        'workers': workers or tables['workers'],
        'state_budget': ctx.obj['solver']['state_budget']
    }

    try:
        build_tables(config).save(out)
    except PinwheelError as error:
        _fail(error)


@cli.command()
def selftest():

    results = run_selftest()
    for name, passed, detail in results:
        click.echo(f"{'ok' if passed else 'FAIL'} {name}: {detail}")

    if not all(passed for _, passed, _ in results):
        raise click.ClickException('selftest failed')


if __name__ == '__main__':
    cli()
