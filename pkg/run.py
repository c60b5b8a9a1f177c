"""
Command-line entry point

    python run.py run brute-force-recovery --seed 3 --trace out.tsv
    python run.py scenarios
    python run.py history
"""
import json
import os

import click
from sqlalchemy.exc import SQLAlchemyError

from app import create_app, db
from harness.checkers import is_known
from harness.runner import run_scenario
from harness.scenario import load_scenario
from models import RunRecord
from utils.helpers import ConfigurationError, FaultSpecError, ScenarioError

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def resolve_scenario(app, name):
    """A path, or the name of a bundled scenario"""
    if os.path.exists(name):
        return name
    bundled = os.path.join(app.config['SCENARIO_DIR'], name if name.endswith('.yaml') else name + '.yaml')
    if os.path.exists(bundled):
        return bundled
    raise ScenarioError(f"no scenario file or bundled scenario named '{name}'")


def save_run(result):
    try:
        record = RunRecord(
            scenario=result.scenario.name,
            seed=result.scenario.seed,
            passed=result.passed,
            steps=result.steps,
            trace_digest=result.digest,
            verdicts=json.dumps({v.name: 'pass' if v.passed else 'fail' for v in result.verdicts}),
        )
        db.session.add(record)
        db.session.commit()
        return record
    except SQLAlchemyError as e:
        db.session.rollback()
        click.echo(f"⚠️  Run not recorded: {str(e)}", err=True)
        return None


@click.group()
@click.option('--config', 'config_name', default=None, help='Configuration profile (development, testing, release)')
@click.pass_context
def cli(ctx, config_name):
    """Self-stabilizing reconfiguration simulator"""
    try:
        app = create_app(config_name)
    except ConfigurationError as e:
        click.echo(f"❌ {str(e)}", err=True)
        ctx.exit(EXIT_USAGE)
    ctx.obj = app
    ctx.with_resource(app.app_context())


@cli.command()
@click.argument('scenario')
@click.option('--seed', type=int, default=None, help='Override the scenario seed')
@click.option('--trace', 'trace_path', type=click.Path(dir_okay=False, writable=True), default=None,
              help='Write the tab-separated trace here')
@click.option('--checkers', default=None, help='Comma-separated checker names')
@click.option('--budget', type=int, default=None, help='Override the step budget')
@click.option('--replay', is_flag=True, help='Run twice and compare trace digests')
@click.option('--bless', is_flag=True, help='Store measured values as golden values')
@click.option('--json', 'as_json', is_flag=True, help='Print the verdict report as JSON')
@click.pass_obj
def run(app, scenario, seed, trace_path, checkers, budget, replay, bless, as_json):
    """Run SCENARIO and report checker verdicts"""
    ctx = click.get_current_context()
    try:
        path = resolve_scenario(app, scenario)
        parsed = load_scenario(path, app.config)
        selected = [name.strip() for name in checkers.split(',') if name.strip()] if checkers else None
        if selected:
            unknown = [name for name in selected if not is_known(name)]
            if unknown:
                raise ScenarioError(f"unknown checker '{unknown[0]}'")
        if budget is not None and budget <= 0:
            raise ScenarioError("budget must be positive")
        parsed = parsed.with_overrides(seed=seed, step_budget=budget)
        result = run_scenario(parsed, selected, replay=replay, db=db, bless=bless)
    except (ScenarioError, FaultSpecError) as e:
        click.echo(f"❌ {str(e)}", err=True)
        ctx.exit(EXIT_USAGE)

    if trace_path:
        result.trace.write(trace_path)
    save_run(result)

    if as_json:
        click.echo(json.dumps(result.to_dict(), default=str, indent=2))
    else:
        click.echo(f"ℹ️  {parsed.name} seed={parsed.seed} steps={result.steps} digest={result.digest[:16]}")
        for verdict in result.verdicts:
            marker = '✅' if verdict.passed else '❌'
            measures = ', '.join(f"{k}={v}" for k, v in sorted(verdict.measures.items()))
            click.echo(f"{marker} {verdict.name}" + (f" ({measures})" if measures else ''))
            if not verdict.passed:
                witness = verdict.witness
                click.echo(f"   witness: step {witness.get('step')} {witness.get('reason')}")
                for line in witness.get('slice', [])[:10]:
                    click.echo(f"   | {line}")
        if bless:
            click.echo(f"ℹ️  Blessed {len(result.measures())} golden values")
    ctx.exit(EXIT_PASS if result.passed else EXIT_FAIL)


@cli.command()
@click.pass_obj
def scenarios(app):
    """List the bundled scenarios"""
    directory = app.config['SCENARIO_DIR']
    names = sorted(f[:-5] for f in os.listdir(directory) if f.endswith('.yaml')) if os.path.isdir(directory) else []
    if not names:
        click.echo(f"ℹ️  No scenarios in {directory}")
        return
    for name in names:
        try:
            parsed = load_scenario(os.path.join(directory, name + '.yaml'), app.config)
            click.echo(f"📄 {name}: {parsed.description or ''}".rstrip(': '))
        except ScenarioError as e:
            click.echo(f"❌ {name}: {str(e)}")


@cli.command()
@click.option('--limit', type=int, default=20, help='Number of runs to show')
@click.option('--scenario', default=None, help='Only runs of this scenario')
@click.pass_obj
def history(app, limit, scenario):
    """Show recent runs"""
    try:
        query = db.session.query(RunRecord)
        if scenario:
            query = query.filter_by(scenario=scenario)
        records = query.order_by(RunRecord.created_at.desc()).limit(limit).all()
    except SQLAlchemyError as e:
        click.echo(f"❌ Database error: {str(e)}", err=True)
        click.get_current_context().exit(EXIT_USAGE)
    if not records:
        click.echo("ℹ️  No runs recorded yet")
        return
    for record in records:
        marker = '✅' if record.passed else '❌'
        click.echo(f"{marker} {record.scenario}#{record.seed} steps={record.steps} "
                   f"digest={record.trace_digest[:16]} at {record.created_at:%Y-%m-%d %H:%M}")


if __name__ == '__main__':
    cli()
