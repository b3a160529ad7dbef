"""Command-line entry point: generate, ingest, query, report, lint, serve.

Exit codes: 0 success, 1 failed check or lint, 2 usage or input error.
Machine-readable output goes to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .errors import StoreboardError
from .measures import register_builtin_catalog
from .queries import BinSpec, GroupQuery, run
from .star import ColumnPredicate, FilterContext, InSet, Range

OK, CHECK_FAILED, USAGE = 0, 1, 2


def _fail(message: str, code: int = USAGE):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(version=__version__, prog_name="storeboard")
def main():
    """Star-schema retail analytics: ingest data, query measures, reproduce
    the findings report, lint dashboard specs, and serve the HTTP API."""


@main.command()
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--seed", default=None, type=int, help="Generator seed (default: committed seed).")
def generate(out, seed):
    """Write the bundled calibrated dataset as CSV."""
    from . import synth

    kwargs = {} if seed is None else {"seed": seed}
    try:
        summary = synth.write_csv(out, **kwargs)
    except StoreboardError as err:
        _fail(str(err))
    click.echo(
        "wrote {out}: {lines} lines, {orders} orders, {customers} customers, {skus} SKUs".format(
            out=out, lines=summary["lines"], orders=summary["orders"],
            customers=summary["customers"], skus=summary["skus"],
        )
    )


@main.command()
@click.argument("csv_path", type=click.Path(dir_okay=False))
@click.option("--out", "-o", "snapshot_path", required=True, type=click.Path(dir_okay=False),
              help="Snapshot output path.")
@click.option("--fee-config", type=click.Path(exists=True, dir_okay=False),
              help="Shipping fee schedule JSON (used when the CSV has no payment column).")
def ingest(csv_path, snapshot_path, fee_config):
    """Parse a CSV, build the star schema, and write a snapshot."""
    from .ingest import build_star_schema, load_csv
    from .snapshot import write_snapshot

    try:
        raw = load_csv(csv_path)
        schema = build_star_schema(raw, fee_config)
        write_snapshot(schema, snapshot_path)
    except FileNotFoundError as err:
        _fail(f"no such file: {err}")
    except StoreboardError as err:
        _fail(str(err))
    meta = schema.meta
    click.echo(
        "ingested {rows} rows ({rej} rejected): {orders} orders, {cust} customers, "
        "{prod} SKUs; payment source: {src}".format(
            rows=meta["row_count"], rej=meta["rejected_rows"], orders=meta["distinct_orders"],
            cust=meta["distinct_customers"], prod=meta["distinct_products"],
            src=meta["payment_source"],
        )
    )
    click.echo(f"snapshot written to {snapshot_path}")


def _load_snapshot(path):
    from .snapshot import load_snapshot

    try:
        return load_snapshot(path)
    except FileNotFoundError:
        _fail(f"no such snapshot: {path}")
    except StoreboardError as err:
        _fail(str(err))


def _parse_filter(schema, text: str) -> ColumnPredicate:
    for op in (">=", "<=", ">", "<", "="):
        if op in text:
            column_part, value_part = text.split(op, 1)
            break
    else:
        _fail(f"filter {text!r} needs one of =, <, <=, >, >=")
    table, column = _parse_column(column_part.strip())
    _, col = _resolve(schema, table, column)
    values = [v.strip() for v in value_part.split(",")] if op == "=" else [value_part.strip()]
    if col.kind in ("money", "fraction", "integer"):
        typed = [float(v) for v in values]
    else:
        typed = values
    if op == "=":
        return ColumnPredicate(table, column, InSet(frozenset(typed)))
    lo = typed[0] if op in (">", ">=") else None
    hi = typed[0] if op in ("<", "<=") else None
    return ColumnPredicate(table, column, Range(lo, hi, op != ">", op != "<"))


def _parse_column(text: str) -> tuple[str | None, str]:
    if "." in text:
        table, column = text.split(".", 1)
        return table.strip(), column.strip()
    return None, text.strip()


def _resolve(schema, table, column):
    from .errors import AmbiguousColumn, UnknownColumn

    try:
        return schema.resolve_column(table, column)
    except (UnknownColumn, AmbiguousColumn) as err:
        _fail(str(err))


def _format_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _print_table(result) -> None:
    headers = list(result.group_columns) + list(result.total_row)
    rows = [
        [_format_cell(k) for k in r.keys] + [_format_cell(r.values[m]) for m in result.total_row]
        for r in result.rows
    ]
    total = ["TOTAL"] * (1 if result.group_columns else 0)
    total += [""] * (len(result.group_columns) - len(total))
    total += [_format_cell(result.total_row[m]) for m in result.total_row]
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in rows + [total])) if rows or total else len(headers[i])
        for i in range(len(headers))
    ]
    def line(cells):
        return "  ".join(c.ljust(widths[i]) for i, c in enumerate(cells)).rstrip()

    click.echo(line(headers))
    click.echo(line(["-" * w for w in widths]))
    for r in rows:
        click.echo(line(r))
    click.echo(line(total))


@main.command()
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(dir_okay=False))
@click.option("--group-by", "group_by", multiple=True, help="Column or Table.Column (repeatable).")
@click.option("--measure", "measures", multiple=True, required=True, help="Catalog measure name (repeatable).")
@click.option("--filter", "filters", multiple=True,
              help='Predicate like "Market=APAC", "Category=A,B", "Discount>=0.2".')
@click.option("--bin", "bin_column", help="Bin a numeric column by its distinct values.")
@click.option("--bin-width", type=float, help="Fixed bin width for --bin (origin 0).")
@click.option("--order-by", help='Measure to sort by, e.g. "Total Profit".')
@click.option("--desc", is_flag=True, help="Sort descending.")
@click.option("--limit", type=int)
def query(snapshot_path, group_by, measures, filters, bin_column, bin_width, order_by, desc, limit):
    """Run a grouped measure query against a snapshot."""
    schema = _load_snapshot(snapshot_path)
    catalog = register_builtin_catalog()
    preds = [_parse_filter(schema, f) for f in filters]
    bin_spec = None
    if bin_column:
        table, column = _parse_column(bin_column)
        mode = "fixed-width" if bin_width else "distinct-values"
        bin_spec = BinSpec(table, column, mode, bin_width, 0.0)
    q = GroupQuery(
        group_by=tuple(_parse_column(g) for g in group_by),
        measures=tuple(measures),
        filters=FilterContext.of(preds),
        bin=bin_spec,
        order_by=(order_by, "desc" if desc else "asc") if order_by else None,
        limit=limit,
    )
    try:
        result = run(schema, catalog, q)
    except StoreboardError as err:
        _fail(str(err))
    _print_table(result)


@main.command()
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(dir_okay=False))
@click.option("--check", is_flag=True, help="Exit 1 if any finding mismatches.")
@click.option("--format", "fmt", type=click.Choice(["text", "machine"]), default="text")
@click.option("--figures", "figures_dir", type=click.Path(file_okay=False),
              help="Also render figures and findings.tsv into this directory.")
def report(snapshot_path, check, fmt, figures_dir):
    """Print the findings report; optionally render its figures."""
    from .analytics import build_findings_report, render_text, render_tsv

    schema = _load_snapshot(snapshot_path)
    catalog = register_builtin_catalog()
    report = build_findings_report(schema, catalog)
    click.echo(render_tsv(report) if fmt == "machine" else render_text(report))

    if figures_dir:
        from .figures import render_report_figures

        outdir = Path(figures_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "findings.tsv").write_text(render_tsv(report) + "\n", encoding="utf-8")
        paths = render_report_figures(schema, catalog, outdir)
        click.echo(f"wrote findings.tsv and {len(paths)} figures to {outdir}", err=True)

    if check and report.mismatches:
        click.echo(
            "mismatched findings: " + ", ".join(f.id for f in report.mismatches), err=True
        )
        sys.exit(CHECK_FAILED)


@main.command()
@click.argument("spec_path", type=click.Path(dir_okay=False))
@click.option("--snapshot", "snapshot_path", type=click.Path(dir_okay=False),
              help="Also validate queries against this snapshot.")
def lint(spec_path, snapshot_path):
    """Score a dashboard spec against the six narrative elements."""
    from .dashboards import SpecFormatError, lint as lint_spec, load_spec, validate

    try:
        spec = load_spec(spec_path)
    except FileNotFoundError:
        _fail(f"no such file: {spec_path}")
    except SpecFormatError as err:
        _fail(str(err))

    if snapshot_path:
        schema = _load_snapshot(snapshot_path)
        violations = validate(spec, schema, register_builtin_catalog())
        for v in violations:
            click.echo(f"violation: {v}", err=True)
        if violations:
            sys.exit(USAGE)

    score = lint_spec(spec)
    click.echo(f"{spec.version_label}: {spec.title}")
    for element, value in score.elements.items():
        click.echo(f"  {element:26} {value:.2f}")
    s = score.structural
    color = "-" if s["semantic_color_coverage"] is None else f"{s['semantic_color_coverage']:.2f}"
    click.echo(
        f"  structural: {s['annotation_count']} annotations, whitespace {s['whitespace_ratio']:.2f}, "
        f"color coverage {color}, {s['measure_count']} measures"
    )
    for gap in score.gaps:
        click.echo(f"  gap [{gap['element']}]: {gap['description']}")
    sys.exit(OK if score.all_perfect() else CHECK_FAILED)


@main.command()
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(dir_okay=False))
@click.option("--specs", "specs_dir", type=click.Path(file_okay=False),
              help="Directory of dashboard spec JSON files (default: bundled v1-v4).")
@click.option("--port", default=8475, show_default=True)
@click.option("--bind", default="127.0.0.1", show_default=True)
@click.option("--cors-origin", "cors_origins", multiple=True,
              help="Allowed CORS origin (repeatable; default: localhost dev origins).")
@click.option("--ui-dir", type=click.Path(file_okay=False),
              help="Static UI bundle to serve at / (default: ./frontend/dist when present).")
def serve(snapshot_path, specs_dir, port, bind, cors_origins, ui_dir):
    """Serve the HTTP API (and the UI bundle when available)."""
    from .server import serve as run_server

    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    try:
        run_server(
            snapshot_path,
            specs_dir,
            port=port,
            bind=bind,
            cors_origins=list(cors_origins) or None,
            ui_dir=ui_dir,
        )
    except FileNotFoundError as err:
        _fail(f"no such file: {err}")
    except StoreboardError as err:
        _fail(str(err))


if __name__ == "__main__":
    main()
