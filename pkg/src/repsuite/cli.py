"""Command line client for the evaluation service.

Every subcommand builds a request body, posts it to the service, and
renders the response. By default the service runs in-process over an
ASGI test transport, so no separate server is needed; pass ``--server``
(or set ``REPSUITE_SERVER``) to talk to a remote instance instead, in
which case file paths in arguments are resolved on the server.

Exit codes: 0 success, 1 domain problems (invalid catalog, degenerate
data), 2 input/output or transport failures.
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import httpx

from .report import EvalReport, write_report_files

EXIT_DOMAIN = 1
EXIT_IO = 2


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from .service import in_process_client

    return in_process_client()


def _post(ctx: click.Context, path: str, payload: dict) -> dict:
    try:
        with _client(ctx.obj.get("server")) as client:
            response = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach service: {exc}", err=True)
        raise SystemExit(EXIT_IO)
    if response.status_code == 200:
        return response.json()
    _fail(response)


def _fail(response: httpx.Response) -> None:
    try:
        detail = response.json().get("detail")
    except ValueError:
        detail = None
    if isinstance(detail, dict) and "kind" in detail:
        click.echo(f"error ({detail.get('error')}): {detail.get('message')}", err=True)
        raise SystemExit(EXIT_DOMAIN if detail["kind"] == "domain" else EXIT_IO)
    click.echo(f"error: HTTP {response.status_code}: {response.text[:500]}", err=True)
    raise SystemExit(EXIT_IO)


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot write {path}: {exc}", err=True)
        raise SystemExit(EXIT_IO)


@click.group()
@click.option(
    "--server",
    envvar="REPSUITE_SERVER",
    default=None,
    help="Base URL of a running service; default runs it in-process.",
)
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Evaluate how representative simulated survey answers are."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--catalog", required=True, type=click.Path(), help="Catalog JSON file.")
@click.pass_context
def validate(ctx: click.Context, catalog: str) -> None:
    """Check a question catalog for structural problems."""
    body = _post(ctx, "/validate", {"catalog_path": catalog})
    if body["ok"]:
        click.echo(
            f"catalog OK: {body['questions']} questions, "
            f"{body['subgroups']} subgroups"
        )
        return
    for violation in body["violations"]:
        click.echo(f"violation: {violation}", err=True)
    raise SystemExit(EXIT_DOMAIN)


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--subgroups", default=10, show_default=True, type=int)
@click.option("--respondents", default=1000, show_default=True, type=int)
@click.option("--latent-dim", default=3, show_default=True, type=int)
@click.option("--scale-size", default=5, show_default=True, type=int)
@click.option("--noise-scale", default=1.0, show_default=True, type=float)
@click.option("--samples", default=500, show_default=True, type=int,
              help="Simulated samples per model/question pair.")
@click.option("--methods", default="perfect,permuted", show_default=True,
              help="Comma-separated synthetic methods to log.")
@click.pass_context
def synth(ctx: click.Context, out_dir: str, seed: int, subgroups: int,
          respondents: int, latent_dim: int, scale_size: int,
          noise_scale: float, samples: int, methods: str) -> None:
    """Generate a synthetic population with known correlation structure."""
    body = _post(
        ctx,
        "/synth",
        {
            "out_dir": out_dir,
            "seed": seed,
            "n_subgroups": subgroups,
            "n_respondents": respondents,
            "latent_dim": latent_dim,
            "scale_size": scale_size,
            "noise_scale": noise_scale,
            "samples_per_question": samples,
            "methods": [m.strip() for m in methods.split(",") if m.strip()],
        },
    )
    click.echo(f"catalog: {body['catalog_path']}")
    click.echo(f"human:   {body['human_path']}")
    click.echo(f"logs:    {body['logs_path']} ({body['log_records']} records)")


@main.command()
@click.option("--catalog", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Generation log (NDJSON), appended to when resuming.")
@click.option("--endpoint-url", required=True, help="Chat-completions endpoint.")
@click.option("--model-name", required=True, help="Upstream model identifier.")
@click.option("--tasks", "tasks_path", required=True, type=click.Path(),
              help="JSON list of {model_id, persona} entries.")
@click.option("--auth-env", default="REPSUITE_API_TOKEN", show_default=True,
              help="Environment variable holding the bearer token.")
@click.option("--temperature", default=0.9, show_default=True, type=float)
@click.option("--samples", default=500, show_default=True, type=int)
@click.option("--flip-fraction", default=0.5, show_default=True, type=float)
@click.option("--workers", default=4, show_default=True, type=int,
              help="Maximum in-flight requests.")
@click.option("--timeout", default=60.0, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--resume/--no-resume", default=True, show_default=True)
@click.pass_context
def simulate(ctx: click.Context, catalog: str, out_path: str, endpoint_url: str,
             model_name: str, tasks_path: str, auth_env: str, temperature: float,
             samples: int, flip_fraction: float, workers: int, timeout: float,
             seed: int, resume: bool) -> None:
    """Sample model answers for every task/question pair into a log."""
    try:
        tasks = json.loads(Path(tasks_path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        click.echo(f"error: cannot read tasks file {tasks_path}: {exc}", err=True)
        raise SystemExit(EXIT_IO)
    if not isinstance(tasks, list):
        click.echo("error: tasks file must hold a JSON list", err=True)
        raise SystemExit(EXIT_IO)
    body = _post(
        ctx,
        "/simulate",
        {
            "catalog_path": catalog,
            "out_path": out_path,
            "endpoint_url": endpoint_url,
            "model_name": model_name,
            "tasks": tasks,
            "auth_env": auth_env,
            "temperature": temperature,
            "samples_per_question": samples,
            "flip_fraction": flip_fraction,
            "max_in_flight": workers,
            "timeout": timeout,
            "seed": seed,
            "resume": resume,
        },
    )
    click.echo(
        f"wrote {body['records_written']} records to {body['out_path']} "
        f"({body['ok_records']} ok, {body['transport_failures']} transport failures, "
        f"{body['pairs_skipped']}/{body['pairs_total']} pairs already complete)"
    )


@main.command()
@click.option("--catalog", required=True, type=click.Path())
@click.option("--human", required=True, type=click.Path(), help="Human responses CSV.")
@click.option("--logs", required=True, type=click.Path(), help="Generation log NDJSON.")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory for report.json and CSV sidecars.")
@click.option("--level", default="question", show_default=True,
              type=click.Choice(["question", "topic"]),
              help="Level the correlation CSVs are exported at.")
@click.option("--bounds", "bounds_iterations", default=None, type=int,
              help="Calibration iterations; omit to skip bounds.")
@click.option("--seed", default=None, type=int,
              help="Random seed; required when --bounds is given.")
@click.option("--workers", default=1, show_default=True, type=int)
@click.pass_context
def evaluate(ctx: click.Context, catalog: str, human: str, logs: str,
             out_dir: str, level: str, bounds_iterations: int | None,
             seed: int | None, workers: int) -> None:
    """Compare simulated answers to human data and write the report."""
    if bounds_iterations is not None and seed is None:
        raise click.UsageError("--bounds requires --seed")
    body = _post(
        ctx,
        "/evaluate",
        {
            "catalog_path": catalog,
            "human_path": human,
            "logs_path": logs,
            "level": level,
            "bounds_iterations": bounds_iterations,
            "seed": seed,
            "workers": workers,
        },
    )
    report = EvalReport.model_validate(body)
    try:
        paths = write_report_files(report, out_dir)
    except OSError as exc:
        click.echo(f"error: cannot write to {out_dir}: {exc}", err=True)
        raise SystemExit(EXIT_IO)
    for warning in report.errors:
        click.echo(f"warning [{warning.section}] {warning.error}: {warning.message}",
                   err=True)
    section = getattr(report.structure, level)
    if section is not None:
        for method, metrics in sorted(section.models.items()):
            rho = "n/a" if metrics.rho is None else f"{metrics.rho:.3f}"
            click.echo(
                f"{method} @ {level}: rho={rho} rmse={metrics.rmse:.3f} "
                f"({metrics.n_pairs} pairs, {metrics.n_subgroups} subgroups)"
            )
        if section.lower is not None and section.upper is not None:
            lo = "n/a" if section.lower.rho is None else f"{section.lower.rho:.3f}"
            hi = "n/a" if section.upper.rho is None else f"{section.upper.rho:.3f}"
            click.echo(f"calibration band rho: [{lo}, {hi}]")
    click.echo(f"report: {paths['report.json']}")


@main.command()
@click.option("--catalog", required=True, type=click.Path())
@click.option("--human", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory for bounds.json and bounds_trace.csv.")
@click.option("--level", default="question", show_default=True,
              type=click.Choice(["question", "topic"]))
@click.option("--bounds", "iterations", default=1000, show_default=True, type=int,
              help="Calibration iterations per bound.")
@click.option("--seed", required=True, type=int)
@click.option("--workers", default=1, show_default=True, type=int)
@click.pass_context
def bounds(ctx: click.Context, catalog: str, human: str, out_dir: str,
           level: str, iterations: int, seed: int, workers: int) -> None:
    """Estimate the calibration band from human data alone."""
    body = _post(
        ctx,
        "/bounds",
        {
            "catalog_path": catalog,
            "human_path": human,
            "level": level,
            "iterations": iterations,
            "seed": seed,
            "workers": workers,
        },
    )
    out = Path(out_dir)
    _write_text(out / "bounds.json", json.dumps(body, indent=2) + "\n")
    est = body["bounds"]
    rows = ["level,bound,iteration,rho,rmse"]
    for bound, rho_key, rmse_key in (
        ("lower", "lower_rho", "lower_rmse"),
        ("upper", "upper_rho", "upper_rmse"),
    ):
        rho_values = est[rho_key]["values"]
        rmse_values = est[rmse_key]["values"]
        for i, (rho, rmse) in enumerate(zip(rho_values, rmse_values)):
            rho_s = "" if rho is None else repr(rho)
            rmse_s = "" if rmse is None else repr(rmse)
            rows.append(f"{level},{bound},{i},{rho_s},{rmse_s}")
    _write_text(out / "bounds_trace.csv", "\n".join(rows) + "\n")

    def _fmt(key: str) -> str:
        mean = est[key]["mean"]
        return "n/a" if mean is None else f"{mean:.4f}"

    click.echo(
        f"{level} bounds over {iterations} iterations: "
        f"rho floor={_fmt('lower_rho')} ceiling={_fmt('upper_rho')}; "
        f"rmse floor={_fmt('lower_rmse')} ceiling={_fmt('upper_rmse')}"
    )
    click.echo(f"trace: {out / 'bounds_trace.csv'}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
