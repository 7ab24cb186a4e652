"""Command line entry point.

Every subcommand except `serve` is a thin client over the HTTP API:
with --url it talks to a running service, without it the app is mounted
in-process, so the CLI exercises exactly the code paths the service
exposes. `score` additionally offers a fully offline mode for scoring a
text against a triples file without any service state.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx

from .experiments import load_plan, run as run_experiments
from .gateway import AuditLog, HttpChatGateway, LlmConfig, MockGateway
from .ntriples import parse_triple_set
from .scoring import evaluate_output_explanation
from .service import ServiceConfig, create_app


class ServiceClient:
    """Same-interface access to a remote service or an in-process app."""

    def __init__(self, url: str | None, store: Path | None) -> None:
        self.url = url
        self.app = None
        if url is None:
            config = ServiceConfig.from_sources()
            if store is not None:
                config = ServiceConfig(
                    store_dir=store,
                    cors_origins=config.cors_origins,
                    llm_endpoint=config.llm_endpoint,
                    llm_model=config.llm_model,
                    api_key_env=config.api_key_env,
                    audit_log=config.audit_log,
                )
            self.app = create_app(config)

    def request(self, method: str, path: str, **kwargs) -> httpx.Response:
        if self.url is not None:
            with httpx.Client(base_url=self.url, timeout=60.0) as client:
                return client.request(method, path, **kwargs)

        async def go() -> httpx.Response:
            transport = httpx.ASGITransport(app=self.app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://qaexplain.internal", timeout=60.0
            ) as client:
                return await client.request(method, path, **kwargs)

        return asyncio.run(go())


def _fail_on_error(response: httpx.Response) -> dict:
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise click.ClickException(f"HTTP {response.status_code}: {detail}")
    return response.json()


client_options = [
    click.option("--url", default=None, help="Base URL of a running service; omit for in-process."),
    click.option(
        "--store",
        type=click.Path(path_type=Path),
        default=None,
        help="Store directory for in-process mode (default: QAEXPLAIN_STORE_DIR or ./qaexplain-data).",
    ),
]


def with_client_options(command):
    for option in reversed(client_options):
        command = option(command)
    return command


@click.group()
def main() -> None:
    """Explain the data flow of component-based question answering pipelines."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--store", type=click.Path(path_type=Path), default=None, help="Store directory.")
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path), default=None)
@click.option(
    "--static",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    default=None,
    help="Built UI assets to mount at /ui.",
)
def serve(
    host: str, port: int, store: Path | None, config_file: Path | None, static: Path | None
) -> None:
    """Run the HTTP service."""
    import dataclasses

    import uvicorn

    config = ServiceConfig.from_sources(config_file=config_file)
    if store is not None:
        config = dataclasses.replace(config, store_dir=store)
    if static is not None:
        config = dataclasses.replace(config, static_dir=static)
    uvicorn.run(create_app(config), host=host, port=port)


@main.command(name="run")
@click.option("--plan", "plan_file", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--mock/--live", default=True, show_default=True, help="Gateway selection.")
@click.option("--endpoint", default=None, help="Chat-completions URL for --live runs.")
@click.option("--seed", type=int, default=None, help="Override the plan seed.")
@click.option("--workers", type=int, default=1, show_default=True)
def run_cmd(
    plan_file: Path,
    out_dir: Path,
    mock: bool,
    endpoint: str | None,
    seed: int | None,
    workers: int,
) -> None:
    """Execute an experiment plan and write the matrix files."""
    payload = json.loads(plan_file.read_text(encoding="utf-8"))
    if seed is not None:
        payload["seed"] = seed
    plan = load_plan(payload)

    out_dir.mkdir(parents=True, exist_ok=True)
    audit = AuditLog(out_dir / "audit.ndjson")
    if mock:
        gateway = MockGateway(audit_log=audit)
    else:
        if endpoint is None:
            raise click.ClickException("--live requires --endpoint")
        if len(plan.model_ids) != 1:
            raise click.ClickException("--live runs one model per invocation; split the plan")
        gateway = HttpChatGateway(
            LlmConfig(endpoint_url=endpoint, model_id=plan.model_ids[0]), audit_log=audit
        )

    report = run_experiments(plan, gateway, out_dir, workers=workers)
    click.echo(f"trials: {len(report.trials)}  exclusions: {len(report.exclusions)}")
    click.echo(report.matrix_csv.read_text(encoding="utf-8"), nl=False)
    click.echo(f"wrote {report.trials_csv}, {report.matrix_csv}, {report.matrix_json}")


@main.command()
@click.option("--subject", type=click.Choice(["input", "output"]), required=True)
@click.option("--method", type=click.Choice(["template", "llm"]), default="template", show_default=True)
@click.option("--query", default=None, help="Inline SPARQL text (input subject).")
@click.option("--query-file", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--triples-file", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--graph", default=None, help="Graph IRI for inline triples or endpoint fetch.")
@click.option("--endpoint", default=None, help="SPARQL endpoint holding the output data.")
@click.option("--component", default=None, help="Component IRI (endpoint fetch) or name (input prompt).")
@click.option("--shots", type=int, default=0, show_default=True)
@click.option("--model", "model_id", default=None, help="Model id for llm method (default mock).")
@click.option("--example-kinds", default=None, help="Comma-separated kinds for output llm prompts.")
@with_client_options
def explain(
    subject: str,
    method: str,
    query: str | None,
    query_file: Path | None,
    triples_file: Path | None,
    graph: str | None,
    endpoint: str | None,
    component: str | None,
    shots: int,
    model_id: str | None,
    example_kinds: str | None,
    url: str | None,
    store: Path | None,
) -> None:
    """Produce one explanation and print it."""
    service = ServiceClient(url, store)
    if subject == "input":
        if query is None and query_file is None:
            raise click.ClickException("input subject needs --query or --query-file")
        text = query if query is not None else query_file.read_text(encoding="utf-8")
        body = {"query": text, "method": method, "shots": shots}
        if component:
            body["component"] = component
        if model_id:
            body["modelId"] = model_id
        payload = _fail_on_error(service.request("POST", "/explanations/input", json=body))
    else:
        body = {"method": method, "shots": shots}
        if triples_file is not None:
            body["triples"] = triples_file.read_text(encoding="utf-8")
            if graph:
                body["graph"] = graph
        elif endpoint is not None:
            if not (graph and component):
                raise click.ClickException("endpoint fetch needs --graph and --component")
            body["endpointRef"] = {"endpoint": endpoint, "graph": graph, "component": component}
        else:
            raise click.ClickException("output subject needs --triples-file or --endpoint")
        if model_id:
            body["modelId"] = model_id
        if example_kinds:
            body["exampleKinds"] = [k.strip() for k in example_kinds.split(",") if k.strip()]
        payload = _fail_on_error(service.request("POST", "/explanations/output", json=body))

    click.echo(payload["text"])
    click.echo(f"id: {payload['id']}", err=True)


@main.command()
@click.option("--id", "explanation_id", default=None, help="Stored explanation id to evaluate.")
@click.option("--text-file", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--triples-file", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--graph", default="urn:qanary:process:inline", show_default=True)
@with_client_options
def score(
    explanation_id: str | None,
    text_file: Path | None,
    triples_file: Path | None,
    graph: str,
    url: str | None,
    store: Path | None,
) -> None:
    """Compute the quantitative quality score of an output explanation."""
    if explanation_id is not None:
        service = ServiceClient(url, store)
        payload = _fail_on_error(
            service.request("POST", "/evaluations", json={"explanationId": explanation_id})
        )
        click.echo(json.dumps(payload, indent=2))
        return
    if text_file is None or triples_file is None:
        raise click.ClickException("offline scoring needs --text-file and --triples-file")
    triple_set = parse_triple_set(triples_file.read_text(encoding="utf-8"), graph=graph)
    scored = evaluate_output_explanation(text_file.read_text(encoding="utf-8"), triple_set)
    result = {
        "prefixRating": scored.score.prefix_rating,
        "annotationRatings": list(scored.score.annotation_ratings),
        "qE": float(scored.score.q_e),
        "qEExact": str(scored.score.q_e),
        "depreciations": [
            {"target": str(d.target), "reason": d.reason.value} for d in scored.score.depreciations
        ],
    }
    click.echo(json.dumps(result, indent=2))


@main.command(name="export-ratings")
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
@with_client_options
def export_ratings(out_file: Path | None, url: str | None, store: Path | None) -> None:
    """Dump the mean rating per metric and method as CSV."""
    service = ServiceClient(url, store)
    response = service.request("GET", "/ratings/export")
    if response.status_code >= 400:
        raise click.ClickException(f"HTTP {response.status_code}: {response.text}")
    if out_file is not None:
        out_file.write_text(response.text, encoding="utf-8")
        click.echo(f"wrote {out_file}", err=True)
    else:
        click.echo(response.text, nl=False)


if __name__ == "__main__":
    sys.exit(main())
