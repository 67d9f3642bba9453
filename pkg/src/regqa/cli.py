"""Command-line entry points: ingest, build, query, serve, eval, graph."""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .build import build_bundle
from .bundle import load_bundle, load_manifest, save_bundle
from .errors import RegqaError
from .evaluation import load_questions, run_eval
from .fetch import fetch_html
from .ingest import extract_sections, load_corpus, save_corpus
from .llm import ProviderConfig, build_gateway
from .retrieval import RetrievalEngine

logger = logging.getLogger(__name__)


def _fail(stage: str, exc: Exception) -> None:
    click.echo(f"error[{stage}]: {exc}", err=True)
    sys.exit(1)


def _make_gateway(provider: str, dim: int, fixtures: str | None,
                  strict: bool, base_url: str | None, model: str,
                  embedding_model: str):
    provider_config = None
    if provider == "remote":
        if not base_url:
            raise click.UsageError("--base-url is required with --provider remote")
        provider_config = ProviderConfig(
            provider_kind="remote-chat-embeddings",
            model_name=model,
            embedding_model=embedding_model,
            embedding_dim=dim,
            base_url=base_url,
        )
    return build_gateway(provider, dim=dim, fixtures_dir=fixtures,
                         strict=strict, config=provider_config)


provider_options = [
    click.option("--provider", type=click.Choice(["mock", "remote"]),
                 default="mock", show_default=True),
    click.option("--fixtures", type=click.Path(exists=True, file_okay=False),
                 default=None, help="Mock fixture directory."),
    click.option("--strict-mock", is_flag=True,
                 help="Fail instead of falling back when a fixture is missing."),
    click.option("--base-url", default=None, help="Remote provider base URL."),
    click.option("--model", default="mock-chat", show_default=True),
    click.option("--embedding-model", default="mock-embed", show_default=True),
]


def with_provider_options(command):
    for option in reversed(provider_options):
        command = option(command)
    return command


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose):
    """Regulatory QA: dual-graph retrieval over numbered provisions."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--format", "corpus_format", type=click.Choice(["text", "html"]),
              default="text", show_default=True)
@click.option("--source", required=True,
              help="Path to a local file or an http(s) URL.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Output corpus.json path.")
def ingest(corpus_format, source, out):
    """Parse a raw document into an ordered section corpus."""
    try:
        if source.startswith(("http://", "https://")):
            raw = fetch_html(source)
            source_url = source
        else:
            raw = Path(source).read_text(encoding="utf-8")
            source_url = None
        nodes = extract_sections(raw, corpus_format, source_url)
        save_corpus(nodes, out)
    except (RegqaError, OSError) as exc:
        _fail("ingest", exc)
    click.echo(f"wrote {len(nodes)} sections to {out}")


@main.command()
@click.option("--in", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Input corpus.json.")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Output bundle directory.")
@click.option("--dim", default=64, show_default=True,
              help="Embedding dimension (mock provider).")
@click.option("--tau", default=1.0, show_default=True,
              help="Entity merge similarity threshold.")
@click.option("--validation-passes", default=1, show_default=True)
@click.option("--workers", default=1, show_default=True)
@with_provider_options
def build(input_path, out, dim, tau, validation_passes, workers, provider,
          fixtures, strict_mock, base_url, model, embedding_model):
    """Run extraction, refinement, and graph construction; write a bundle."""
    try:
        nodes = load_corpus(input_path)
        gateway = _make_gateway(provider, dim, fixtures, strict_mock,
                                base_url, model, embedding_model)
        bundle, report = build_bundle(
            nodes, gateway, tau=tau, validation_passes=validation_passes,
            workers=workers)
        manifest = save_bundle(bundle, out)
        # wall-clock timings vary run to run, so the report sits outside
        # the manifest checksums
        report_path = Path(out) / "run_report.json"
        report_path.write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")
    except RegqaError as exc:
        _fail("build", exc)
    failed = [s.section_id for s in report.sections if s.status != "ok"]
    click.echo(f"bundle written to {out}: "
               f"{manifest['counts']['sections']} sections, "
               f"{manifest['counts']['entities']} entities, "
               f"{manifest['counts']['triples']} triples")
    if failed:
        click.echo(f"failed sections: {', '.join(failed)}", err=True)


@main.command()
@click.option("--bundle", "bundle_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--question", required=True)
@click.option("--json", "as_json", is_flag=True, help="Emit Answer JSON.")
@click.option("--trace", is_flag=True, help="Include the retrieval trace.")
@with_provider_options
def query(bundle_dir, question, as_json, trace, provider, fixtures,
          strict_mock, base_url, model, embedding_model):
    """Answer one question against a built bundle."""
    try:
        bundle = load_bundle(bundle_dir)
        gateway = _make_gateway(provider, bundle.schema.dim, fixtures,
                                strict_mock, base_url, model, embedding_model)
        engine = RetrievalEngine(bundle, gateway)
        answer = engine.answer_question(question)
    except RegqaError as exc:
        _fail("query", exc)
    if as_json:
        click.echo(json.dumps(answer.to_dict(include_trace=trace),
                              sort_keys=True))
        return
    click.echo(answer.summary)
    for ref in answer.references:
        click.echo(f"\n[{ref.section_id.canonical_text}] {ref.text}")
        if ref.source_url:
            click.echo(f"  link: {ref.source_url}")
    if trace:
        click.echo("\ntrace: " + json.dumps(answer.trace.to_dict(),
                                            sort_keys=True))


@main.command()
@click.option("--bundle", "bundle_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--questions", "questions_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="CSV: question,truth_ids(semicolon-separated),subpart.")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False),
              help="Report output directory.")
@with_provider_options
def eval(bundle_dir, questions_path, out_dir, provider, fixtures, strict_mock,
         base_url, model, embedding_model):
    """Score the engine against a ground-truth question set."""
    try:
        bundle = load_bundle(bundle_dir)
        gateway = _make_gateway(provider, bundle.schema.dim, fixtures,
                                strict_mock, base_url, model, embedding_model)
        engine = RetrievalEngine(bundle, gateway)
        questions = load_questions(questions_path)
        result = run_eval(questions, engine, out_dir=out_dir)
    except RegqaError as exc:
        _fail("eval", exc)
    click.echo(result.markdown())
    if out_dir:
        click.echo(f"reports written to {out_dir}")


@main.command()
@click.option("--bundle", "bundle_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="ServiceConfig JSON/TOML file; flags override it.")
@with_provider_options
def serve(bundle_dir, host, port, config_path, provider, fixtures,
          strict_mock, base_url, model, embedding_model):
    """Serve POST /query, GET /sections/{id}, GET /health."""
    import uvicorn

    from .service import ServiceConfig, create_app, load_service_config

    try:
        if config_path:
            config = load_service_config(config_path)
            config.bundle_dir = bundle_dir
        else:
            config = ServiceConfig(
                bundle_dir=bundle_dir, host=host, port=port, provider=provider,
                fixtures_dir=fixtures, strict_mock=strict_mock,
                base_url=base_url, model_name=model,
                embedding_model=embedding_model)
        app = create_app(config)
        if app.state.engine is None:
            raise RegqaError(f"bundle at {bundle_dir} failed to load")
    except (RegqaError, ValueError) as exc:
        _fail("serve", exc)
    uvicorn.run(app, host=config.host, port=config.port)


@main.group()
def graph():
    """Navigator-graph inspection commands."""


@graph.command()
@click.option("--bundle", "bundle_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
def stats(bundle_dir):
    """Print node and edge counts by label."""
    try:
        bundle = load_bundle(bundle_dir)
    except RegqaError as exc:
        _fail("graph stats", exc)
    for key, value in bundle.graph.stats().items():
        click.echo(f"{key}: {json.dumps(value)}")


@graph.command()
@click.option("--bundle", "bundle_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Edge-list JSONL output path.")
def export(bundle_dir, out):
    """Export the graph as edge-list JSON lines."""
    try:
        bundle = load_bundle(bundle_dir)
        bundle.graph.export_edge_list(out)
    except RegqaError as exc:
        _fail("graph export", exc)
    click.echo(f"edges written to {out}")


@main.command()
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def openapi(out):
    """Write the service's OpenAPI description."""
    from .service import export_openapi

    export_openapi(out)
    click.echo(f"OpenAPI description written to {out}")


if __name__ == "__main__":
    main()
