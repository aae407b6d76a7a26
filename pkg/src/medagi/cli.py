"""``medagi`` command-line tool.

Exit codes: 0 success, 1 domain error (unknown expert, bad corpus, ...),
2 usage error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from medagi.backbone import ComponentSpec, ResourceLedger
from medagi.config import ConfigError, Settings, load_settings
from medagi.embedding import HashingProvider
from medagi.errors import MedagiError
from medagi.evaluation import (
    default_report_path,
    evaluate,
    format_table,
    load_corpus,
    write_outputs,
)
from medagi.registry import ExpertDescriptor, Registry
from medagi.seeds import seed_registry
from medagi.selection import SelectionConfig, select


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (MedagiError, ConfigError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(1)


def _settings(ctx: click.Context) -> Settings:
    return ctx.obj["settings"]


def _registry(ctx: click.Context) -> Registry:
    s = _settings(ctx)
    return Registry.open(HashingProvider(s.embed_dim), s.registry_path)


@click.group(cls=_Group)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file.")
@click.option("--registry", "registry_path", type=click.Path(dir_okay=False), help="Registry file (overrides REGISTRY_PATH).")
@click.pass_context
def main(ctx, config_path, registry_path):
    """Route questions to the best-matching domain expert."""
    ctx.ensure_object(dict)
    ctx.obj["settings"] = load_settings(config_path, registry_path=registry_path)


@main.group()
def expert():
    """Manage registered experts."""


@expert.command("add")
@click.option("--id", "expert_id", required=True)
@click.option("--description", required=True)
@click.option("--adapter-ref", required=True)
@click.option("--name", "display_name", default=None, help="Display name (defaults to the id).")
@click.option("--endpoint", default=None, help="Chat backend URL.")
@click.option("--tag", "tags", multiple=True)
@click.pass_context
def expert_add(ctx, expert_id, description, adapter_ref, display_name, endpoint, tags):
    reg = _registry(ctx)
    d = ExpertDescriptor(
        id=expert_id,
        display_name=display_name or expert_id,
        description=description,
        adapter_ref=adapter_ref,
        backend_endpoint=endpoint,
        tags=tuple(tags),
    )
    reg.register(d)
    click.echo(f"registered {expert_id} (registry version {reg.version})")


@expert.command("list")
@click.pass_context
def expert_list(ctx):
    experts = _registry(ctx).list_experts()
    if not experts:
        click.echo("no experts registered")
        return
    w_id = max(len(e.id) for e in experts)
    w_name = max(len(e.display_name) for e in experts)
    for e in experts:
        summary = e.description if len(e.description) <= 60 else e.description[:57] + "..."
        click.echo(f"{e.id:<{w_id}}  {e.display_name:<{w_name}}  {summary}")


@expert.command("rm")
@click.argument("expert_id")
@click.pass_context
def expert_rm(ctx, expert_id):
    reg = _registry(ctx)
    reg.remove(expert_id)
    click.echo(f"removed {expert_id}")


@main.command()
@click.pass_context
def seed(ctx):
    """Install the built-in SkinGPT-4, XrayChat and PathologyChat experts."""
    added = seed_registry(_registry(ctx))
    click.echo(f"seeded {len(added)} experts" + (f": {', '.join(added)}" if added else ""))


@main.command()
@click.argument("question")
@click.option("--top-k", type=click.IntRange(min=1), default=None)
@click.option("--json", "as_json", is_flag=True, help="Print the decision as JSON.")
@click.pass_context
def route(ctx, question, top_k, as_json):
    """Show which expert QUESTION would be sent to."""
    s = _settings(ctx)
    reg = _registry(ctx)
    config = SelectionConfig(s.threshold, top_k or s.top_k)
    decision = select(question, reg.snapshot, config, reg.provider).truncated(config.top_k)
    if as_json:
        click.echo(decision.to_json())
        return
    flag = "" if decision.confident else "  (below threshold)"
    click.echo(f"selected: {decision.selected}  score={decision.score:.6f}  margin={decision.margin:.6f}{flag}")
    click.echo(f"{'rank':>4}  {'expert':<24} score")
    for i, (eid, score) in enumerate(decision.ranking.entries, 1):
        click.echo(f"{i:>4}  {eid:<24} {score:.6f}")


@main.command()
@click.option("--listen", default=None, help="host:port (overrides LISTEN_ADDR).")
@click.option("--seed/--no-seed", "seed_flag", default=None, help="Seed the registry when empty.")
@click.pass_context
def serve(ctx, listen, seed_flag):
    """Run the HTTP gateway."""
    from dataclasses import replace

    from medagi.gateway import serve as run

    s = _settings(ctx)
    if listen:
        s = replace(s, listen_addr=listen)
    if seed_flag is not None:
        s = replace(s, seed=seed_flag)
    click.echo(f"listening on http://{s.listen_addr}", err=True)
    run(s)


@main.command("eval")
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Report file (default: beside the corpus).")
@click.option("--figures/--no-figures", default=True, help="Render PNG figures next to the report.")
@click.pass_context
def eval_cmd(ctx, corpus, out, figures):
    """Score routing accuracy over a labeled JSONL corpus."""
    s = _settings(ctx)
    reg = _registry(ctx)
    report = evaluate(load_corpus(corpus), reg.snapshot, reg.provider, SelectionConfig(None, s.top_k))
    click.echo(format_table(report))
    paths = write_outputs(report, out or default_report_path(corpus), figures=figures)
    for p in paths:
        click.echo(f"wrote {p}", err=True)


@main.command()
@click.option("--experts", "n_max", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--figure", type=click.Path(dir_okay=False), default=None, help="Also plot the curve to this PNG.")
@click.pass_context
def savings(ctx, n_max, figure):
    """Compare shared-backbone storage against one backbone per expert."""
    s = _settings(ctx)
    ledger = ResourceLedger(s.budget_bytes, s.components)
    for i in range(len(ledger.adapters), n_max):
        ledger.declare_component(ComponentSpec(f"expert{i + 1}_align", "adapter", s.adapter_bytes))
    reports = [ledger.savings_report(n) for n in range(1, n_max + 1)]
    click.echo("n_experts,unified_bytes,naive_bytes,ratio")
    for r in reports:
        click.echo(f"{r.n_experts},{r.unified_bytes},{r.naive_bytes},{r.ratio!r}")
    if figure:
        from medagi.plots import savefig, savings_figure

        click.echo(f"wrote {savefig(savings_figure(reports), Path(figure))}", err=True)


if __name__ == "__main__":
    sys.exit(main())
