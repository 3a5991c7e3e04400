"""Command-line client for the solver service.

Every subcommand talks HTTP to the FastAPI app: by default an in-process
instance (no server needed), or a remote one via ``--url``.  Set SFP_LOG to
DEBUG/INFO/... for diagnostics on stderr; file outputs are deterministic.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from .io import dump_json
from .service import create_app
from .service.app import configure_logging
from .validation import SUITES

_KINDS = ("euclidean2d", "euclidean3d", "grid", "clustered")


def _client(url: str | None) -> httpx.Client:
    if url:
        return httpx.Client(base_url=url, timeout=600.0)
    return httpx.Client(
        transport=httpx.ASGITransport(app=create_app()),
        base_url="http://sfp.invalid",
        timeout=600.0,
    )


def _post(ctx: click.Context, path: str, payload: dict) -> dict:
    with _client(ctx.obj["url"]) as client:
        resp = client.post(path, json=payload)
    if resp.status_code != 200:
        raise click.ClickException(f"{path} failed [{resp.status_code}]: {resp.text}")
    return resp.json()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _gen_options(f):
    f = click.option("--kind", type=click.Choice(_KINDS), default="euclidean2d", show_default=True)(f)
    f = click.option("--pairs", type=int, default=3, show_default=True, help="terminal pairs per instance")(f)
    f = click.option("--spread", type=int, default=40, show_default=True, help="coordinate range")(f)
    f = click.option("--extra", type=int, default=4, show_default=True, help="demand-free Steiner pool points")(f)
    return f


def _config_options(f):
    f = click.option("--seed", type=int, default=0, show_default=True)(f)
    f = click.option("--eps", type=float, default=0.5, show_default=True)(f)
    f = click.option("--s", "scale", type=int, default=4, show_default=True, help="net hierarchy scale factor")(f)
    f = click.option("--q0", type=float, default=None, help="sparsity cutoff; calibrated from a warm-up scan when omitted")(f)
    f = click.option("--trials", type=int, default=8, show_default=True, help="independent decompositions per sparse solve")(f)
    f = click.option("--caps.r", "caps_r", type=int, default=4, show_default=True, help="active-portal cap")(f)
    f = click.option("--caps.rho", "caps_rho", type=int, default=8, show_default=True, help="effective-cell cap")(f)
    f = click.option("--caps.edges", "caps_edges", type=int, default=6, show_default=True, help="cross-child edge cap")(f)
    f = click.option("--mode", type=click.Choice(["practical", "theory"]), default="practical", show_default=True)(f)
    f = click.option("--dim-bound", type=int, default=None, help="doubling dimension bound; default: the instance's own")(f)
    return f


def _config_payload(seed, eps, scale, q0, trials, caps_r, caps_rho, caps_edges, mode, dim_bound) -> dict:
    return {
        "eps": eps,
        "dim_bound": dim_bound,
        "s": scale,
        "q0": q0,
        "trials": trials,
        "mode": mode,
        "seed": seed,
        "caps": {"r": caps_r, "rho": caps_rho, "edges": caps_edges},
    }


@click.group()
@click.option("--url", default=None, help="solver service URL; default runs the service in-process")
@click.pass_context
def main(ctx: click.Context, url: str | None) -> None:
    """Steiner forest solver for finite doubling metrics."""
    configure_logging()
    ctx.ensure_object(dict)
    ctx.obj["url"] = url


@main.command()
@_gen_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=int, default=1, show_default=True, help="instances (seeds seed..seed+count-1)")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="output path (default: stdout)")
@click.pass_context
def gen(ctx, kind, pairs, spread, extra, seed, count, out) -> None:
    """Generate deterministic benchmark instances as JSON."""
    docs = []
    for offset in range(count):
        payload = {
            "kind": kind,
            "n_pairs": pairs,
            "spread": spread,
            "seed": seed + offset,
            "n_extra": extra,
        }
        docs.append(_post(ctx, "/generate", payload))
    _emit(dump_json(docs[0] if count == 1 else docs), out)


def _load_instance_doc(path: str) -> dict:
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict) and "instance" in doc:
        doc = doc["instance"]
    if not isinstance(doc, dict) or ("matrix" not in doc and "points" not in doc):
        raise click.ClickException(f"{path} does not look like an instance document")
    return doc


@main.command()
@click.argument("instance_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--solver", type=click.Choice(["oracle", "gw", "ptas"]), default="ptas", show_default=True)
@_config_options
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="result JSON path (default: stdout)")
@click.pass_context
def solve(ctx, instance_path, solver, seed, eps, scale, q0, trials, caps_r, caps_rho, caps_edges, mode, dim_bound, out) -> None:
    """Solve one instance file and emit the result record."""
    payload = {
        "instance": _load_instance_doc(instance_path),
        "solver": solver,
        "config": _config_payload(seed, eps, scale, q0, trials, caps_r, caps_rho, caps_edges, mode, dim_bound),
    }
    result = _post(ctx, "/solve", payload)
    _emit(dump_json(result), out)
    if not result.get("feasible", False):
        raise SystemExit(3)


@main.command()
@_gen_options
@click.option("--count", type=int, default=5, show_default=True, help="instances (seeds seed..seed+count-1)")
@_config_options
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path (default: stdout)")
@click.pass_context
def compare(ctx, kind, pairs, spread, extra, count, seed, eps, scale, q0, trials, caps_r, caps_rho, caps_edges, mode, dim_bound, out) -> None:
    """Run oracle/primal-dual/pipeline on generated instances; emit the ratio table."""
    specs = [
        {"kind": kind, "n_pairs": pairs, "spread": spread, "seed": seed + i, "n_extra": extra}
        for i in range(count)
    ]
    payload = {
        "specs": specs,
        "config": _config_payload(seed, eps, scale, q0, trials, caps_r, caps_rho, caps_edges, mode, dim_bound),
    }
    result = _post(ctx, "/compare", payload)
    _emit(result["csv"], out)


@main.command()
@click.option("--suite", "suites", type=click.Choice(SUITES), multiple=True, help="suites to run (default: all)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--samples", type=int, default=None, help="sample count override for the statistical suites")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="report JSON path")
@click.pass_context
def validate(ctx, suites, seed, samples, out) -> None:
    """Run the structural invariant suites; nonzero exit on any failure."""
    payload = {"suites": list(suites) or None, "seed": seed, "samples": samples}
    result = _post(ctx, "/validate", payload)
    for report in result["reports"]:
        click.echo(f"{'ok  ' if report['ok'] else 'FAIL'} {report['name']}")
    if out:
        dump_json(result, out)
    if not result["ok"]:
        raise SystemExit(1)


if __name__ == "__main__":  # pragma: no cover
    main()
