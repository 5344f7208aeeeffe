"""Operator CLI: a thin client of the engine service.

Every data-path command builds a request and sends it over HTTP; by default
the service app is mounted in-process, with --service-url the same requests
go to a remote instance. Exit codes: 0 ok, 2 config error, 3 backend error,
4 data error.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx

from .errors import ConfigError, DataError, RockError

_EXIT_BY_STATUS = {400: 2, 404: 2, 422: 4, 502: 3, 503: 3}

_FORMAT_BY_SUFFIX = {".xml": "copa-xml", ".tsv": "glucose-d1-tsv", ".json": "suite-json"}


def _fail(error_class: str, message: str, exit_code: int):
    click.echo(json.dumps({"error": {"class": error_class, "message": message}}), err=True)
    sys.exit(exit_code)


def _call(ctx_opts: dict, method: str, path: str, payload: dict | None = None) -> dict:
    """Send one request to the service (in-process unless --service-url is set)."""

    async def go() -> httpx.Response:
        if ctx_opts.get("service_url"):
            async with httpx.AsyncClient(base_url=ctx_opts["service_url"], timeout=600.0) as client:
                return await _request(client, method, path, payload)
        from .service.app import ServiceSettings, create_app

        settings = ServiceSettings(
            backend_url=ctx_opts.get("backend_url"),
            world_path=ctx_opts.get("world"),
            cache_dir=ctx_opts.get("cache_dir"),
        )
        transport = httpx.ASGITransport(app=create_app(settings))
        async with httpx.AsyncClient(transport=transport, base_url="http://rock.local", timeout=600.0) as client:
            return await _request(client, method, path, payload)

    try:
        resp = asyncio.run(go())
    except RockError as exc:
        _fail(exc.error_class, str(exc), exc.exit_code)
    except httpx.HTTPError as exc:
        _fail("BackendUnavailable", f"service unreachable: {exc}", 3)
    if resp.status_code >= 400:
        try:
            error = resp.json()["error"]
            _fail(error.get("class", "Error"), error.get("message", resp.text), _EXIT_BY_STATUS.get(resp.status_code, 1))
        except (KeyError, ValueError):
            _fail("Error", resp.text, _EXIT_BY_STATUS.get(resp.status_code, 1))
    return resp.json()


async def _request(client: httpx.AsyncClient, method: str, path: str, payload: dict | None):
    if method == "GET":
        return await client.get(path)
    return await client.post(path, json=payload)


def connection_options(fn):
    fn = click.option("--service-url", envvar="ROCK_SERVICE_URL", default=None, help="Remote engine service; default is in-process.")(fn)
    fn = click.option("--backend-url", envvar="ROCK_BACKEND_URL", default=None, help="Model backend URL.")(fn)
    fn = click.option("--world", type=click.Path(exists=False), default=None, help="World or suite JSON for the embedded stub backend.")(fn)
    fn = click.option("--cache-dir", envvar="ROCK_CACHE_DIR", default=None, help="Response cache directory.")(fn)
    return fn


def config_options(fn):
    fn = click.option("--kind", type=click.Choice(["l1", "l2", "temporal", "unbalanced", "misspecified"]), default="l2", show_default=True)(fn)
    fn = click.option("--p", type=click.Choice(["1", "2"]), default="1", help="Norm for the balanced distance (kind l1/l2 pins it).")(fn)
    fn = click.option("--epsilon", type=float, default=0.05, show_default=True)(fn)
    fn = click.option("--norms", default="", help="Normalization subset over {D,F,S,Q,C,E}, e.g. FSQ.")(fn)
    fn = click.option("--q-form", type=click.Choice(["as-written-reciprocal", "conditional"]), default="as-written-reciprocal")(fn)
    fn = click.option("--orientation", type=click.Choice(["as-written", "swapped"]), default="as-written")(fn)
    fn = click.option("--role-convention", type=click.Choice(["premise-as-cause", "choice-as-cause"]), default="premise-as-cause")(fn)
    fn = click.option("--n-covariates", type=int, default=100, show_default=True)(fn)
    fn = click.option("--top-k", type=int, default=None)(fn)
    fn = click.option("--codes", default=None, help="Comma-separated perturbation control codes; default all.")(fn)
    fn = click.option("--n-per-code", type=int, default=3, show_default=True)(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    return fn


def _config_payload(kw: dict) -> dict:
    payload = {
        "kind": kw["kind"],
        "p": int(kw["p"]),
        "epsilon": kw["epsilon"],
        "norms": kw["norms"],
        "q_form": kw["q_form"],
        "orientation": kw["orientation"],
        "role_convention": kw["role_convention"],
        "n_covariates": kw["n_covariates"],
        "n_per_code": kw["n_per_code"],
        "seed": kw["seed"],
    }
    if kw.get("top_k") is not None:
        payload["top_k"] = kw["top_k"]
    if kw.get("codes"):
        payload["codes"] = kw["codes"].split(",")
    return payload


def _conn(kw: dict) -> dict:
    return {k: kw.get(k) for k in ("service_url", "backend_url", "world", "cache_dir")}


def _dataset_payload(path: str, fmt: str | None, name: str | None) -> dict:
    p = Path(path)
    if fmt is None:
        fmt = _FORMAT_BY_SUFFIX.get(p.suffix.lower())
        if fmt is None:
            raise ConfigError(f"cannot infer dataset format from {p.suffix!r}; pass --format")
    try:
        content = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    return {"format": fmt, "content": content, "name": name or p.stem}


def _write(path: Path, data: bytes | str):
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    click.echo(f"wrote {path}")


@click.group()
def main():
    """Causal scoring between events via temporal-propensity matching."""


@main.command()
@click.option("--e1", required=True, help="Candidate cause event text.")
@click.option("--e2", required=True, help="Candidate effect event text.")
@click.option("--explain", is_flag=True, help="Print covariates, interventions, and distances.")
@click.option("--json", "as_json", is_flag=True, help="Print the raw JSON response.")
@click.option("--out", type=click.Path(), default=None, help="Also write the JSON response here.")
@config_options
@connection_options
def score(e1, e2, explain, as_json, out, **kw):
    """Score how strongly E1 causes E2."""
    body = _call(_conn(kw), "POST", "/api/score", {"e1": e1, "e2": e2, "config": _config_payload(kw), "explain": explain})
    if out:
        _write(Path(out), json.dumps(body, indent=2, sort_keys=True))
    if as_json:
        click.echo(json.dumps(body, indent=2, sort_keys=True))
        return
    marker = "  [fallback: no matched interventions, temporal score used]" if body["fallback_used"] else ""
    click.echo(f"delta: {body['value']:.6g}{marker}")
    click.echo(f"matched: {body['matched_count']} of {body['candidate_count']} interventions")
    if explain and body.get("explain"):
        ex = body["explain"]
        click.echo(f"f(E1 before E2): {ex['treatment_precedes_effect']:.6g}")
        click.echo(f"covariates ({len(ex['covariates'])}):")
        for text in ex["covariates"]:
            click.echo(f"  - {text}")
        click.echo(f"interventions ({len(ex['interventions'])}):")
        click.echo("  distance    matched  f(A before E2)  text")
        for row in ex["interventions"]:
            dist = "-" if row["distance"] is None else f"{row['distance']:.6f}"
            matched = {True: "yes", False: "no", None: "-"}[row["matched"]]
            click.echo(f"  {dist:<11} {matched:<8} {row['precedes_effect']:<15.6f} {row['text']}")


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["copa-xml", "glucose-d1-tsv", "suite-json", "dataset-json"]), default=None)
@click.option("--name", default=None)
@click.option("--out", type=click.Path(), default=None, help="Output prefix for report/CSV/manifest files.")
@config_options
@connection_options
def evaluate(dataset_path, fmt, name, out, **kw):
    """Evaluate accuracy on a benchmark dataset."""
    payload = {"dataset": _dataset_payload(dataset_path, fmt, name), "config": _config_payload(kw)}
    body = _call(_conn(kw), "POST", "/api/evaluate", payload)
    report = body["report"]
    click.echo(
        f"accuracy: {report['accuracy']:.4f} on {report['n']} instances "
        f"(random baseline 0.5 ± {report['random_baseline_std']:.3f})"
    )
    click.echo(f"config fingerprint: {report['config_fingerprint']}")
    if out:
        prefix = Path(out)
        _write(prefix.with_suffix(".report.json"), json.dumps(report, sort_keys=True, separators=(",", ":")))
        _write(prefix.with_suffix(".csv"), body["csv"])
        _write(prefix.with_suffix(".manifest.json"), json.dumps(body["manifest"], indent=2, sort_keys=True))


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["copa-xml", "glucose-d1-tsv", "suite-json", "dataset-json"]), default=None)
@click.option("--axis", type=click.Choice(["epsilon", "covariate-count"]), default="epsilon", show_default=True)
@click.option("--grid", default=None, help="Comma-separated grid; default is the built-in threshold grid.")
@click.option("--over-combos", is_flag=True, help="Emit every combo's curve plus a per-point max row.")
@click.option("--out", type=click.Path(), default=None)
@config_options
@connection_options
def sweep(dataset_path, fmt, axis, grid, over_combos, out, **kw):
    """Evaluate across a parameter grid, reusing one frozen score table."""
    grid_values = [float(x) for x in grid.split(",")] if grid else None
    payload = {
        "dataset": _dataset_payload(dataset_path, fmt, None),
        "config": _config_payload(kw),
        "axis": axis,
        "grid": grid_values,
        "over_combos": over_combos,
    }
    body = _call(_conn(kw), "POST", "/api/sweep", payload)
    for row in body["rows"]:
        if "combo" in row:
            click.echo(f"{row['grid_point']:.6g}\t{row['combo']}\t{row['accuracy']:.4f}")
        else:
            click.echo(f"{row['grid_point']:.6g}\t{row['accuracy']:.4f}")
    if out:
        _write(Path(out), body["csv"])


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["copa-xml", "glucose-d1-tsv", "suite-json", "dataset-json"]), default=None)
@click.option("--kinds", default="l1,l2", show_default=True)
@click.option("--out", type=click.Path(), default=None)
@config_options
@connection_options
def ablate(dataset_path, fmt, kinds, out, **kw):
    """Run every valid normalization combo (30 rows) against the dataset."""
    payload = {
        "dataset": _dataset_payload(dataset_path, fmt, None),
        "config": _config_payload(kw),
        "kinds": kinds.split(","),
    }
    body = _call(_conn(kw), "POST", "/api/ablate", payload)
    click.echo(f"{len(body['rows'])} combos evaluated")
    for label, row in body["rows"].items():
        cells = "\t".join(f"{k}={v:.4f}" for k, v in row.items())
        click.echo(f"{label:>6}\t{cells}")
    if out:
        _write(Path(out), body["csv"])


@main.command("verify-proposition")
@click.option("--worlds", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--k-max", type=int, default=4, show_default=True)
@click.option("--q-form", type=click.Choice(["as-written-reciprocal", "conditional"]), default="as-written-reciprocal")
@connection_options
def verify_proposition(worlds, seed, k_max, q_form, **kw):
    """Check the perfect-matching error bound on seeded random worlds."""
    body = _call(
        _conn(kw), "POST", "/api/verify-proposition",
        {"worlds": worlds, "seed": seed, "k_max": k_max, "q_form": q_form},
    )
    click.echo(f"{body['held']}/{body['worlds']} hold")
    click.echo(f"max two-route disagreement: {body['max_route_disagreement']:.3e}")
    if not body["all_hold"]:
        sys.exit(1)


@main.command("make-suite")
@click.option("--n", "n_instances", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--epsilon", type=float, default=0.06, show_default=True)
@click.option("--confounding", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@connection_options
def make_suite(n_instances, seed, epsilon, confounding, out, **kw):
    """Generate a certified confounding suite (instances + stub world + certificates)."""
    from .backend.wire import canonical_json

    body = _call(
        _conn(kw), "POST", "/api/make-suite",
        {"n_instances": n_instances, "seed": seed, "epsilon": epsilon, "confounding_strength": confounding},
    )
    _write(Path(out), canonical_json(body["suite"]))
    for kind, acc in body["certified_accuracy"].items():
        click.echo(f"certified {kind}: {acc:.4f}")


@main.group()
def cache():
    """Inspect or compact the response caches."""


@cache.command("stats")
@connection_options
def cache_stats(**kw):
    conn = _conn(kw)
    if not conn.get("cache_dir") and not conn.get("service_url"):
        _fail("ConfigError", "cache stats needs --cache-dir (or ROCK_CACHE_DIR)", 2)
    body = _call(conn, "GET", "/api/cache/stats")
    click.echo(json.dumps(body["caches"], indent=2, sort_keys=True))


@cache.command("compact")
@connection_options
def cache_compact(**kw):
    conn = _conn(kw)
    if not conn.get("cache_dir") and not conn.get("service_url"):
        _fail("ConfigError", "cache compact needs --cache-dir (or ROCK_CACHE_DIR)", 2)
    body = _call(conn, "POST", "/api/cache/compact")
    click.echo(f"bytes saved: {body['bytes_saved']}")
    click.echo(json.dumps(body["caches"], indent=2, sort_keys=True))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8320, show_default=True)
@connection_options
def serve(host, port, **kw):
    """Run the engine service over HTTP."""
    import uvicorn

    from .service.app import ServiceSettings, create_app

    conn = _conn(kw)
    try:
        settings = ServiceSettings(
            backend_url=conn.get("backend_url"), world_path=conn.get("world"), cache_dir=conn.get("cache_dir")
        )
        app = create_app(settings)
    except RockError as exc:
        _fail(exc.error_class, str(exc), exc.exit_code)
    uvicorn.run(app, host=host, port=port)


@main.command("stub-serve")
@click.option("--world", required=True, type=click.Path())
@click.option("--orientation", type=click.Choice(["as-written", "swapped"]), default="as-written")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
def stub_serve(world, orientation, host, port):
    """Serve the deterministic stub backend (the /v1 wire protocol) from a world file."""
    import uvicorn

    from .backend.stub import StubBackend, create_stub_app
    from .scores import Orientation
    from .service.app import load_universe

    try:
        universe = load_universe(world)
    except RockError as exc:
        _fail(exc.error_class, str(exc), exc.exit_code)
    app = create_stub_app(StubBackend(universe, orientation=Orientation(orientation)))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
