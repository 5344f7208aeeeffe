"""Golden request/response schema suite for the wire protocol.

Any backend claiming protocol support must pass this suite unchanged; the
stub and any real model server run the identical checks. The runner takes a
plain httpx-compatible client so it works against in-process transports,
ASGI test clients, and live servers alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol


class HttpLike(Protocol):
    def get(self, url: str): ...

    def post(self, url: str, json: dict): ...


@dataclass(frozen=True)
class ConformanceResult:
    name: str
    ok: bool
    detail: str = ""


GOLDEN_GENERATE = {
    "prompt": "Alice walked into a restaurant. Before that,",
    "n": 4,
    "max_new_tokens": 30,
    "temperature": 0.9,
    "stop": [".", "!", "?", "\n"],
    "seed": 11,
}

GOLDEN_MASK_FILL = {
    "template": "Alice walked into a restaurant. <MASK> Alice ordered a pizza.",
    "candidates": ["before", "after"],
    "top_k": 5,
}

GOLDEN_PERTURB = {
    "text": "Alice walked into a restaurant.",
    "control_codes": ["negation", "lexical"],
    "n_per_code": 2,
}


def _check(name: str, condition: bool, detail: str = "") -> ConformanceResult:
    return ConformanceResult(name=name, ok=bool(condition), detail="" if condition else detail)


def run_conformance(client: HttpLike) -> list[ConformanceResult]:
    results: list[ConformanceResult] = []

    resp = client.get("/v1/info")
    results.append(_check("info.status", resp.status_code == 200, f"status {resp.status_code}"))
    if resp.status_code == 200:
        body = resp.json()
        results.append(_check("info.backend_id", isinstance(body.get("backend_id"), str) and body["backend_id"]))
        results.append(
            _check(
                "info.capabilities",
                {"generate", "mask_fill", "perturb"} <= set(body.get("capabilities", [])),
                f"capabilities {body.get('capabilities')}",
            )
        )
        results.append(_check("info.model_fingerprint", isinstance(body.get("model_fingerprint"), str)))

    resp = client.post("/v1/generate", json=GOLDEN_GENERATE)
    results.append(_check("generate.status", resp.status_code == 200, f"status {resp.status_code}"))
    if resp.status_code == 200:
        body = resp.json()
        comps = body.get("completions")
        results.append(_check("generate.completions_list", isinstance(comps, list)))
        results.append(
            _check(
                "generate.completions_strings",
                isinstance(comps, list) and all(isinstance(c, str) for c in comps),
            )
        )
        results.append(
            _check(
                "generate.completions_capped",
                isinstance(comps, list) and len(comps) <= GOLDEN_GENERATE["n"],
                f"{len(comps) if isinstance(comps, list) else '?'} completions for n={GOLDEN_GENERATE['n']}",
            )
        )

    bad_generate = dict(GOLDEN_GENERATE, n=0)
    resp = client.post("/v1/generate", json=bad_generate)
    results.append(_check("generate.rejects_nonpositive_n", resp.status_code == 400, f"status {resp.status_code}"))

    resp = client.post("/v1/mask_fill", json=GOLDEN_MASK_FILL)
    results.append(_check("mask_fill.status", resp.status_code == 200, f"status {resp.status_code}"))
    if resp.status_code == 200:
        body = resp.json()
        scores, covered = body.get("scores"), body.get("covered")
        wanted = set(GOLDEN_MASK_FILL["candidates"])
        results.append(
            _check(
                "mask_fill.total_maps",
                isinstance(scores, dict)
                and isinstance(covered, dict)
                and set(scores) == wanted
                and set(covered) == wanted,
                f"scores keys {sorted(scores or [])}, covered keys {sorted(covered or [])}",
            )
        )
        results.append(
            _check(
                "mask_fill.scores_nonnegative_finite",
                isinstance(scores, dict)
                and all(
                    isinstance(v, (int, float)) and math.isfinite(v) and v >= 0 for v in scores.values()
                ),
            )
        )
        results.append(
            _check(
                "mask_fill.covered_booleans",
                isinstance(covered, dict) and all(isinstance(v, bool) for v in covered.values()),
            )
        )

    bad_mask = dict(GOLDEN_MASK_FILL, template="no mask placeholder here")
    resp = client.post("/v1/mask_fill", json=bad_mask)
    results.append(_check("mask_fill.rejects_missing_mask", resp.status_code == 400, f"status {resp.status_code}"))

    two_masks = dict(GOLDEN_MASK_FILL, template="a <MASK> b <MASK> c")
    resp = client.post("/v1/mask_fill", json=two_masks)
    results.append(_check("mask_fill.rejects_two_masks", resp.status_code == 400, f"status {resp.status_code}"))

    resp = client.post("/v1/perturb", json=GOLDEN_PERTURB)
    results.append(_check("perturb.status", resp.status_code == 200, f"status {resp.status_code}"))
    if resp.status_code == 200:
        body = resp.json()
        perts = body.get("perturbations")
        ok_shape = isinstance(perts, list) and all(
            isinstance(p, dict) and isinstance(p.get("text"), str) and isinstance(p.get("code"), str)
            for p in perts
        )
        results.append(_check("perturb.shape", ok_shape))
        results.append(
            _check(
                "perturb.codes_subset",
                ok_shape and all(p["code"] in GOLDEN_PERTURB["control_codes"] for p in perts),
            )
        )

    bad_perturb = dict(GOLDEN_PERTURB, control_codes=["made-up-code"])
    resp = client.post("/v1/perturb", json=bad_perturb)
    results.append(_check("perturb.rejects_unknown_code", resp.status_code == 400, f"status {resp.status_code}"))

    return results


def assert_conformant(client: HttpLike) -> None:
    failures = [r for r in run_conformance(client) if not r.ok]
    if failures:
        lines = "\n".join(f"  {r.name}: {r.detail}" for r in failures)
        raise AssertionError(f"protocol conformance failures:\n{lines}")
