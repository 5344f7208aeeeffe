"""Backend-facing pipeline operations: covariate sampling, pair-score fetching,
and intervention generation."""

from __future__ import annotations

from typing import Iterable, Sequence

from ..errors import MalformedResponse
from ..events import Event, normalize_text
from ..matching import CovariateOrigin, CovariateSet, InterventionSet
from ..scores import RawDirectionalScores
from .client import BackendClient
from .stub import MASK_SEPARATOR, SAMPLING_PROMPT_SUFFIX
from .table import TemporalScoreTable
from .wire import GenerateRequest, MaskFillRequest, PerturbRequest

# Sentence-final punctuation ends the cropped event; a newline cuts before itself.
STOP_TOKENS = (".", "!", "?", "\n")

MASK_CANDIDATES = ["before", "after"]


def crop_completion(completion: str) -> str:
    """Crop a generated continuation at the first stop token of its first sentence."""
    cut = len(completion)
    keep_stop = False
    for token in STOP_TOKENS:
        idx = completion.find(token)
        if idx != -1 and idx < cut:
            cut = idx
            keep_stop = token != "\n"
    if cut == len(completion):
        return completion.strip()
    end = cut + 1 if keep_stop else cut
    return completion[:end].strip()


def sample_covariates(
    e1: Event,
    n: int,
    client: BackendClient,
    *,
    max_new_tokens: int = 30,
    temperature: float = 0.9,
    seed: int | None = None,
) -> CovariateSet:
    """Sample events likely to precede ``e1`` by prompting for what came before it.

    Completions are cropped at the first stop token, deduplicated by
    normalized text, and capped at ``n``.
    """
    if n < 1:
        raise ValueError("covariate sample size must be >= 1")
    req = GenerateRequest(
        prompt=e1.text + SAMPLING_PROMPT_SUFFIX,
        n=n,
        max_new_tokens=max_new_tokens,
        temperature=temperature,
        stop=list(STOP_TOKENS),
        seed=seed,
    )
    resp = client.generate(req)
    seen: dict[str, Event] = {}
    for completion in resp.completions:
        if not isinstance(completion, str):
            raise MalformedResponse("/v1/generate returned a non-string completion")
        text = normalize_text(crop_completion(completion))
        if not text or text in seen:
            continue
        seen[text] = Event(text)
        if len(seen) >= n:
            break
    return CovariateSet(events=tuple(seen.values()), origin=CovariateOrigin.SAMPLED)


def generate_interventions(
    e1: Event,
    codes: Sequence[str],
    n_per_code: int,
    client: BackendClient,
) -> InterventionSet:
    """Request counterfactual rewrites of ``e1`` under the given control codes.

    No fluency filtering: the temporal predictor judges the results later.
    Perturbations textually equal to ``e1`` are dropped, as are duplicates.
    """
    if not codes:
        raise ValueError("at least one control code is required")
    resp = client.perturb(PerturbRequest(text=e1.text, control_codes=list(codes), n_per_code=n_per_code))
    seen: dict[str, Event] = {}
    for pert in resp.perturbations:
        text = normalize_text(pert.text)
        if not text or text == e1.text or text in seen:
            continue
        seen[text] = Event(text)
    return InterventionSet(events=tuple(seen.values()))


def mask_template(a: Event, b: Event) -> str:
    return f"{a.text}{MASK_SEPARATOR}{b.text}"


def fetch_pair_scores(
    pairs: Iterable[tuple[Event, Event]],
    client: BackendClient,
    *,
    top_k: int = 5,
    include_null_pairs: bool = False,
) -> TemporalScoreTable:
    """Fetch raw directional scores for both orders of every pair.

    With ``include_null_pairs`` the table additionally covers (event, null) and
    (null, event) for every event seen, which score normalization needs.
    Uncovered candidates score 0. Responses are cached by the client, so a
    warm second fetch issues no transport requests.
    """
    null = Event.null()
    ordered: dict[tuple[str, str], tuple[Event, Event]] = {}

    def add(a: Event, b: Event) -> None:
        if a.id != b.id:
            ordered.setdefault((a.id, b.id), (a, b))

    events_seen: dict[str, Event] = {}
    for a, b in pairs:
        add(a, b)
        add(b, a)
        events_seen[a.id] = a
        events_seen[b.id] = b
    if include_null_pairs:
        for e in events_seen.values():
            if e.is_null:
                continue
            add(e, null)
            add(null, e)

    keys = list(ordered)
    reqs = [
        MaskFillRequest(template=mask_template(*ordered[key]), candidates=list(MASK_CANDIDATES), top_k=top_k)
        for key in keys
    ]
    table = TemporalScoreTable(provenance=client.backend_id)
    for key, resp in zip(keys, client.mask_fill_many(reqs)):
        missing = [c for c in MASK_CANDIDATES if c not in resp.scores or c not in resp.covered]
        if missing:
            raise MalformedResponse(f"/v1/mask_fill response lacks candidates {missing}")
        a, b = ordered[key]
        table.put(
            a,
            b,
            RawDirectionalScores(
                s_after=resp.scores["after"] if resp.covered["after"] else 0.0,
                s_before=resp.scores["before"] if resp.covered["before"] else 0.0,
            ),
        )
    return table
