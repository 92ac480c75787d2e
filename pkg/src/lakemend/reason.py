"""Value decisions: prompt a remote generative model and post-process its
answer, or run the local deterministic matcher/extractor.

The local path gates a candidate on two cosine thresholds (entity similarity
over pivot serializations, attribute-name similarity for the dirty column)
and then extracts the cell under the best-aligned attribute name, so lineage
integrity holds by construction. Both reasoners sit behind the same decision
shape and are interchangeable in the pipeline.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from .errors import (
    CalibrationError,
    ConfigError,
    ModelRefusal,
    ModelTimeout,
    ModelTransportError,
)
from .model import (
    ALL,
    ColumnSelection,
    Tuple,
    fold_name,
    project,
    resolve_pivots,
    serialize_record,
    serialize_tuple,
)
from .semantic import Embedder, cosine

DEFAULT_QUESTION = "what is the value of {attr}"
DEFAULT_MATCH_QUESTION = "Do these two tuples relate to the same exact entity?"


@dataclass(frozen=True)
class PromptTemplate:
    """User-overridable question wording; {attr} is replaced by the dirty column."""

    question: str = DEFAULT_QUESTION
    match_question: str = DEFAULT_MATCH_QUESTION

    def __post_init__(self) -> None:
        if self.question.count("{attr}") != 1:
            raise ConfigError("question template must contain {attr} exactly once")

    def render_question(self, attr: str) -> str:
        return self.question.replace("{attr}", attr)


@dataclass(frozen=True)
class ReasonerDecision:
    matched: bool
    value: Optional[str] = None
    source_attribute: Optional[str] = None
    raw_response: Optional[str] = None
    refused: bool = False


@dataclass(frozen=True)
class LocalReasonerParams:
    """Entity and attribute-name gates, both cosines in [0, 1]."""

    theta_match: float = 0.80
    theta_attr: float = 0.60

    def __post_init__(self) -> None:
        for name, v in (("theta_match", self.theta_match), ("theta_attr", self.theta_attr)):
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")


class RemoteModelClient(Protocol):
    def complete(self, prompt: str) -> str: ...


class HttpModelClient:
    """Generative-model gateway: POST {"prompt", "max_tokens"} -> {"text"}.

    Authentication token comes from the environment variable named at
    construction. Failures are typed so the pipeline can count refusals.
    """

    def __init__(
        self,
        url: str,
        auth_env: str = "LAKEMEND_MODEL_KEY",
        timeout: float = 30.0,
        retries: int = 2,
        max_tokens: int = 256,
    ):
        import httpx

        self.url = url
        self.auth_env = auth_env
        self.timeout = timeout
        self.retries = retries
        self.max_tokens = max_tokens
        headers = {}
        token = os.environ.get(auth_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(timeout=timeout, headers=headers)

    def complete(self, prompt: str) -> str:
        import httpx

        last_exc: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                response = self._client.post(
                    self.url, json={"prompt": prompt, "max_tokens": self.max_tokens}
                )
                response.raise_for_status()
                text = response.json().get("text")
                if text is None:
                    raise ModelTransportError("model response missing 'text'")
                return text
            except httpx.TimeoutException as exc:
                last_exc = ModelTimeout(f"model call timed out after {self.timeout}s")
            except httpx.HTTPError as exc:
                last_exc = ModelTransportError(f"model endpoint failed: {exc}")
            except ValueError as exc:
                last_exc = ModelTransportError(f"model returned malformed JSON: {exc}")
        assert last_exc is not None
        raise last_exc


# -- prompt construction -----------------------------------------------------


def build_standalone_prompt(
    t: Tuple,
    dirty: str,
    pivots: ColumnSelection = ALL,
    template: PromptTemplate = PromptTemplate(),
) -> str:
    """Serialized tuple with an empty dirty slot, followed by the question."""
    serialized = serialize_tuple(t, dirty, pivots)
    return f"{serialized} {template.render_question(t.canonical_name(dirty))}"


def build_pair_prompt(
    query: Tuple,
    candidate: Tuple,
    dirty: str,
    pivots: ColumnSelection = ALL,
    template: PromptTemplate = PromptTemplate(),
) -> str:
    """Both serializations plus the two cascaded questions in one prompt.

    The second question only applies when the first is answered Yes; parsing
    tolerates its answer being absent.
    """
    query_text = serialize_tuple(query, dirty, pivots)
    candidate_text = serialize_record(candidate)
    question = template.render_question(query.canonical_name(dirty))
    return (
        f"Tuple 1: {query_text} Tuple 2: {candidate_text} "
        f"{template.match_question} Answer Yes or No. If Yes, {question}."
    )


# -- response post-processing -------------------------------------------------

_TOKEN_RE = re.compile(r"[A-Za-z]+")
NO_VALUE_SENTINELS = ("no such value", "cannot be found", "unknown")


def postprocess_response(raw: str, dirty: str, require_match: bool = False) -> ReasonerDecision:
    """Extract the match verdict and value from a free-form model response.

    Match: first standalone Yes/No token. Value: text after the last ":", else
    the last non-empty line; trimmed of wrapping quotes and trailing periods;
    sentinel phrases mean no value was found.
    """
    if not raw or not raw.strip():
        return ReasonerDecision(matched=False, value=None, raw_response=raw, refused=True)

    matched = False
    for token in _TOKEN_RE.findall(raw):
        lowered = token.casefold()
        if lowered == "yes":
            matched = True
            break
        if lowered == "no":
            matched = False
            break

    if ":" in raw:
        candidate_value = raw.rsplit(":", 1)[1]
    else:
        lines = [line for line in raw.splitlines() if line.strip()]
        candidate_value = lines[-1]
    value: Optional[str] = _trim_value(candidate_value)
    if value is not None:
        lowered = value.casefold()
        if lowered in ("yes", "no"):
            value = None  # bare verdict echo, not a cell value
        elif any(s in lowered for s in NO_VALUE_SENTINELS):
            value = None
    if require_match and not matched:
        value = None
    return ReasonerDecision(matched=matched, value=value, raw_response=raw)


def _trim_value(text: str) -> Optional[str]:
    value = text.strip()
    while value and value[-1] == ".":
        value = value[:-1].rstrip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        value = value[1:-1].strip()
    return value or None


# -- local matcher / extractor -------------------------------------------------


def _name_words(name: str) -> tuple[str, ...]:
    return tuple(re.findall(r"[^\W_]+", name.casefold(), re.UNICODE))


def attribute_name_similarity(a: str, b: str, embedder: Embedder) -> float:
    """Similarity of two attribute names in [0, 1].

    Equal word sequences score 1.0, as does an initialism of the other name's
    words ("BT" vs "Blood_Type"); otherwise the hashed-gram cosine of the
    space-joined forms. The explicit clauses cover names too short to carry
    grams, which would otherwise embed to the zero vector.
    """
    wa, wb = _name_words(a), _name_words(b)
    if not wa or not wb:
        return 0.0
    if wa == wb:
        return 1.0
    if len(wb) > 1 and "".join(w[0] for w in wb) == "".join(wa):
        return 1.0
    if len(wa) > 1 and "".join(w[0] for w in wa) == "".join(wb):
        return 1.0
    sim = cosine(embedder.embed(" ".join(wa)), embedder.embed(" ".join(wb)))
    return max(0.0, min(1.0, sim))


def best_attribute(dirty: str, candidate: Tuple, embedder: Embedder) -> tuple[str, float]:
    """Candidate attribute name closest to the dirty name; ties by column order."""
    if not candidate.attrs:
        raise ConfigError("candidate tuple has no attributes")
    best_name, best_sim = candidate.attrs[0][0], -1.0
    for name, _ in candidate.attrs:
        sim = attribute_name_similarity(dirty, name, embedder)
        if sim > best_sim:
            best_name, best_sim = name, sim
    return best_name, best_sim


def align_pivot_columns(
    pivot_names: Sequence[str], candidate: Tuple, embedder: Embedder
) -> tuple[str, ...]:
    """For each query pivot, the candidate column with the most similar name.

    Duplicates collapse; candidate column order is preserved.
    """
    chosen: list[str] = []
    for pivot in pivot_names:
        name, _ = best_attribute(pivot, candidate, embedder)
        if fold_name(name) not in {fold_name(c) for c in chosen}:
            chosen.append(name)
    folded = {fold_name(c) for c in chosen}
    return tuple(name for name, _ in candidate.attrs if fold_name(name) in folded)


def entity_similarity(
    query: Tuple,
    candidate: Tuple,
    dirty: str,
    pivots: ColumnSelection,
    embedder: Embedder,
) -> float:
    """Cosine of the pivot serialization against the aligned candidate columns."""
    pivot_names = resolve_pivots(query, dirty, pivots)
    query_text = serialize_record(project(query, pivot_names))
    aligned = align_pivot_columns(pivot_names, candidate, embedder)
    candidate_text = serialize_record(project(candidate, aligned))
    return cosine(embedder.embed(query_text), embedder.embed(candidate_text))


def local_match(
    query: Tuple,
    candidate: Tuple,
    dirty: str,
    pivots: ColumnSelection,
    embedder: Embedder,
    params: LocalReasonerParams = LocalReasonerParams(),
) -> bool:
    """True iff the tuples look like the same entity and the candidate carries
    an attribute aligned with the dirty column."""
    if not candidate.attrs:
        return False
    entity_sim = entity_similarity(query, candidate, dirty, pivots, embedder)
    if entity_sim < params.theta_match:
        return False
    _, name_sim = best_attribute(query.canonical_name(dirty), candidate, embedder)
    return name_sim >= params.theta_attr


def local_extract(
    query: Tuple, dirty: str, candidate: Tuple, embedder: Embedder
) -> tuple[Optional[str], str]:
    """Cell under the best-aligned attribute name, verbatim."""
    name, _ = best_attribute(query.canonical_name(dirty), candidate, embedder)
    return candidate.get(name), name


def local_decide(
    query: Tuple,
    candidate: Tuple,
    dirty: str,
    pivots: ColumnSelection,
    embedder: Embedder,
    params: LocalReasonerParams,
) -> ReasonerDecision:
    """Matcher then extractor, as one decision."""
    if not local_match(query, candidate, dirty, pivots, embedder, params):
        return ReasonerDecision(matched=False)
    value, source = local_extract(query, dirty, candidate, embedder)
    return ReasonerDecision(matched=True, value=value, source_attribute=source)


# -- threshold calibration ------------------------------------------------------


@dataclass(frozen=True)
class LabeledPair:
    query: Tuple
    candidate: Tuple
    is_match: bool


THRESHOLD_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


def calibrate(
    labeled: Sequence[LabeledPair],
    dirty: str,
    pivots: ColumnSelection,
    embedder: Embedder,
) -> LocalReasonerParams:
    """Grid-search both thresholds over {0.05..0.95} maximizing F1 on the pairs.

    Ties prefer the stricter gate: higher theta_match, then higher theta_attr.
    Pair features are computed once; only the comparisons sweep the grid.
    """
    if len(labeled) < 2:
        raise CalibrationError("calibration needs at least two labeled pairs")
    labels = {pair.is_match for pair in labeled}
    if len(labels) < 2:
        raise CalibrationError("calibration needs both match and non-match examples")

    features: list[tuple[float, float, bool]] = []
    for pair in labeled:
        entity_sim = entity_similarity(pair.query, pair.candidate, dirty, pivots, embedder)
        _, name_sim = best_attribute(pair.query.canonical_name(dirty), pair.candidate, embedder)
        features.append((entity_sim, name_sim, pair.is_match))

    best = (-1.0, -1.0, -1.0)  # (f1, theta_match, theta_attr)
    for theta_match in THRESHOLD_GRID:
        for theta_attr in THRESHOLD_GRID:
            tp = fp = fn = 0
            for entity_sim, name_sim, truth in features:
                predicted = entity_sim >= theta_match and name_sim >= theta_attr
                if predicted and truth:
                    tp += 1
                elif predicted:
                    fp += 1
                elif truth:
                    fn += 1
            f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
            if (f1, theta_match, theta_attr) > best:
                best = (f1, theta_match, theta_attr)
    return LocalReasonerParams(theta_match=best[1], theta_attr=best[2])
