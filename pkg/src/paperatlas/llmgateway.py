"""Uniform client for external LLM endpoints, plus a scriptable mock.

Prompt templates use ``$placeholder`` substitution (the template bodies
contain literal JSON braces, so printf-style formatting is unusable).
Responses are free text hardened into JSON maps by
:func:`parse_structured_response`, which tolerates code fences and
leading prose. Transient transport failures are retried with
exponential backoff; credentials come only from the environment.

Environment variables: ``LLM_ENDPOINT``, ``LLM_API_KEY``, ``LLM_MODEL``,
and ``LLM_MOCK_SCRIPT`` (path to a canned-response script, for hermetic
runs without a live endpoint).
"""

from __future__ import annotations

import json
import logging
import os
import string
import time
from dataclasses import dataclass, field

import requests

from .errors import ContractError, TransportError, ValidationError

logger = logging.getLogger(__name__)

PAPER_PARSE_TEMPLATE = """\
You are a scientific paper analysis assistant.

Your task is to read the input paper content (in Markdown format), and output a structured summary in JSON format according to the schema below.

Output JSON schema:
{
  "abstract_summary": "",
  "keywords": [],
  "keywords_explanation": {},
  "methods": "",
  "architecture": "",
  "loss_function": "",
  "training_setup": "",
  "gpu_info": "",
  "datasets": [],
  "metrics": [],
  "datasets_metrics_mapping": {},
  "problem_statement": "",
  "contributions": [],
  "novelty_type": "",
  "experiments": "",
  "results_summary": "",
  "limitations": [],
  "future_work": [],
  "trend_insight": "",
  "field_positioning": "",
  "institution": []
}

Instructions:
1. **Keywords**: Extract 3-10 keywords directly from the paper text. Generate a short explanation for each keyword using LLM summarization.
2. **abstract_summary**: Provide a compressed version of the paper's abstract. Summarize, do not copy verbatim.
3. **Methods / Architecture / Loss / Training**: Summarize core method(s), model architecture, loss function, and training setup.
4. **Datasets / Metrics / Mapping**: List datasets, corresponding metrics, and mapping between datasets and metrics. Use empty lists/dictionaries if missing.
5. **Problem Statement**: Summarize the research problem in 1-2 sentences.
6. **Contributions**: Summarize the core contributions.
7. **Novelty Type**: Infer innovation type:
   - Algorithm / Model
   - Theory / Analysis
   - Benchmark / Dataset
   - Application / System
   - Methodological Improvement
8. **Experiments / Results Summary**: Summarize experiments and main results. Include ablation studies if present.
9. **Limitations / Future Work**: Summarize limitations and future research directions.
10. **Trend Insight**: Provide trend level insights based on the paper.
11. **Field Positioning**: Infer the paper's position in its research field:
    - Foundational Work
    - Methodological Innovation
    - Benchmark / Dataset Contribution
    - Application Validation
    - Trend Extension
12. **Institution**: Extract all author affiliations from the provided.
13. **Gpu_info**: Obtain the gpu resources used in the article, <total_gpu>*<GPU_MODEL>*<training_time>.

Input paper content:
$document
"""

INTENT_PLAN_TEMPLATE = """\
You are a comprehensive query analysis and search planning assistant for a scientific literature knowledge base.

Your primary task is to parse the user's natural language query into a single, structured JSON object that captures all metadata constraints, technical requirements, and generates an optimized plan for vector search.

Output Schema:
{
  "conference": [],
  "year": [],
  "paper_name": [],
  "authors": [],
  "keywords": [],
  "keywords_explanation": {},
  "abstract_summary": "",
  "methods": "",
  "architecture": "",
  "loss_function": "",
  "datasets": [],
  "metrics": [],
  "vector_search_plan": []
}

Parsing Rules:
1. **Conference**: Must the range of the following fixed options: [AAAI, ACL, COLM, COLT, CoRL, CVPR, ECCV, EMNLP, ICCV, ICLR, ICML, IJCAI, INTERSPEECH, IWSLT, MLSYS, NAACL, NDSS, NeurIPS, OSDI, UAI, USENIX-Fast, USENIX-Sec]. If the query does not mention a conference, leave as [].
2. **Year**: Extract the range of year contained in the query.
3. **Authors**: If the query explicitly mentions author names, extract them into a list. Otherwise, leave empty.
4. **Paper Name**: Extract all explicitly mentioned paper titles. Output as a list. Use partial matching if necessary.
5. **Keywords**: Extract only technical terms explicitly mentioned in query. Use `keywords_explanation` to briefly explain each.
6. **Abstract Summary**: One concise sentence describing technical focus from query.
7. **Methods**:
   - Output the **complete method or approach description**, including its application domain if present.
   - Must describe both the **technique** and its **application scope**, not just a keyword.
   - Do NOT shorten into keywords.
8. **Architecture / Loss Function / Datasets / Metrics**: Extract explicitly if mentioned; do not hallucinate.
9. **Vector Search Plan**:
   - Decide which fields to include in the search (`abstract_summary`, `methods`, `keywords`, `datasets`, `metrics`, `architecture`, `loss_function`, etc.).
   - Each entry is an object {"field": <field name>, "weight": <number>}.
   - Only include fields that have non-empty content in the JSON output.
   - Assign a `weight` for each field between 0 and 1 based on **query emphasis**.
   - The weights **must be normalized such that their sum equals 1.0**.
   - Fields are **not mutually exclusive**; e.g., methods can also appear in keywords.
   - Weights should reflect relative importance of each field **according to the query intent**, not by default priority.

If the query covers multiple distinct information needs, decompose it into sub-questions and output a JSON array of such objects, one object per sub-question, in order.

User query:
$question
"""

TOPIC_NAME_TEMPLATE = """\
You are a research topic naming assistant.

Given the top keyword terms of one topic cluster and a sample of paper abstracts from that cluster, produce a short, specific topic name and a one-sentence summary.

Output JSON schema:
{
  "name": "",
  "summary": ""
}

Rules:
1. The name must be at most six words, in title case, describing the shared research theme.
2. The summary must be one sentence describing what the papers in this topic do.
3. Output only the JSON object.

Top terms:
$top_terms

Sample abstracts:
$abstracts
"""


@dataclass
class PromptTemplate:
    name: str
    text: str
    placeholders: tuple[str, ...]


TEMPLATES = {
    "paper_parse": PromptTemplate("paper_parse", PAPER_PARSE_TEMPLATE, ("document",)),
    "intent_plan": PromptTemplate("intent_plan", INTENT_PLAN_TEMPLATE, ("question",)),
    "topic_name": PromptTemplate("topic_name", TOPIC_NAME_TEMPLATE,
                                 ("top_terms", "abstracts")),
}

# Response schemas: key -> (expected type, required). Optional keys default
# to the empty value of their type when a response omits them.
PAPER_PARSE_SCHEMA = {
    "abstract_summary": (str, True),
    "keywords": (list, True),
    "keywords_explanation": (dict, False),
    "methods": (str, False),
    "architecture": (str, False),
    "loss_function": (str, False),
    "training_setup": (str, False),
    "gpu_info": (str, False),
    "datasets": (list, False),
    "metrics": (list, False),
    "datasets_metrics_mapping": (dict, False),
    "problem_statement": (str, False),
    "contributions": (list, False),
    "novelty_type": (str, False),
    "experiments": (str, False),
    "results_summary": (str, False),
    "limitations": (list, False),
    "future_work": (list, False),
    "trend_insight": (str, False),
    "field_positioning": (str, False),
    "institution": (list, False),
}

INTENT_PLAN_SCHEMA = {
    "conference": (list, False),
    "year": (list, False),
    "paper_name": (list, False),
    "authors": (list, False),
    "keywords": (list, False),
    "keywords_explanation": (dict, False),
    "abstract_summary": (str, False),
    "methods": (str, False),
    "architecture": (str, False),
    "loss_function": (str, False),
    "datasets": (list, False),
    "metrics": (list, False),
    "vector_search_plan": (list, True),
}


def render_prompt(template: str | PromptTemplate, inputs: dict[str, str]) -> str:
    """Substitute placeholders; deterministic, schema block untouched."""
    if isinstance(template, str):
        try:
            template = TEMPLATES[template]
        except KeyError:
            raise ValidationError(f"unknown prompt template: {template}")
    try:
        return string.Template(template.text).substitute(
            {k: str(v) for k, v in inputs.items()}
        )
    except KeyError as exc:
        raise ValidationError(f"placeholder: {exc.args[0]}") from exc


_EMPTY_BY_TYPE = {str: "", list: [], dict: {}, int: 0, float: 0.0}


def extract_json(text: str):
    """Decode the first JSON object or array embedded in free text.

    Tolerates code fences and leading prose by scanning for candidate
    start characters and attempting a decode at each.
    """
    decoder = json.JSONDecoder()
    for pos, ch in enumerate(text):
        if ch in "{[":
            try:
                value, _ = decoder.raw_decode(text, pos)
                return value
            except json.JSONDecodeError:
                continue
    raise ContractError("no JSON object found in response", raw_text=text)


def parse_structured_response(text: str, schema: dict) -> dict:
    """Extract and validate a JSON object against a response schema.

    Required keys must be present with the declared type; optional keys
    default to the empty value of their type. Unknown keys pass through
    unchanged so schema-valid maps round-trip exactly.
    """
    value = extract_json(text)
    if not isinstance(value, dict):
        raise ContractError("expected a JSON object", raw_text=text)
    out = dict(value)
    for key, (expected, required) in schema.items():
        if key not in out or out[key] is None:
            if required:
                raise ContractError(f"missing required key: {key}", raw_text=text)
            out[key] = json.loads(json.dumps(_EMPTY_BY_TYPE[expected]))
            continue
        if expected in (int, float):
            if not isinstance(out[key], (int, float)) or isinstance(out[key], bool):
                raise ContractError(f"key {key}: expected a number", raw_text=text)
        elif not isinstance(out[key], expected):
            raise ContractError(
                f"key {key}: expected {expected.__name__}, "
                f"got {type(out[key]).__name__}", raw_text=text,
            )
    return out


@dataclass
class GatewayConfig:
    endpoint: str
    model: str = "default"
    timeout: float = 30.0
    max_retries: int = 2
    backoff_base: float = 1.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValidationError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValidationError("max retries must be >= 0")


def _http_transport(config: GatewayConfig, prompt: str) -> str:
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get("LLM_API_KEY", "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    response = requests.post(
        config.endpoint,
        json={"model": config.model,
              "messages": [{"role": "user", "content": prompt}]},
        headers=headers,
        timeout=config.timeout,
    )
    response.raise_for_status()
    data = response.json()
    return data["choices"][0]["message"]["content"]


def call_with_retry(config: GatewayConfig, prompt: str,
                    transport=None, sleep=time.sleep) -> str:
    """At most 1 + max_retries attempts with exponential backoff.

    The first successful response is returned; when every attempt
    fails, a :class:`TransportError` carries the per-attempt log.
    """
    transport = transport or _http_transport
    attempts: list[str] = []
    total = 1 + config.max_retries
    for attempt in range(total):
        try:
            return transport(config, prompt)
        except Exception as exc:
            attempts.append(f"attempt {attempt + 1}/{total}: {exc}")
            logger.warning("gateway %s", attempts[-1])
            if attempt < total - 1:
                sleep(config.backoff_base * (2 ** attempt))
    raise TransportError(
        f"all {total} attempts failed: {attempts[-1]}", attempts=attempts
    )


class LLMGateway:
    """Blocking client for a chat-completion style HTTP endpoint."""

    def __init__(self, config: GatewayConfig, transport=None, sleep=time.sleep):
        self.config = config
        self._transport = transport
        self._sleep = sleep

    def complete(self, prompt: str, template: str | None = None) -> str:
        return call_with_retry(self.config, prompt,
                               transport=self._transport, sleep=self._sleep)


class MockGateway:
    """Scripted gateway for hermetic tests.

    The script maps a template name (or "*" as a catch-all) to a list of
    entries, each ``{"response": text}`` or ``{"fail": message}``,
    consumed in order; the last entry repeats once exhausted.
    """

    def __init__(self, script: dict[str, list[dict]]):
        self._script = {k: list(v) for k, v in script.items()}
        self.calls: list[str] = []

    @classmethod
    def from_script(cls, path) -> "MockGateway":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def complete(self, prompt: str, template: str | None = None) -> str:
        self.calls.append(template or "?")
        schedule = self._script.get(template or "") or self._script.get("*")
        if not schedule:
            raise TransportError(f"mock has no schedule for template {template!r}")
        entry = schedule.pop(0) if len(schedule) > 1 else schedule[0]
        if "fail" in entry:
            raise TransportError(f"mock failure: {entry['fail']}")
        return entry["response"]


def gateway_from_env():
    """Build a gateway from the environment, or None when unconfigured."""
    mock_path = os.environ.get("LLM_MOCK_SCRIPT")
    if mock_path:
        return MockGateway.from_script(mock_path)
    endpoint = os.environ.get("LLM_ENDPOINT")
    if endpoint:
        return LLMGateway(GatewayConfig(
            endpoint=endpoint,
            model=os.environ.get("LLM_MODEL", "default"),
        ))
    return None
