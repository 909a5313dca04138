"""Synthetic long-context SFT data: QA, RAG and recursive summarization.

Generation goes through a small client interface (``complete(prompt) ->
str``). Every request/response pair is appended to a :class:`RequestLog`;
running the same assembly against :class:`ReplayClient` built from that log
reproduces the examples byte for byte without contacting the service.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from .corpus import TOKEN_DTYPE, Document, WhitespaceTokenizer
from .packer import INSTRUCTION, RESPONSE, SftExample

log = logging.getLogger(__name__)

QA_PROMPT = """Given the following snippet of a book, ask a relevant question and provide the answer. The question and the answer should follow the following rules:

(1) The question should be specific enough that it can only be answered with the snippet. The question should also be interesting and intellectual enough that a curious reader of the book would ask about it.
(2) The question and the answer should be comprehensible given just the whole book without highlighting the snippet. With that being said, the question should NOT refer to the snippet directly (e.g., do NOT say things like "Question: given the conversation in the snippet, what ..."). The answer also should not mention "the snippet …" explicitly (assuming that the snippet is never provided), but it can copy the snippet content as a reference when answering the question.
(3) The answer should be concise but also should provide references to the book when needed. For example, “Wellington Yueh betrayed the Atreides, as the book mentioned, '...'".

*** Start of the snippet ***

{snippet}

*** End of the snippet ***

Before generating the question and the answer, first reason about what this snippet is about. In your generation, stick to the following format:

Reasoning: this snippet is about ...
Question: ...
Answer: ...
"""

SNIPPET_START = "*** Start of the snippet ***\n\n"
SNIPPET_END = "\n\n*** End of the snippet ***"

QUESTION_PROMPTS = (
    "Given the document, please answer the question.",
    "Here is a piece of text; answer the following question based on it.",
    "Please answer the question using the provided content.",
    "Based on the given passage, respond to the question.",
    "Read the snippet and answer the question that follows.",
    "Using the provided text, answer the following question.",
)

QA_LAYOUTS = (
    "{prompt}\n\n{documents}\n\nQuestion: {question}",
    "{prompt}\n\n==== document starts ====\n{documents}\n==== document ends ====\n\nQuestion: {question}",
    "{prompt}\n\n{documents}\n\n{question}",
    "{prompt} Question: {question}\n\n{documents}",
    "{prompt} {question}\n\n{documents}",
    "{prompt}\n\n{question}\n\n{documents}",
)

SUMMARY_PROMPT = (
    "Summarize the following part of a book. Keep the main events, characters and ideas, "
    "and write at most {budget} words.\n\n{text}\n\nSummary:"
)
MERGE_PROMPT = (
    "The following are consecutive summaries of parts of a book. Combine them into one "
    "coherent summary of at most {budget} words.\n\n{text}\n\nSummary:"
)
SUMMARY_INSTRUCTIONS = (
    "Summarize the book above.",
    "Write a summary of the given book.",
    "Please provide a concise summary of the text.",
)
SUMMARY_LAYOUTS = (
    "{documents}\n\n{prompt}",
    "{prompt}\n\n{documents}",
)

_PLACEHOLDERS = ("prompt", "documents", "question")
_SNIPPET_REF = re.compile(r"\bsnippets?\b", re.IGNORECASE)


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    prompt: str
    layout: str

    def __post_init__(self):
        for name in _PLACEHOLDERS:
            n = self.layout.count("{" + name + "}")
            if n > 1:
                raise ValueError(f"template {self.id}: placeholder {{{name}}} appears {n} times")
        if self.layout.count("{documents}") != 1:
            raise ValueError(f"template {self.id}: layout needs exactly one {{documents}}")

    def render(self, documents: str, question: str = "") -> str:
        out = self.layout
        for name, value in (("prompt", self.prompt), ("question", question), ("documents", documents)):
            out = out.replace("{" + name + "}", value)
        return out


def qa_templates() -> List[PromptTemplate]:
    return [
        PromptTemplate(f"q{i}l{j}", p, lay)
        for i, p in enumerate(QUESTION_PROMPTS)
        for j, lay in enumerate(QA_LAYOUTS)
    ]


def summary_templates() -> List[PromptTemplate]:
    return [
        PromptTemplate(f"s{i}l{j}", p, lay)
        for i, p in enumerate(SUMMARY_INSTRUCTIONS)
        for j, lay in enumerate(SUMMARY_LAYOUTS)
    ]


def _rng(seed: int, *salt: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *salt])))


def _doc_salt(doc_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(doc_id.encode(), digest_size=4).digest(), "little")


# --- generation service ----------------------------------------------------


class Completer(Protocol):
    def complete(self, prompt: str) -> str: ...


class GenerationError(RuntimeError):
    pass


@dataclass
class GenerationClient:
    """Chat-completions style HTTP client.

    The bearer token is read from the environment variable named by
    ``token_env``; it is never stored in configuration.
    """

    endpoint: str
    model: str = "Llama-3-8B-Instruct"
    temperature: float = 0.8
    max_tokens: int = 1024
    max_attempts: int = 3
    backoff: float = 1.0
    timeout: float = 120.0
    token_env: str = "LONGCTX_API_TOKEN"
    transport: object = None

    def _client(self):
        import httpx

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        kw = {"headers": headers, "timeout": self.timeout}
        if self.transport is not None:
            kw["transport"] = self.transport
        return httpx.Client(**kw)

    def complete(self, prompt: str) -> str:
        import httpx

        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        last: Optional[Exception] = None
        with self._client() as client:
            for attempt in range(1, self.max_attempts + 1):
                try:
                    r = client.post(self.endpoint, json=body)
                    r.raise_for_status()
                    data = r.json()
                    content = data["choices"][0]["message"]["content"]
                    if not isinstance(content, str):
                        raise GenerationError("response content is not text")
                    if data["choices"][0].get("finish_reason") == "length":
                        raise GenerationError("completion was cut off at max_tokens")
                    return content
                except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError, GenerationError) as exc:
                    last = exc
                    log.warning("generation attempt %d/%d failed: %s", attempt, self.max_attempts, exc)
                    if attempt < self.max_attempts and self.backoff:
                        time.sleep(self.backoff * 2 ** (attempt - 1))
        raise GenerationError(f"giving up after {self.max_attempts} attempts: {last}")


def request_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class RequestLog:
    """Append-only newline-delimited log of generation requests and responses."""

    def __init__(self, path: Optional[Union[str, os.PathLike]] = None):
        self.path = Path(path) if path is not None else None
        self.records: List[dict] = []
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                self.records = [json.loads(line) for line in fh if line.strip()]

    def append(self, record: dict) -> None:
        with self._lock:
            self.records.append(record)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")

    def responses(self) -> Dict[str, str]:
        return {r["key"]: r["response"] for r in self.records if "response" in r}


class ReplayClient:
    """Answers from a request log; unknown prompts are an error."""

    def __init__(self, log_: RequestLog):
        self._responses = log_.responses()

    def complete(self, prompt: str) -> str:
        try:
            return self._responses[request_key(prompt)]
        except KeyError:
            raise GenerationError("prompt not present in request log") from None


class LoggedClient:
    """Wraps a client: serves cached responses, logs new ones with their provenance."""

    def __init__(self, client: Completer, log_: RequestLog):
        self.client = client
        self.log = log_
        self._cache = log_.responses()
        self._lock = threading.Lock()

    def complete(self, prompt: str, **meta) -> str:
        key = request_key(prompt)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        response = self.client.complete(prompt)
        with self._lock:
            if key not in self._cache:
                self._cache[key] = response
                self.log.append({"key": key, "prompt": prompt, "response": response, **meta})
            return self._cache[key]


# --- QA ----------------------------------------------------------------------


@dataclass(frozen=True)
class QaRequest:
    doc_id: str
    seed: int
    offset: int
    chunk_len: int
    prompt: str


def make_qa_request(
    doc: Document,
    chunk_len: int = 2048,
    seed: int = 0,
    tokenizer: Optional[WhitespaceTokenizer] = None,
    prompt_text: str = QA_PROMPT,
) -> QaRequest:
    """Pick a seeded-random chunk of ``doc`` and splice it into the QA prompt."""
    if chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    if doc.length < chunk_len:
        raise ValueError(f"document {doc.id!r} has {doc.length} tokens, fewer than chunk_len={chunk_len}")
    tokenizer = tokenizer or WhitespaceTokenizer()
    offset = int(_rng(seed, _doc_salt(doc.id), 1).integers(0, doc.length - chunk_len + 1))
    snippet = tokenizer.decode(doc.tokens[offset : offset + chunk_len])
    return QaRequest(doc.id, seed, offset, chunk_len, prompt_text.replace("{snippet}", snippet))


def snippet_of(prompt: str) -> str:
    start = prompt.index(SNIPPET_START) + len(SNIPPET_START)
    return prompt[start : prompt.index(SNIPPET_END, start)]


@dataclass(frozen=True)
class QaPair:
    question: str
    answer: str
    reasoning: str = ""


class Rejected(ValueError):
    MISSING_FIELD = "missing field"
    SNIPPET_REFERENCE = "snippet reference"
    EMPTY_ANSWER = "empty answer"

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


_FIELD = re.compile(r"^\s*(Reasoning|Question|Answer)\s*:\s*", re.IGNORECASE | re.MULTILINE)


def parse_qa(response: str) -> QaPair:
    """Extract Question/Answer from a ``Reasoning/Question/Answer`` completion."""
    fields: Dict[str, str] = {}
    matches = list(_FIELD.finditer(response))
    for m, nxt in zip(matches, matches[1:] + [None]):
        name = m.group(1).lower()
        end = nxt.start() if nxt is not None else len(response)
        fields.setdefault(name, response[m.end() : end].strip())
    for name in ("question", "answer"):
        if name not in fields:
            raise Rejected(Rejected.MISSING_FIELD, name)
    if not fields["question"]:
        raise Rejected(Rejected.MISSING_FIELD, "question")
    if not fields["answer"]:
        raise Rejected(Rejected.EMPTY_ANSWER)
    if _SNIPPET_REF.search(fields["question"]):
        raise Rejected(Rejected.SNIPPET_REFERENCE, fields["question"][:80])
    return QaPair(fields["question"], fields["answer"], fields.get("reasoning", ""))


def _example(instruction: str, response: str, tokenizer, kind: str, origin: str) -> SftExample:
    ins = np.asarray(tokenizer(instruction), dtype=TOKEN_DTYPE)
    res = np.asarray(tokenizer(response), dtype=TOKEN_DTYPE)
    if res.size == 0:
        raise Rejected(Rejected.EMPTY_ANSWER)
    n = ins.size
    tokens = np.concatenate([ins, res])
    mask = np.zeros(tokens.size, dtype=bool)
    mask[n:] = True
    return SftExample(tokens, mask, ((INSTRUCTION, 0, n), (RESPONSE, n, tokens.size)), (), (origin,), kind)


def _pick(seq, rng: np.random.Generator):
    return seq[int(rng.integers(0, len(seq)))]


def assemble_qa(
    doc: Document,
    qa: QaPair,
    template: Optional[PromptTemplate] = None,
    seed: int = 0,
    tokenizer: Optional[WhitespaceTokenizer] = None,
    documents: Optional[str] = None,
    kind: str = "qa",
) -> SftExample:
    """Render the full document and question; only the answer is trained on."""
    tokenizer = tokenizer or WhitespaceTokenizer()
    if template is None:
        template = _pick(qa_templates(), _rng(seed, _doc_salt(doc.id), 2))
    text = documents if documents is not None else tokenizer.decode(doc.tokens)
    instruction = template.render(text, qa.question)
    return _example(instruction, qa.answer, tokenizer, kind, doc.id)


@dataclass(frozen=True)
class RagLayout:
    chunks: Tuple[Tuple[int, int], ...]
    source_index: int


def rag_chunks(doc_len: int, source: Tuple[int, int], n_chunks: int, seed: int, salt: int = 0) -> RagLayout:
    """Choose ``n_chunks`` disjoint, equal-length chunks, one of them the QA source chunk.

    Distractors sit on the grid of chunk-sized slots that do not overlap the
    source chunk; the presented order is a seeded shuffle.
    """
    start, end = source
    width = end - start
    if n_chunks < 1:
        raise ValueError("n_chunks must be >= 1")
    slots = [s for s in range(0, doc_len - width + 1, width) if s + width <= start or s >= end]
    if len(slots) < n_chunks - 1:
        raise ValueError(f"document of {doc_len} tokens cannot hold {n_chunks} chunks of {width}")
    rng = _rng(seed, salt, 3)
    picked = sorted(rng.choice(len(slots), size=n_chunks - 1, replace=False).tolist())
    chunks = [(start, end)] + [(slots[i], slots[i] + width) for i in picked]
    order = rng.permutation(n_chunks)
    shuffled = tuple(chunks[i] for i in order)
    return RagLayout(shuffled, int(np.flatnonzero(order == 0)[0]))


def assemble_rag(
    doc: Document,
    qa: QaPair,
    request: QaRequest,
    n_chunks: int = 8,
    seed: int = 0,
    tokenizer: Optional[WhitespaceTokenizer] = None,
    template: Optional[PromptTemplate] = None,
) -> SftExample:
    """QA example whose context is a shuffled list of chunks mimicking retrieval."""
    tokenizer = tokenizer or WhitespaceTokenizer()
    layout = rag_chunks(doc.length, (request.offset, request.offset + request.chunk_len), n_chunks,
                        seed, _doc_salt(doc.id))
    passages = [
        f"Document [{i + 1}]: " + tokenizer.decode(doc.tokens[s:e]) for i, (s, e) in enumerate(layout.chunks)
    ]
    if template is None:
        template = _pick(qa_templates(), _rng(seed, _doc_salt(doc.id), 4))
    return assemble_qa(doc, qa, template, seed, tokenizer, documents="\n\n".join(passages), kind="rag")


# --- recursive summarization -----------------------------------------------


@dataclass
class SummaryNode:
    """One summarization request: a leaf covers [start, end) of the document,
    an internal node merges its children's summaries."""

    level: int
    start: int
    end: int
    children: List["SummaryNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["SummaryNode"]:
        """Post-order: children before parents."""
        for c in self.children:
            yield from c.walk()
        yield self

    def count(self) -> int:
        return sum(1 for _ in self.walk())


def recursive_summary_plan(doc_len: Union[int, Document], window: int, fan_in: int = 5) -> SummaryNode:
    if isinstance(doc_len, Document):
        doc_len = doc_len.length
    if window < 1:
        raise ValueError("window must be >= 1")
    if fan_in < 2:
        raise ValueError("fan_in must be >= 2 for the tree to shrink")
    level = [SummaryNode(0, s, min(s + window, doc_len)) for s in range(0, max(doc_len, 1), window)]
    depth = 0
    while len(level) > 1:
        depth += 1
        level = [
            SummaryNode(depth, grp[0].start, grp[-1].end, grp)
            for grp in (level[i : i + fan_in] for i in range(0, len(level), fan_in))
        ]
    return level[0]


def run_summary(
    root: SummaryNode,
    doc: Document,
    client: Completer,
    tokenizer: WhitespaceTokenizer,
    budget_words: int = 200,
) -> str:
    summaries: Dict[int, str] = {}
    for node in root.walk():
        if node.is_leaf:
            text = tokenizer.decode(doc.tokens[node.start : node.end])
            prompt = SUMMARY_PROMPT.format(budget=budget_words, text=text)
        else:
            text = "\n\n".join(summaries[id(c)] for c in node.children)
            prompt = MERGE_PROMPT.format(budget=budget_words, text=text)
        out = client.complete(prompt).strip()
        if out.lower().startswith("summary:"):
            out = out[len("summary:") :].strip()
        if not out:
            raise Rejected(Rejected.EMPTY_ANSWER, "empty summary")
        summaries[id(node)] = out
    return summaries[id(root)]


def assemble_summary(
    doc: Document,
    summary: str,
    seed: int = 0,
    tokenizer: Optional[WhitespaceTokenizer] = None,
    template: Optional[PromptTemplate] = None,
) -> SftExample:
    tokenizer = tokenizer or WhitespaceTokenizer()
    if template is None:
        template = _pick(summary_templates(), _rng(seed, _doc_salt(doc.id), 5))
    return _example(template.render(tokenizer.decode(doc.tokens)), summary, tokenizer, "summ", doc.id)


# --- driver ----------------------------------------------------------------


@dataclass
class SynthConfig:
    chunk_len: int = 2048
    rag_chunks: int = 8
    summary_window: int = 4096
    summary_fan_in: int = 5
    summary_words: int = 200
    max_in_flight: int = 4


@dataclass
class SynthResult:
    examples: List[SftExample]
    skipped: List[Tuple[str, str]]


class SynthBuilder:
    """Builds QA / RAG / summarization examples for a list of documents.

    The tokenizer must be able to decode the documents (i.e. it produced
    them). Outputs are ordered by input and depend only on documents, seeds
    and the responses; concurrency only affects request order.
    """

    def __init__(self, client: Completer, log_: Optional[RequestLog] = None,
                 tokenizer: Optional[WhitespaceTokenizer] = None, config: Optional[SynthConfig] = None):
        self.log = log_ if log_ is not None else RequestLog()
        self.client = LoggedClient(client, self.log)
        self.tokenizer = tokenizer or WhitespaceTokenizer()
        self.config = config or SynthConfig()

    def _qa(self, doc: Document, seed: int) -> Tuple[QaRequest, QaPair]:
        req = make_qa_request(doc, self.config.chunk_len, seed, self.tokenizer)
        response = self.client.complete(req.prompt, kind="qa", doc_id=doc.id, seed=seed)
        return req, parse_qa(response)

    def build(self, kind: str, doc: Document, seed: int) -> SftExample:
        if kind == "qa":
            _, qa = self._qa(doc, seed)
            return assemble_qa(doc, qa, seed=seed, tokenizer=self.tokenizer)
        if kind == "rag":
            req, qa = self._qa(doc, seed)
            return assemble_rag(doc, qa, req, self.config.rag_chunks, seed, self.tokenizer)
        if kind == "summ":
            plan = recursive_summary_plan(doc, self.config.summary_window, self.config.summary_fan_in)
            summary = run_summary(plan, doc, self.client_for(doc, seed), self.tokenizer, self.config.summary_words)
            return assemble_summary(doc, summary, seed, self.tokenizer)
        raise ValueError(f"unknown synthetic kind {kind!r}")

    def client_for(self, doc: Document, seed: int):
        outer = self.client

        class _Tagged:
            def complete(self, prompt: str) -> str:
                return outer.complete(prompt, kind="summ", doc_id=doc.id, seed=seed)

        return _Tagged()

    def build_many(self, jobs: Sequence[Tuple[str, Document, int]]) -> SynthResult:
        def run(job):
            kind, doc, seed = job
            try:
                return self.build(kind, doc, seed), None
            except (Rejected, GenerationError, ValueError) as exc:
                log.warning("skipping %s example for %s (seed %d): %s", kind, doc.id, seed, exc)
                return None, (f"{kind}:{doc.id}:{seed}", str(exc))

        workers = max(1, self.config.max_in_flight)
        if workers == 1:
            results = [run(j) for j in jobs]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, jobs))
        return SynthResult([r for r, _ in results if r is not None], [s for _, s in results if s is not None])


# --- mixing ----------------------------------------------------------------

SYNTH_KINDS = ("qa", "rag", "summ")


@dataclass(frozen=True)
class SynthMixSpec:
    qa: float = 0.4
    rag: float = 0.3
    summ: float = 0.3
    synthetic_ratio: float = 1.0

    def __post_init__(self):
        if abs(self.qa + self.rag + self.summ - 1.0) > 1e-9:
            raise ValueError(f"qa + rag + summ must be 1, got {self.qa + self.rag + self.summ:.10g}")
        if min(self.qa, self.rag, self.summ) < 0:
            raise ValueError("fractions must be non-negative")
        if not 0.0 <= self.synthetic_ratio <= 1.0:
            raise ValueError("synthetic_ratio must be in [0, 1]")

    def targets(self) -> Dict[str, float]:
        r = self.synthetic_ratio
        return {"qa": r * self.qa, "rag": r * self.rag, "summ": r * self.summ, "short": 1.0 - r}


@dataclass
class SynthMixStats:
    tokens: int = 0
    kind_tokens: Dict[str, int] = field(default_factory=dict)
    examples: int = 0
    epochs: Dict[str, int] = field(default_factory=dict)


def mix_synth(
    spec: SynthMixSpec,
    pools: Mapping[str, Sequence[SftExample]],
    budget: int,
    seed: int = 0,
    wrap: bool = True,
    stats: Optional[SynthMixStats] = None,
    block: int = 1024,
) -> Iterator[SftExample]:
    """Draw examples from the ``qa``/``rag``/``summ``/``short`` pools by token share."""
    from .mixer import PoolExhausted

    stats = stats if stats is not None else SynthMixStats()
    targets = {k: v for k, v in spec.targets().items() if v > 0}
    for k in targets:
        if not pools.get(k):
            raise ValueError(f"pool not found or empty: {k}")
    keys = list(targets)
    mean_len = np.array([np.mean([e.length for e in pools[k]]) for k in keys])
    p = np.array([targets[k] for k in keys]) / mean_len
    p /= p.sum()
    orders = {k: (0, 0, _rng(seed, i, 0).permutation(len(pools[k]))) for i, k in enumerate(keys)}
    draws = _rng(seed, 0xD1CE)
    while stats.tokens < budget:
        for i in draws.choice(len(keys), size=block, p=p):
            k = keys[i]
            epoch, pos, order = orders[k]
            if pos == len(order):
                if not wrap:
                    raise PoolExhausted(f"pool {k} exhausted")
                epoch += 1
                order, pos = _rng(seed, i, epoch).permutation(len(pools[k])), 0
            ex = pools[k][order[pos]]
            orders[k] = (epoch, pos + 1, order)
            stats.examples += 1
            stats.tokens += ex.length
            stats.kind_tokens[k] = stats.kind_tokens.get(k, 0) + ex.length
            stats.epochs[k] = epoch
            yield ex
            if stats.tokens >= budget:
                break


# --- test double -----------------------------------------------------------


class StubClient:
    """Deterministic stand-in for the generation service.

    QA prompts get a canned ``Reasoning/Question/Answer`` completion built from
    words of the snippet; summarization prompts get the first words of their
    text. Thread-safe and free of network access.
    """

    def __init__(self, answer_words: int = 12, summary_words: int = 40):
        self.answer_words = answer_words
        self.summary_words = summary_words
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
        if SNIPPET_START in prompt:
            words = snippet_of(prompt).split()
            h = request_key(prompt)[:8]
            return (
                f"Reasoning: this snippet is about item {h}.\n"
                f"Question: What follows the phrase {' '.join(words[:3])} in the book?\n"
                f"Answer: {' '.join(words[3 : 3 + self.answer_words])}"
            )
        body = prompt.split("\n\n", 1)[-1].rsplit("\n\nSummary:", 1)[0]
        return "Summary: " + " ".join(body.split()[: self.summary_words])
