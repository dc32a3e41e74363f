"""Language-model provider adapters.

Three interchangeable implementations sit behind one contract
(request {prompt, purpose} -> response text):

* ``ScriptedProvider``: canned responses, keyed off the sentence or topic
  embedded in the prompt; powers every deterministic test.
* ``RuleBasedProvider``: offline fallback; the most frequent non-stopword
  token becomes the topic, so the engine runs with no network at all.
* ``LiveProvider``: chat-completions HTTP adapter; credentials come from
  environment variables and it never enters the test path.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol

from .errors import ProviderError

# Prompt section markers, shared with the prompt builder in extractor.py.
EXISTING_HEADER = "Existing topics:"
SENTENCE_HEADER = "Sentence:"
TOPIC_HEADER = "Topic:"
NO_EXISTING = "(none)"


class Purpose(str, Enum):
    EXTRACT = "extract"
    EXPAND = "expand"


@dataclass(frozen=True)
class ProviderRequest:
    prompt: str
    purpose: Purpose


@dataclass(frozen=True)
class ProviderResponse:
    raw: str
    exchange_id: str


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class Provider(Protocol):
    def complete(self, request: ProviderRequest) -> str: ...


def sentence_of_prompt(prompt: str) -> str:
    """Recover the sentence block an extract prompt embeds."""
    return _section(prompt, SENTENCE_HEADER)


def topic_of_prompt(prompt: str) -> str:
    """Recover the topic title an expand prompt embeds."""
    lines = prompt.splitlines()
    for line in lines:
        if line.startswith(TOPIC_HEADER):
            return line[len(TOPIC_HEADER):].strip()
    raise ProviderError(f"prompt has no {TOPIC_HEADER!r} line")


def _section(prompt: str, header: str) -> str:
    lines = prompt.splitlines()
    try:
        start = lines.index(header) + 1
    except ValueError:
        raise ProviderError(f"prompt has no {header!r} section") from None
    body: list[str] = []
    for line in lines[start:]:
        if not line.strip():
            break
        body.append(line)
    return "\n".join(body).strip()


class ProviderCache:
    """Prompt-hash -> raw response map; makes recorded sessions replayable offline."""

    def __init__(self, entries: dict[str, str] | None = None):
        self.entries: dict[str, str] = dict(entries or {})

    def get(self, prompt: str) -> str | None:
        return self.entries.get(prompt_hash(prompt))

    def put(self, prompt: str, raw: str) -> str:
        h = prompt_hash(prompt)
        self.entries[h] = raw
        return h

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> dict[str, str]:
        return dict(self.entries)

    @classmethod
    def from_json(cls, doc: dict[str, str]) -> "ProviderCache":
        return cls(doc)


class ScriptedProvider:
    """Deterministic provider with canned responses.

    ``extract`` maps a sentence to the raw extract response; ``expand`` maps
    a topic title to the raw expand response. ``by_prompt`` overrides either
    with an exact-prompt match. Unknown inputs raise unless ``default`` is set.
    """

    def __init__(
        self,
        extract: dict[str, str] | None = None,
        expand: dict[str, str] | None = None,
        by_prompt: dict[str, str] | None = None,
        default: str | None = None,
    ):
        self.extract = dict(extract or {})
        self.expand = dict(expand or {})
        self.by_prompt = dict(by_prompt or {})
        self.default = default
        self.calls = 0

    def complete(self, request: ProviderRequest) -> str:
        self.calls += 1
        if request.prompt in self.by_prompt:
            return self.by_prompt[request.prompt]
        if request.purpose is Purpose.EXTRACT:
            key = sentence_of_prompt(request.prompt)
            table = self.extract
        else:
            key = topic_of_prompt(request.prompt)
            table = self.expand
        if key in table:
            return table[key]
        if self.default is not None:
            return self.default
        raise ProviderError(f"no scripted response for {request.purpose.value}: {key!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            extract=doc.get("extract"),
            expand=doc.get("expand"),
            by_prompt=doc.get("by_prompt"),
            default=doc.get("default"),
        )


_STOPWORDS = frozenset(
    """a about after all also an and any are as at be because been before but by can
    could did do does for from had has have he her here his how i if in into is it
    its just like me more most my no not now of on one only or other our out over
    she so some than that the their them then there these they this to too up us
    very was we were what when where which who will with would you your""".split()
)


class RuleBasedProvider:
    """Offline fallback provider, fully deterministic.

    Extract: the most frequent non-stopword token of the sentence, title-cased,
    becomes the single topic (ties broken by first occurrence). Expand: the
    first distinct non-stopword tokens of the notes that are not already
    topics become suggestions.
    """

    def __init__(self, n_expand: int = 3):
        self.n_expand = n_expand
        self.calls = 0

    def complete(self, request: ProviderRequest) -> str:
        self.calls += 1
        if request.purpose is Purpose.EXTRACT:
            sentence = sentence_of_prompt(request.prompt).replace("\n", " ")
            title = self._dominant_token(sentence)
            if title is None:
                return ""
            return f"TOPIC: {title}\nSENT: {sentence}"
        notes = _section(request.prompt, "Notes:")
        existing = {t.casefold() for t in _existing_titles(request.prompt)}
        existing.add(topic_of_prompt(request.prompt).casefold())
        titles: list[str] = []
        for token in _tokens(notes):
            if token in _STOPWORDS or not token.isalpha():
                continue
            title = token.title()
            if title.casefold() in existing or title in titles:
                continue
            titles.append(title)
            if len(titles) >= self.n_expand:
                break
        return "\n".join(f"TOPIC: {t}" for t in titles)

    @staticmethod
    def _dominant_token(sentence: str) -> str | None:
        tokens = _tokens(sentence)
        if not tokens:
            return None
        content = [t for t in tokens if t not in _STOPWORDS] or tokens
        counts = Counter(content)
        best = max(counts, key=lambda t: (counts[t], -content.index(t)))
        return best.title()


def _tokens(text: str) -> list[str]:
    return [t.strip(".,!?;:'\"()") for t in text.casefold().split() if t.strip(".,!?;:'\"()")]


def _existing_titles(prompt: str) -> list[str]:
    try:
        block = _section(prompt, EXISTING_HEADER)
    except ProviderError:
        return []
    titles = []
    for line in block.splitlines():
        line = line.strip()
        if line.startswith("- "):
            titles.append(line[2:])
    return titles


class LiveProvider:
    """Chat-completions adapter for an OpenAI-compatible HTTP endpoint.

    Reads PROVIDER_API_KEY (required), PROVIDER_BASE_URL and PROVIDER_MODEL
    from the environment. Out of the deterministic test path by design.
    """

    def __init__(
        self,
        api_key: str | None = None,
        base_url: str | None = None,
        model: str | None = None,
        timeout: float = 30.0,
    ):
        self.api_key = api_key or os.environ.get("PROVIDER_API_KEY")
        if not self.api_key:
            raise ProviderError("PROVIDER_API_KEY is not set")
        self.base_url = (
            base_url or os.environ.get("PROVIDER_BASE_URL") or "https://api.openai.com/v1"
        ).rstrip("/")
        self.model = model or os.environ.get("PROVIDER_MODEL") or "gpt-3.5-turbo"
        self.timeout = timeout

    def complete(self, request: ProviderRequest) -> str:
        import httpx

        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                headers={"Authorization": f"Bearer {self.api_key}"},
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": request.prompt}],
                    "temperature": 0,
                },
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(f"live provider call failed: {exc}") from exc


def make_provider(mode: str, script_path: str | Path | None = None) -> Provider:
    """Build a provider from a mode name: live, scripted or rule."""
    if mode == "rule":
        return RuleBasedProvider()
    if mode == "scripted":
        if script_path is None:
            raise ProviderError("scripted provider requires a script file")
        return ScriptedProvider.from_file(script_path)
    if mode == "live":
        return LiveProvider()
    raise ProviderError(f"unknown provider mode {mode!r}")
