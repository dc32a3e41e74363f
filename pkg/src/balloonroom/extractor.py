"""Topic extraction pipeline: prompt building, response parsing, store updates.

The wire format with the provider is strict on purpose; exact parseability
beats free-form output:

    extract response:   repeated blocks of
                            TOPIC: <title>
                            SENT: <sentence>     (one or more per block)
    expand response:    TOPIC-only lines, one suggestion each

Blank lines are ignored; any other line is malformed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import ParseFailure
from .events import EventDraft, EventKind, warning
from .layout import Layout
from .model import Topic, TopicOrigin, TopicStore, normalize_topic_key, scale_radius
from .providers import (
    EXISTING_HEADER,
    NO_EXISTING,
    ProviderRequest,
    ProviderResponse,
    Purpose,
    SENTENCE_HEADER,
    TOPIC_HEADER,
)

N_EXPAND = 3

# complete(request) -> raw response text; the session binds this to its
# provider plus cache so record/playback stay deterministic.
CompleteFn = Callable[[ProviderRequest], str]


@dataclass(frozen=True)
class Extraction:
    """Parsed provider output: ordered (topic title, sentences) pairs."""

    pairs: tuple[tuple[str, tuple[str, ...]], ...]

    def __len__(self) -> int:
        return len(self.pairs)


def _existing_block(existing_titles: list[str]) -> str:
    if not existing_titles:
        return NO_EXISTING
    return "\n".join(f"- {t}" for t in existing_titles)


def build_prompt(segment_text: str, existing_titles: list[str]) -> ProviderRequest:
    """Extraction prompt for one sentence, deterministic in its inputs."""
    prompt = (
        "You organize spoken ideas into short key topics.\n"
        "\n"
        f"{EXISTING_HEADER}\n"
        f"{_existing_block(existing_titles)}\n"
        "\n"
        f"{SENTENCE_HEADER}\n"
        f"{segment_text}\n"
        "\n"
        "Extract the key topics of the sentence. If the sentence belongs to an\n"
        "existing topic, reuse that topic title verbatim. Respond only with\n"
        "lines in this exact format, one block per topic, nothing else:\n"
        "TOPIC: <title>\n"
        "SENT: <original sentence supporting the topic>"
    )
    return ProviderRequest(prompt=prompt, purpose=Purpose.EXTRACT)


def build_expand_prompt(topic: Topic, existing_titles: list[str]) -> ProviderRequest:
    """Expansion prompt asking for related sub-ideas of one topic."""
    notes = "\n".join(topic.sentence_texts())
    prompt = (
        "You suggest related sub-ideas for a spoken topic.\n"
        "\n"
        f"{EXISTING_HEADER}\n"
        f"{_existing_block(existing_titles)}\n"
        "\n"
        f"{TOPIC_HEADER} {topic.title}\n"
        "Notes:\n"
        f"{notes}\n"
        "\n"
        f"Propose up to {N_EXPAND} new related sub-ideas that are not already\n"
        "existing topics. Respond only with lines in this exact format:\n"
        "TOPIC: <title>"
    )
    return ProviderRequest(prompt=prompt, purpose=Purpose.EXPAND)


def parse_response(resp: ProviderResponse | str) -> Extraction:
    """Parse the strict extract format; anything off-grammar is malformed."""
    raw = resp.raw if isinstance(resp, ProviderResponse) else resp
    pairs: list[tuple[str, tuple[str, ...]]] = []
    title: str | None = None
    sentences: list[str] = []

    def close_block():
        nonlocal title, sentences
        if title is None:
            return
        if not sentences:
            raise ParseFailure(f"topic {title!r} has no SENT lines")
        pairs.append((title, tuple(sentences)))
        title, sentences = None, []

    for lineno, line in enumerate(raw.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("TOPIC:"):
            close_block()
            title = stripped[len("TOPIC:"):].strip()
            if not title:
                raise ParseFailure(f"line {lineno}: empty TOPIC title")
        elif stripped.startswith("SENT:"):
            if title is None:
                raise ParseFailure(f"line {lineno}: SENT before any TOPIC")
            sentence = stripped[len("SENT:"):].strip()
            if not sentence:
                raise ParseFailure(f"line {lineno}: empty SENT")
            sentences.append(sentence)
        else:
            raise ParseFailure(f"line {lineno}: unrecognized line {stripped!r}")
    close_block()
    return Extraction(pairs=tuple(pairs))


def parse_suggestions(raw: str) -> list[str]:
    """Parse the expand format: TOPIC-only lines."""
    titles: list[str] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if not stripped.startswith("TOPIC:"):
            raise ParseFailure(f"line {lineno}: unrecognized line {stripped!r}")
        title = stripped[len("TOPIC:"):].strip()
        if not title:
            raise ParseFailure(f"line {lineno}: empty TOPIC title")
        titles.append(title)
    return titles


def apply_extraction(
    extraction: Extraction,
    store: TopicStore,
    layout: Layout,
    now: float,
    segment_id: str = "",
) -> list[EventDraft]:
    """Create-or-append semantics over the topic store, in pair order.

    New titles become topics with freshly spawned balloons; known titles
    get the sentences appended and their balloon regrown.
    """
    drafts: list[EventDraft] = []
    for title, sentences in extraction.pairs:
        key = normalize_topic_key(title)
        pairs = [(segment_id, s) for s in sentences]
        if key not in store:
            topic = store.create(title, created_at=now, origin=TopicOrigin.EXTRACTED,
                                 sentences=pairs)
            drafts.extend(spawn_topic_balloon(topic, layout, now))
        else:
            topic = store.append_sentences(key, pairs)
            radius = scale_radius(topic.word_count, layout.cfg)
            drafts.append(
                EventDraft(
                    EventKind.TRANSCRIPT_APPENDED,
                    {
                        "topic_key": key,
                        "sentences": [[sid, s] for sid, s in pairs],
                        "word_count": topic.word_count,
                    },
                )
            )
            drafts.append(
                EventDraft(
                    EventKind.BALLOON_GROWN,
                    {"topic_key": key, "radius": radius, "word_count": topic.word_count},
                )
            )
            drafts.extend(layout.set_radius(key, radius))
    return drafts


def spawn_topic_balloon(topic: Topic, layout: Layout, now: float) -> list[EventDraft]:
    """Spawn the balloon for a newly created topic and draft its events."""
    radius = scale_radius(topic.word_count, layout.cfg)
    balloon, moved = layout.spawn_balloon(topic.key, radius, created_at=now)
    created = EventDraft(
        EventKind.BALLOON_CREATED,
        {
            "topic_key": topic.key,
            "title": topic.title,
            "origin": topic.origin.value,
            "position": list(balloon.center),
            "radius": balloon.radius,
            "created_at": balloon.created_at,
            "alpha": balloon.alpha,
            "sentences": [[sid, s] for sid, s in topic.sentences],
        },
    )
    return [created, *moved]


def expand_topic(
    topic: Topic,
    complete: CompleteFn,
    store: TopicStore,
    layout: Layout,
    now: float,
    n_expand: int = N_EXPAND,
) -> list[EventDraft]:
    """Ask the provider for related sub-ideas and add them as suggested topics.

    Suggestions duplicating an existing key are skipped; provider or parse
    failure leaves the store untouched and yields a single warning.
    """
    request = build_expand_prompt(topic, store.titles())
    try:
        titles = parse_suggestions(complete(request))
    except Exception as exc:
        return [warning("expand_failed", str(exc), topic_key=topic.key)]

    drafts: list[EventDraft] = []
    for title in titles[:n_expand]:
        try:
            key = normalize_topic_key(title)
        except Exception:
            continue
        if key in store:
            continue
        note = f"Suggested from '{topic.title}'"
        suggested = store.create(
            title, created_at=now, origin=TopicOrigin.SUGGESTED, sentences=[("note", note)]
        )
        drafts.append(
            EventDraft(
                EventKind.SUGGESTION_ADDED,
                {"from_key": topic.key, "topic_key": key, "title": suggested.title},
            )
        )
        drafts.extend(spawn_topic_balloon(suggested, layout, now))
    return drafts
