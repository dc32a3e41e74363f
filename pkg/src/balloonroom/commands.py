"""Voice command grammar and execution.

Commands are recognized before any text reaches the extractor; a segment
that parses as a command never produces a provider call. The grammar is
keyword-initial and anchored at the utterance start to avoid false
positives like "I'd delete that idea" mid-sentence:

    create <A> | change <A> into <B> | expand <A> | delete <A> | merge <A> into <B>
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .events import EventDraft, EventKind, warning
from .extractor import spawn_topic_balloon
from .layout import Layout
from .model import Topic, TopicOrigin, TopicStore, normalize_topic_key, scale_radius

# Verbatim note attached to balloons created by voice.
VOICE_NOTE = "You created this balloon by voice command."

_TRAILING_PUNCT = ".,!?;:"


class CommandKind(str, Enum):
    CREATE = "Create"
    CHANGE = "Change"
    EXPAND = "Expand"
    DELETE = "Delete"
    MERGE = "Merge"
    NOT_A_COMMAND = "NotACommand"


@dataclass(frozen=True)
class VoiceCommand:
    kind: CommandKind
    arg_a: str = ""
    arg_b: str = ""


_ONE_ARG = {"create": CommandKind.CREATE, "expand": CommandKind.EXPAND,
            "delete": CommandKind.DELETE}
_TWO_ARG = {"change": CommandKind.CHANGE, "merge": CommandKind.MERGE}


def parse_command(text: str) -> VoiceCommand:
    """Case-insensitive, anchored match; anything else falls through."""
    cleaned = text.strip().rstrip(_TRAILING_PUNCT).strip()
    not_a_command = VoiceCommand(CommandKind.NOT_A_COMMAND, arg_a=text)
    tokens = cleaned.split()
    if len(tokens) < 2:
        return not_a_command
    keyword = tokens[0].lower()

    if keyword in _ONE_ARG:
        arg = " ".join(tokens[1:])
        return VoiceCommand(_ONE_ARG[keyword], arg_a=arg)

    if keyword in _TWO_ARG:
        rest = tokens[1:]
        lowered = [t.lower() for t in rest]
        if "into" not in lowered:
            return not_a_command
        split = lowered.index("into")
        arg_a = " ".join(rest[:split])
        arg_b = " ".join(rest[split + 1:])
        if not arg_a or not arg_b:
            return not_a_command
        return VoiceCommand(_TWO_ARG[keyword], arg_a=arg_a, arg_b=arg_b)

    return not_a_command


# expand(topic) -> drafts; bound by the session to the extractor + provider.
ExpandFn = Callable[[Topic], list[EventDraft]]


def execute_command(
    cmd: VoiceCommand,
    store: TopicStore,
    layout: Layout,
    now: float,
    expand: ExpandFn | None = None,
) -> list[EventDraft]:
    """Apply one parsed command; missing referents warn without mutating."""
    if cmd.kind is CommandKind.NOT_A_COMMAND:
        raise ValueError("execute_command requires a parsed command")

    if cmd.kind is CommandKind.CREATE:
        return _create(cmd.arg_a, store, layout, now)
    if cmd.kind is CommandKind.CHANGE:
        return _change(cmd.arg_a, cmd.arg_b, store, layout)
    if cmd.kind is CommandKind.DELETE:
        return _delete(cmd.arg_a, store, layout)
    if cmd.kind is CommandKind.MERGE:
        return _merge(cmd.arg_a, cmd.arg_b, store, layout)

    # Expand
    topic = store.get(normalize_topic_key(cmd.arg_a))
    if topic is None:
        return [warning("missing_topic", f"no topic named '{cmd.arg_a}'")]
    if expand is None:
        return [warning("expand_unavailable", "no provider available for expansion")]
    return expand(topic)


def _create(title: str, store: TopicStore, layout: Layout, now: float) -> list[EventDraft]:
    key = normalize_topic_key(title)
    if key in store:
        return [warning("already_created", f"topic '{title}' is already created")]
    topic = store.create(
        title, created_at=now, origin=TopicOrigin.VOICE_COMMAND,
        sentences=[("note", VOICE_NOTE)],
    )
    return spawn_topic_balloon(topic, layout, now)


def _change(title_a: str, title_b: str, store: TopicStore, layout: Layout) -> list[EventDraft]:
    old_key = normalize_topic_key(title_a)
    new_key = normalize_topic_key(title_b)
    if old_key not in store:
        return [warning("missing_topic", f"no topic named '{title_a}'")]
    if new_key in store:
        return [warning("target_exists", f"topic '{title_b}' already exists")]
    topic = store.rename(old_key, title_b)
    layout.rekey(old_key, new_key)
    return [
        EventDraft(
            EventKind.TOPIC_RENAMED,
            {"old_key": old_key, "new_key": new_key, "title": topic.title},
        )
    ]


def _delete(title: str, store: TopicStore, layout: Layout) -> list[EventDraft]:
    key = normalize_topic_key(title)
    if key not in store:
        return [warning("missing_topic", f"no topic named '{title}'")]
    store.delete(key)
    layout.remove(key)
    return [EventDraft(EventKind.BALLOON_DELETED, {"topic_key": key})]


def _merge(title_a: str, title_b: str, store: TopicStore, layout: Layout) -> list[EventDraft]:
    src_key = normalize_topic_key(title_a)
    dst_key = normalize_topic_key(title_b)
    if src_key not in store:
        return [warning("missing_topic", f"no topic named '{title_a}'")]
    if dst_key not in store:
        return [warning("missing_topic", f"no topic named '{title_b}'")]
    if src_key == dst_key:
        return [warning("merge_self", f"cannot merge '{title_a}' into itself")]

    source = store.delete(src_key)
    moved = list(source.sentences)
    target = store.append_sentences(dst_key, moved)
    layout.remove(src_key)
    radius = scale_radius(target.word_count, layout.cfg)
    drafts = [
        EventDraft(
            EventKind.TOPICS_MERGED,
            {
                "source_key": src_key,
                "target_key": dst_key,
                "moved": [[sid, s] for sid, s in moved],
                "word_count": target.word_count,
                "radius": radius,
            },
        )
    ]
    drafts.extend(layout.set_radius(dst_key, radius))
    return drafts
