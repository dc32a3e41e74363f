"""Shared test utilities: reference parsers and scripted-response rendering."""

from __future__ import annotations

import re


def render_extract_response(pairs: list[tuple[str, list[str]]]) -> str:
    """Render (title, sentences) pairs into the provider wire format."""
    lines: list[str] = []
    for title, sentences in pairs:
        lines.append(f"TOPIC: {title}")
        lines.extend(f"SENT: {s}" for s in sentences)
    return "\n".join(lines)


def render_expand_response(titles: list[str]) -> str:
    return "\n".join(f"TOPIC: {t}" for t in titles)


def reference_parse(raw: str) -> list[tuple[str, list[str]]]:
    """Independent re-implementation of the strict extract grammar.

    Regex-driven line classifier, structured differently from the
    production parser on purpose; raises ValueError on malformed input.
    """
    topic_re = re.compile(r"^TOPIC:\s*(?P<title>\S.*?)\s*$")
    sent_re = re.compile(r"^SENT:\s*(?P<sentence>\S.*?)\s*$")
    blocks: list[tuple[str, list[str]]] = []
    for line in raw.splitlines():
        if not line.strip():
            continue
        m = topic_re.match(line.strip())
        if m:
            blocks.append((m.group("title"), []))
            continue
        m = sent_re.match(line.strip())
        if m:
            if not blocks:
                raise ValueError("sentence before any topic")
            blocks[-1][1].append(m.group("sentence"))
            continue
        raise ValueError(f"unrecognized line: {line!r}")
    for title, sentences in blocks:
        if not sentences:
            raise ValueError(f"topic {title!r} has no sentences")
    return blocks


def normalize_key_reference(title: str) -> str:
    """Independent restatement of the topic identity rule."""
    return " ".join(title.strip().split()).casefold()
