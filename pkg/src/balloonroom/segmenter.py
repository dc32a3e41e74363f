"""Sentence segmentation for recognized-text events and transcript files.

Live recognition delivers partial fragments; a segment closes when the
recognizer marks an utterance final or when 0.3 s of silence elapses after
the last fragment. The timeout is re-hosted here (rather than trusting a
speech provider's internal setting) so behavior is provider-independent
and testable with a synthetic clock.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .model import SegmentSource, TranscriptSegment, count_words

SILENCE_TIMEOUT = 0.3
DEFAULT_WORDS_PER_SECOND = 2.5

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+")
_LINE_STAMP = re.compile(r"^\[(\d+(?:\.\d+)?)\]\s*")


@dataclass(frozen=True)
class SttEvent:
    """One recognized-text fragment from a speech provider."""

    text: str
    t: float
    is_final: bool = False


def split_sentences(text: str) -> list[str]:
    """Split on '.', '!' or '?' followed by whitespace; trim, drop empties."""
    return [part for part in (p.strip() for p in _SENTENCE_BOUNDARY.split(text)) if part]


class Segmenter:
    """Single-writer segment builder for one ordered event stream.

    Timeout expiry is driven by the caller's clock: feed events through
    ``ingest`` and poll ``flush_due(now)`` between them.
    """

    def __init__(
        self,
        source: SegmentSource = SegmentSource.LIVE,
        timeout: float = SILENCE_TIMEOUT,
        id_prefix: str = "seg",
    ):
        self.source = source
        self.timeout = timeout
        self._id_prefix = id_prefix
        self._counter = 0
        self._fragments: list[str] = []
        self._t_first = 0.0
        self._t_last = 0.0
        self._last_event_t: float | None = None

    def ingest(self, ev: SttEvent) -> list[TranscriptSegment]:
        if self._last_event_t is not None and ev.t < self._last_event_t:
            raise ValueError(
                f"event times must be non-decreasing: {ev.t} after {self._last_event_t}"
            )
        self._last_event_t = ev.t

        out: list[TranscriptSegment] = []
        if self._fragments and ev.t - self._t_last >= self.timeout:
            out.append(self._close())

        text = ev.text.strip()
        if not text:
            return out
        if not self._fragments:
            self._t_first = ev.t
        self._fragments.append(text)
        self._t_last = ev.t
        if ev.is_final:
            out.append(self._close())
        return out

    def flush_due(self, now: float) -> list[TranscriptSegment]:
        """Close the pending buffer if the silence timeout has elapsed."""
        if self._fragments and now - self._t_last >= self.timeout:
            return [self._close()]
        return []

    def flush(self) -> list[TranscriptSegment]:
        """Force-close the pending buffer (end of stream)."""
        return [self._close()] if self._fragments else []

    def _close(self) -> TranscriptSegment:
        self._counter += 1
        seg = TranscriptSegment(
            id=f"{self._id_prefix}-{self._counter}",
            text=" ".join(self._fragments),
            t_start=self._t_first,
            t_end=self._t_last,
            source=self.source,
        )
        self._fragments = []
        return seg


def segments_from_text(
    text: str,
    words_per_second: float = DEFAULT_WORDS_PER_SECOND,
    source: SegmentSource = SegmentSource.FILE,
    id_prefix: str = "seg",
) -> list[TranscriptSegment]:
    """Sentence segments for transcript text, with synthetic timing.

    Lines may carry a ``[ss.mmm] `` prefix giving the line's start time;
    otherwise timestamps accumulate at ``words_per_second``.
    """
    segments: list[TranscriptSegment] = []
    cursor = 0.0
    counter = 0
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        m = _LINE_STAMP.match(line)
        if m:
            cursor = max(cursor, float(m.group(1)))
            line = line[m.end():]
        for sentence in split_sentences(line):
            counter += 1
            duration = count_words(sentence) / words_per_second
            segments.append(
                TranscriptSegment(
                    id=f"{id_prefix}-{counter}",
                    text=sentence,
                    t_start=cursor,
                    t_end=cursor + duration,
                    source=source,
                )
            )
            cursor += duration
    return segments


def load_transcript(
    path: str | Path,
    words_per_second: float = DEFAULT_WORDS_PER_SECOND,
) -> list[TranscriptSegment]:
    return segments_from_text(
        Path(path).read_text(encoding="utf-8"), words_per_second=words_per_second
    )
