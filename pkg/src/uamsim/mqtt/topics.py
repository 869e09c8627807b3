"""Topic name / filter validation and wildcard matching.

Matching is purely level-by-level: '+' takes exactly one level, '#' must be
the final level and swallows the rest (including zero levels).
"""
from __future__ import annotations


def _utf8_ok(s: str) -> bool:
    if not s or "\x00" in s:
        return False
    return len(s.encode("utf-8")) <= 0xFFFF


def valid_topic_name(topic: str) -> bool:
    """A publishable topic: non-empty, no wildcards, no NUL."""
    return _utf8_ok(topic) and "+" not in topic and "#" not in topic


def valid_topic_filter(topic_filter: str) -> bool:
    """A subscription filter with correctly placed wildcards."""
    if not _utf8_ok(topic_filter):
        return False
    levels = topic_filter.split("/")
    for i, level in enumerate(levels):
        if "#" in level:
            if level != "#" or i != len(levels) - 1:
                return False
        if "+" in level and level != "+":
            return False
    return True


def topic_matches(topic_filter: str, topic: str) -> bool:
    """Does a topic name fall under a filter? Both assumed valid."""
    filter_levels = topic_filter.split("/")
    topic_levels = topic.split("/")
    for i, part in enumerate(filter_levels):
        if part == "#":
            return True
        if i >= len(topic_levels):
            return False
        if part != "+" and part != topic_levels[i]:
            return False
    return len(filter_levels) == len(topic_levels)
