"""Emoji predicate over the shipped code-point range table."""

from __future__ import annotations

from evadelab.emoji import count_emoji, is_emoji


class TestIsEmoji:
    def test_common_emoji_match(self):
        for char in ("🙂", "🌞", "🌊", "🍂", "🏡", "🎨", "🚂", "🌲"):
            assert is_emoji(char)

    def test_ascii_never_matches(self):
        for char in ("a", "Z", "2", "#", "@", ".", " ", "!"):
            assert not is_emoji(char)

    def test_only_single_code_points(self):
        assert not is_emoji("")
        assert not is_emoji("🙂🙂")
        assert not is_emoji("ab")


class TestCountEmoji:
    def test_counts_emoji_tokens(self):
        assert count_emoji(["a", "🙂", "🌞", ".", "#x"]) == 2

    def test_empty_list(self):
        assert count_emoji([]) == 0

    def test_multi_char_tokens_not_counted(self):
        assert count_emoji(["🙂🙂"]) == 0
