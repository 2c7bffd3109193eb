"""Text-side emotional understanding.

Covers the VAD lexicon lookup with token augmentation used by the transformer
model, and the three-step chain-of-thought prompt enhancement used by the
diffusion model, with a pluggable language-model client and a deterministic
offline fallback.
"""

from __future__ import annotations

import collections
import json
import os
import re
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol

import torch

from .emotions import CATEGORY_NAMES, EmotionCategory, category

NEUTRAL_VAD = (0.5, 0.5, 0.5)
_WORD_RE = re.compile(r"[a-z']+")


@dataclass(frozen=True)
class VADTriple:
    """Valence/arousal/dominance lexicon scores, each in [0, 1]."""

    valence: float
    arousal: float
    dominance: float

    def __post_init__(self):
        for value in (self.valence, self.arousal, self.dominance):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"VAD component {value} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.valence, self.arousal, self.dominance)


@dataclass
class TokenSequence:
    """Word tokens with their embedding matrix (one row per token)."""

    tokens: list
    embeddings: torch.Tensor

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise ValueError("token sequence must contain at least one token")
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] != len(self.tokens):
            raise ValueError(
                f"embedding rows {tuple(self.embeddings.shape)} do not match "
                f"{len(self.tokens)} tokens"
            )


@dataclass(frozen=True)
class RichPrompt:
    """Enhanced prompt: extracted keywords, directive, and the combined text."""

    original: str
    keywords: tuple
    directive: str
    combined: str
    fallback_used: bool = False

    def __post_init__(self):
        if self.original not in self.combined or self.directive not in self.combined:
            raise ValueError("combined prompt must contain the original text and directive")


class LanguageModelClient(Protocol):
    def complete(self, prompt: str) -> str: ...


def _read_data_file(name: str) -> str:
    return resources.files("aif.data").joinpath(name).read_text(encoding="utf-8")


def load_vad_lexicon(path=None) -> dict:
    """Load a word -> VADTriple map from a tab-separated lexicon file.

    Defaults to the lexicon bundled with the package.
    """
    if path is None:
        text = _read_data_file("vad_lexicon.tsv")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    lexicon = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        word, v, a, d = line.split("\t")
        lexicon[word] = VADTriple(float(v), float(a), float(d))
    return lexicon


def load_emotion_words(path=None) -> dict:
    """Load the word -> emotion category keyword lexicon."""
    if path is None:
        text = _read_data_file("emotion_words.tsv")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        word, cat = line.split("\t")
        words[word] = category(cat)
    return words


def vad_lookup(word: str, lexicon: dict) -> VADTriple:
    """Return the lexicon entry for a word, or the neutral triple if absent."""
    if not word:
        raise ValueError("cannot look up an empty word")
    entry = lexicon.get(word.lower())
    if entry is None:
        return VADTriple(*NEUTRAL_VAD)
    return entry


def augment_tokens(sequence: TokenSequence, lexicon: dict) -> torch.Tensor:
    """Concatenate each embedding row with its token's VAD triple.

    The first columns of the output equal the input embeddings exactly; the
    last three carry valence, arousal, and dominance.
    """
    emb = sequence.embeddings
    vad = torch.tensor(
        [vad_lookup(tok, lexicon).as_tuple() for tok in sequence.tokens],
        dtype=emb.dtype,
        device=emb.device,
    )
    return torch.cat([emb, vad], dim=1)


def tokenize(text: str) -> list:
    """Lowercase word tokenization shared by both text paths."""
    return _WORD_RE.findall(text.lower())


def offline_enhance(description: str, emotion_words: dict | None = None) -> RichPrompt:
    """Deterministic prompt enhancement without a language model.

    Keywords are the description words found in the bundled emotion lexicon;
    the directive names the majority category among them ("contentment" when
    nothing matches).
    """
    if not description:
        raise ValueError("description must be non-empty")
    if emotion_words is None:
        emotion_words = load_emotion_words()
    keywords = [w for w in tokenize(description) if w in emotion_words]
    if keywords:
        votes = collections.Counter(emotion_words[w].name for w in keywords)
        best = max(votes.values())
        # Deterministic tie break: first matching category in wheel order.
        dominant = next(n for n in CATEGORY_NAMES if votes.get(n, 0) == best)
    else:
        dominant = "contentment"
    directive = f"emphasize {dominant} atmosphere"
    combined = f"{description} ({directive})"
    return RichPrompt(
        original=description,
        keywords=tuple(keywords),
        directive=directive,
        combined=combined,
        fallback_used=False,
    )


def cot_enhance(description: str, client: LanguageModelClient) -> RichPrompt:
    """Three-step chain-of-thought prompt enhancement through a client.

    Step one extracts emotional keywords, step two formulates an enhancement
    directive, and step three combines the description with the directive.
    Any client failure falls back to :func:`offline_enhance` with the result
    flagged as fallback-produced.
    """
    if not description:
        raise ValueError("description must be non-empty")
    try:
        keyword_reply = client.complete(
            "Analyze the following text description and list the emotional "
            f"keywords it contains, separated by commas.\nText: {description}"
        )
        keywords = tuple(k.strip() for k in keyword_reply.split(",") if k.strip())
        directive = client.complete(
            "Using these emotional keywords, formulate a short enhancement "
            f"directive for the image content.\nKeywords: {keyword_reply}"
        ).strip()
        combined = client.complete(
            "Combine the original text description with the enhancement "
            "directive into one rich emotional prompt, keeping both verbatim.\n"
            f"Text: {description}\nDirective: {directive}"
        ).strip()
        return RichPrompt(
            original=description,
            keywords=keywords,
            directive=directive,
            combined=combined,
            fallback_used=False,
        )
    except Exception:
        fallback = offline_enhance(description)
        return RichPrompt(
            original=fallback.original,
            keywords=fallback.keywords,
            directive=fallback.directive,
            combined=fallback.combined,
            fallback_used=True,
        )


class OfflineClient:
    """Client that answers every call by deterministic lexicon matching."""

    def __init__(self, emotion_words: dict | None = None):
        self._words = emotion_words or load_emotion_words()

    def complete(self, prompt: str) -> str:
        body = prompt.split("\n", 1)[1] if "\n" in prompt else prompt
        if prompt.startswith("Analyze"):
            text = body.removeprefix("Text: ")
            matched = [w for w in tokenize(text) if w in self._words]
            return ", ".join(matched) if matched else ""
        if prompt.startswith("Using"):
            enhanced = offline_enhance(body.removeprefix("Keywords: ") or "neutral", self._words)
            return enhanced.directive
        text, directive = body.split("\nDirective: ")
        return f"{text.removeprefix('Text: ')} ({directive})"


class HttpClient:
    """Minimal JSON-over-HTTP client.

    The endpoint and key come from the AIF_LM_ENDPOINT and AIF_LM_API_KEY
    environment variables; credentials are never written to disk.
    """

    def __init__(self, timeout: float = 30.0):
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        endpoint = os.environ.get("AIF_LM_ENDPOINT")
        if not endpoint:
            raise RuntimeError("AIF_LM_ENDPOINT is not configured")
        payload = json.dumps({"prompt": prompt}).encode("utf-8")
        request = urllib.request.Request(
            endpoint,
            data=payload,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {os.environ.get('AIF_LM_API_KEY', '')}",
            },
        )
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            reply = json.loads(response.read().decode("utf-8"))
        return reply["completion"]


@dataclass
class Vocabulary:
    """Word -> token id map trained from corpus descriptions."""

    words: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {w: i for i, w in enumerate(self.words)}

    @staticmethod
    def build(texts, extra_words=()) -> "Vocabulary":
        seen = {"<pad>": None, "<unk>": None, "<null>": None}
        for text in texts:
            for tok in tokenize(text):
                seen.setdefault(tok, None)
        for word in extra_words:
            seen.setdefault(word, None)
        return Vocabulary(list(seen))

    def __len__(self) -> int:
        return len(self.words)

    @property
    def pad_id(self) -> int:
        return self._index["<pad>"]

    @property
    def unk_id(self) -> int:
        return self._index["<unk>"]

    @property
    def null_id(self) -> int:
        return self._index["<null>"]

    def encode(self, text: str, max_len: int | None = None) -> list:
        ids = [self._index.get(tok, self.unk_id) for tok in tokenize(text)]
        if not ids:
            ids = [self.unk_id]
        if max_len is not None:
            ids = ids[:max_len]
        return ids
