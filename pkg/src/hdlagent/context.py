"""Prompt assembly for initial and repair queries.

Parts are joined by exactly one blank line. Context always precedes the
question, and repair queries carry only the latest code and diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .errors import EmptyError, EmptyQuestion, StageTooLow

SEPARATOR = "\n\n"
CONNECTIVE = "The previous code has the following compile error:"


class AblationStage(IntEnum):
    BASE = 0
    DESCRIPTION = 1
    FEW_SHOT = 2
    COMPILE = 3
    FIXES = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "AblationStage":
        key = text.strip().lower().replace("-", "_")
        if key == "fewshot":
            key = "few_shot"
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValueError(
                f"unknown stage {text!r} (expected base|description|fewshot|compile|fixes)"
            ) from None


@dataclass(frozen=True)
class PromptBundle:
    user_text: str
    stage: AblationStage
    purpose: str
    system_text: str | None = None


def render_few_shot(example) -> str:
    return f"Example question:\n{example.question.strip()}\n\nExample answer:\n{example.code.strip()}"


def context_parts(profile, stage: AblationStage) -> list[str]:
    parts = []
    if stage >= AblationStage.DESCRIPTION and profile.description_summary.strip():
        parts.append(profile.description_summary.strip())
    if stage >= AblationStage.FEW_SHOT:
        parts.extend(render_few_shot(ex) for ex in profile.few_shot)
    return parts


def _main_parts(profile, question, stage):
    if not question or not question.strip():
        raise EmptyQuestion("question must be non-empty")
    return context_parts(profile, stage) + [
        profile.prefix.strip(),
        question.strip(),
        profile.suffix.strip(),
    ]


def build_initial_query(profile, question: str, stage: AblationStage) -> PromptBundle:
    stage = AblationStage(stage)
    parts = _main_parts(profile, question, stage)
    return PromptBundle(
        user_text=SEPARATOR.join(parts),
        stage=stage,
        purpose="initial",
        system_text=profile.system_text,
    )


def build_repair_query(profile, question, latest_code, error_text, fix=None, stage=AblationStage.FIXES):
    """Main context and question, then the whole latest snippet, the compiler
    diagnostic and (at the fixes stage) the matched sample fix."""
    stage = AblationStage(stage)
    if stage < AblationStage.COMPILE:
        raise StageTooLow(f"repair queries need stage >= compile, got {stage.label}")
    if not error_text or not error_text.strip():
        raise EmptyError("error_text must be non-empty")
    code = getattr(latest_code, "code", latest_code)
    if not code or not code.strip():
        raise ValueError("latest code must be non-empty")
    parts = _main_parts(profile, question, stage)
    parts += [f"```\n{code.strip()}\n```", CONNECTIVE, error_text.strip()]
    if fix is not None and stage == AblationStage.FIXES:
        parts.append(fix.explanation.strip())
        if fix.example_fix.strip():
            parts.append(fix.example_fix.strip())
    return PromptBundle(
        user_text=SEPARATOR.join(parts),
        stage=stage,
        purpose="repair",
        system_text=profile.system_text,
    )
