"""Prompt templates for generation and the two judging tasks.

The templates are plain strings so prompts stay byte-stable for a given input;
the mock backend relies on the ``Target emotion:`` line being present.
"""

from __future__ import annotations

from ..persona import BasePersona, Persona
from ..scenario import ScenarioContext, render_scene_summary

ATTRIBUTE_NAMES = {
    "age": "Age group",
    "gender": "Gender",
    "occupation": "Occupation",
    "mbti": "Personality type (MBTI)",
    "education": "Educational background",
    "prefecture": "Prefecture of residence",
    "location": "Area type",
    "family": "Family structure",
    "religion": "Religion",
    "values": "Beliefs and values",
    "income": "Annual income bracket",
}

GENERATION_SYSTEM = (
    "You write short first-person messages as a specific person would write "
    "them in a specific situation. Reply with the message text only."
)

PLAUSIBILITY_SYSTEM = (
    "You check whether a described person (and optionally their situation) "
    "is realistic. Reply with exactly one label: natural, rare but plausible, "
    "or implausible."
)

RUBRIC_SYSTEM = (
    "You grade short emotional texts. Reply with four integers from 1 to 5 "
    "separated by commas, in the order: emotion match, grammaticality, "
    "lexical diversity and appropriateness, structure and logic."
)


def _sentence_word(n: int) -> str:
    return "sentence" if n == 1 else "sentences"


def _persona_lines(persona: Persona | BasePersona) -> list[str]:
    attrs = persona.attributes() if isinstance(persona, Persona) else persona.as_dict()
    return [f"- {ATTRIBUTE_NAMES[k]}: {v}" for k, v in attrs.items()]


def build_prompt(
    persona: Persona, scenario: ScenarioContext, emotion: str, max_sentences: int = 2
) -> str:
    lines = ["Write a message in the voice of the following person.", "", "Person:"]
    lines += _persona_lines(persona)
    lines += [
        "",
        "Situation:",
        f"- Scene: {render_scene_summary(scenario)}",
        f"- Location: {scenario.location}",
        f"- Activity: {scenario.activity}",
        f"- Talking to: {scenario.interlocutor}",
        f"- Medium: {scenario.medium}",
        f"- Language style: {', '.join(scenario.style)}",
        "",
        f"Target emotion: {emotion}",
        "",
        f"Write at most {max_sentences} short {_sentence_word(max_sentences)}. "
        f"Every sentence must clearly express {emotion}. "
        "Do not name the emotion category as a label and do not add explanations.",
    ]
    return "\n".join(lines)


def length_retry_instruction(found: int, max_sentences: int) -> str:
    return (
        f"Your previous answer had {found} sentences. Rewrite it using at most "
        f"{max_sentences} short {_sentence_word(max_sentences)}. Reply with the text only."
    )


def plausibility_prompt(
    subject: Persona | BasePersona | tuple[Persona, ScenarioContext], strict: bool = False
) -> str:
    if isinstance(subject, tuple):
        persona, scenario = subject
        lines = ["Is this person in this situation realistic?", "", "Person:"]
        lines += _persona_lines(persona)
        lines += [
            "",
            f"Situation: {render_scene_summary(scenario)}",
        ]
    else:
        lines = ["Is this combination of attributes realistic for one person?", ""]
        lines += _persona_lines(subject)
    lines += [
        "",
        "Answer natural if the combination is common, rare but plausible if it is "
        "unusual but possible, implausible if it is contradictory or impossible.",
    ]
    if strict:
        lines.append(
            "Respond with ONLY one of these exact lowercase strings and nothing else: "
            "natural | rare but plausible | implausible"
        )
    return "\n".join(lines)


def rubric_prompt(text: str, emotion: str, strict: bool = False) -> str:
    lines = [
        f"Intended emotion: {emotion}",
        f"Text: {text}",
        "",
        "Score the text from 1 (poor) to 5 (excellent) on:",
        "1. Emotion match: does the text convey the intended emotion?",
        "2. Grammaticality: is word order, grammar and punctuation natural?",
        "3. Lexical diversity and appropriateness: is the vocabulary varied and fitting?",
        "4. Structure and logic: is the text logically structured and consistent?",
    ]
    if strict:
        lines.append(
            "Respond with ONLY four integers between 1 and 5 separated by commas, "
            "for example: 4,5,3,4"
        )
    else:
        lines.append("Answer in the form a,b,c,d.")
    return "\n".join(lines)
