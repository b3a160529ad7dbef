"""Declarative dashboard specs, semantic validation, and narrative lint.

A dashboard spec is a JSON document (schema in ``data/dashboard_spec.schema.json``)
describing one version of the dashboard: measure catalog, ordered sections
of visuals with layouts and annotations, color and emphasis rules, and the
narrative metadata the lint engine scores.

The lint operationalizes six storytelling elements as mechanical checks:

hook                  1 when narrative.hook exists and both headline
                      measures appear in a kpi-overview section
progressive-focus     fraction of declared_flow realized as an in-order
                      subsequence of section purposes, zeroed unless the
                      dashboard opens with a kpi-overview section
iterative-questioning coverage of non-KPI sections carrying a question
                      (full score at one half), via Section.question or a
                      question-kind annotation
annotations-second-voice   annotation count scaled linearly, 0 -> 0 and
                      18+ -> 1
quantified-comparisons fraction of comparison visuals (bubble, dual-axis,
                      stacked-bar) carrying an annotation with a concrete
                      number in it
pacing-hierarchy      whitespace ratio mapped linearly from 0.15 (score 0)
                      to 0.35 (score 1)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import StoreboardError, UnknownColumn, UnknownMeasure
from .measures import (
    Binary,
    Calculate,
    ColumnAgg,
    Divide,
    MeasureCatalog,
    MeasureRef,
)
from .queries import GroupQuery, query_from_json, query_to_json, run
from .star import StarSchema

SECTION_PURPOSES = (
    "kpi-overview",
    "category-breakdown",
    "market-comparison",
    "discount-analysis",
    "shipping-diagnostics",
    "customer-analysis",
    "other",
)
VISUAL_KINDS = ("kpi-card", "bar", "waterfall", "bubble", "dual-axis", "stacked-bar", "donut", "table")
ANNOTATION_KINDS = ("label", "callout", "question", "interpretation")
ANNOTATION_LAYERS = ("always", "expert-toggle")
COLOR_ROLES = ("loss-red", "profit-green", "primary-blue", "secondary-grey")
EMPHASIS_STYLES = ("border-highlight", "dim-others")

COMPARISON_KINDS = ("bubble", "dual-axis", "stacked-bar")
ANNOTATION_FULL_SCORE = 18
QUESTION_COVERAGE_FULL = 0.5
WHITESPACE_FLOOR = 0.15
WHITESPACE_FULL = 0.35

ELEMENTS = (
    "hook",
    "progressive-focus",
    "iterative-questioning",
    "annotations-second-voice",
    "quantified-comparisons",
    "pacing-hierarchy",
)


class SpecFormatError(StoreboardError):
    """The file is not a structurally valid dashboard spec."""


@dataclass
class Annotation:
    text: str
    kind: str
    anchor: tuple[float, float]
    layer: str = "always"


@dataclass
class ColorRule:
    when: dict  # {"measure": name, "sign": "negative"|"positive"} or {"column":, "equals":}
    role: str


@dataclass
class EmphasisRule:
    target: str
    style: str
    rationale: str = ""


@dataclass
class Layout:
    x: float
    y: float
    w: float
    h: float


@dataclass
class Visual:
    kind: str
    query: GroupQuery
    layout: Layout
    annotations: list[Annotation] = field(default_factory=list)
    color_rules: list[ColorRule] = field(default_factory=list)
    emphasis: EmphasisRule | None = None


@dataclass
class Section:
    heading: str
    purpose: str
    visuals: list[Visual]
    question: str | None = None


@dataclass
class NarrativeMeta:
    hook: dict | None  # {"headline_measures": [a, b], "tension_text": str}
    declared_flow: list[str]
    questions: list[str]


@dataclass
class DashboardSpec:
    version_label: str
    title: str
    canvas: tuple[float, float]
    sections: list[Section]
    catalog: MeasureCatalog
    narrative: NarrativeMeta
    catalog_sources: dict[str, str] = field(default_factory=dict)


@dataclass
class NarrativeScore:
    elements: dict[str, float]
    gaps: list[dict]
    structural: dict

    def all_perfect(self) -> bool:
        return all(v == 1.0 for v in self.elements.values())

    def to_json(self) -> dict:
        return {"elements": self.elements, "gaps": self.gaps, "structural": self.structural}


# ---------------------------------------------------------------------------
# Loading


def _spec_schema() -> dict:
    text = resources.files("storeboard.data").joinpath("dashboard_spec.schema.json").read_text("utf-8")
    return json.loads(text)


def spec_from_json(doc: dict) -> DashboardSpec:
    """Build a DashboardSpec from its JSON document (schema-validated)."""
    try:
        jsonschema.validate(doc, _spec_schema())
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path)
        raise SpecFormatError(f"schema violation at {path or '<root>'}: {err.message}") from None

    catalog = MeasureCatalog()
    try:
        for name, source in doc["catalog"].items():
            catalog.register(name, source)
    except StoreboardError as err:
        raise SpecFormatError(f"catalog entry failed to parse: {err}") from None

    sections = []
    for sdoc in doc["sections"]:
        visuals = []
        for vdoc in sdoc["visuals"]:
            annotations = [
                Annotation(
                    a["text"],
                    a["kind"],
                    (float(a["anchor"]["x"]), float(a["anchor"]["y"])),
                    a.get("layer", "always"),
                )
                for a in vdoc.get("annotations", [])
            ]
            rules = [ColorRule(r["when"], r["role"]) for r in vdoc.get("color_rules", [])]
            emphasis = None
            if vdoc.get("emphasis"):
                e = vdoc["emphasis"]
                emphasis = EmphasisRule(e["target"], e["style"], e.get("rationale", ""))
            layout = Layout(**{k: float(v) for k, v in vdoc["layout"].items()})
            visuals.append(
                Visual(vdoc["kind"], query_from_json(vdoc["query"]), layout, annotations, rules, emphasis)
            )
        sections.append(Section(sdoc["heading"], sdoc["purpose"], visuals, sdoc.get("question")))

    ndoc = doc["narrative"]
    narrative = NarrativeMeta(
        hook=ndoc.get("hook"),
        declared_flow=list(ndoc.get("declared_flow", [])),
        questions=list(ndoc.get("questions", [])),
    )
    return DashboardSpec(
        version_label=doc["version_label"],
        title=doc["title"],
        canvas=(float(doc["canvas"]["width"]), float(doc["canvas"]["height"])),
        sections=sections,
        catalog=catalog,
        narrative=narrative,
        catalog_sources=dict(doc["catalog"]),
    )


def spec_to_json(spec: DashboardSpec) -> dict:
    return {
        "version_label": spec.version_label,
        "title": spec.title,
        "canvas": {"width": spec.canvas[0], "height": spec.canvas[1]},
        "catalog": dict(spec.catalog_sources),
        "sections": [
            {
                "heading": s.heading,
                "purpose": s.purpose,
                **({"question": s.question} if s.question else {}),
                "visuals": [
                    {
                        "kind": v.kind,
                        "query": query_to_json(v.query),
                        "layout": {"x": v.layout.x, "y": v.layout.y, "w": v.layout.w, "h": v.layout.h},
                        "annotations": [
                            {
                                "text": a.text,
                                "kind": a.kind,
                                "anchor": {"x": a.anchor[0], "y": a.anchor[1]},
                                "layer": a.layer,
                            }
                            for a in v.annotations
                        ],
                        "color_rules": [{"when": r.when, "role": r.role} for r in v.color_rules],
                        **(
                            {
                                "emphasis": {
                                    "target": v.emphasis.target,
                                    "style": v.emphasis.style,
                                    "rationale": v.emphasis.rationale,
                                }
                            }
                            if v.emphasis
                            else {}
                        ),
                    }
                    for v in s.visuals
                ],
            }
            for s in spec.sections
        ],
        "narrative": {
            "hook": spec.narrative.hook,
            "declared_flow": list(spec.narrative.declared_flow),
            "questions": list(spec.narrative.questions),
        },
    }


def load_spec(path) -> DashboardSpec:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as err:
        raise SpecFormatError(f"{path}: not valid JSON ({err})") from None
    return spec_from_json(doc)


def bundled_spec(version: str) -> DashboardSpec:
    """One of the four committed dashboard versions (v1..v4)."""
    text = resources.files("storeboard.data").joinpath(f"{version}.json").read_text("utf-8")
    return spec_from_json(json.loads(text))


BUNDLED_VERSIONS = ("v1", "v2", "v3", "v4")


# ---------------------------------------------------------------------------
# Geometry


def union_area(boxes: list[Layout]) -> float:
    """Exact area of the union of axis-aligned rectangles (grid decomposition)."""
    if not boxes:
        return 0.0
    xs = sorted({b.x for b in boxes} | {b.x + b.w for b in boxes})
    ys = sorted({b.y for b in boxes} | {b.y + b.h for b in boxes})
    area = 0.0
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            cx = (xs[i] + xs[i + 1]) / 2
            cy = (ys[j] + ys[j + 1]) / 2
            if any(b.x <= cx <= b.x + b.w and b.y <= cy <= b.y + b.h for b in boxes):
                area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j])
    return area


def whitespace_ratio(spec: DashboardSpec) -> float:
    """1 - union(visual boxes) / canvas area."""
    boxes = [v.layout for s in spec.sections for v in s.visuals]
    canvas = spec.canvas[0] * spec.canvas[1]
    if canvas <= 0:
        return 0.0
    return 1.0 - union_area(boxes) / canvas


# ---------------------------------------------------------------------------
# Validation (semantic, data-aware)


def _measure_mentions_column(catalog: MeasureCatalog, name: str, column: str) -> bool:
    def walk(expr) -> bool:
        if isinstance(expr, ColumnAgg):
            return expr.column == column
        if isinstance(expr, MeasureRef):
            return expr.name in catalog and walk(catalog.expr(expr.name))
        if isinstance(expr, Divide):
            return any(walk(e) for e in (expr.numerator, expr.denominator, expr.alternate))
        if isinstance(expr, Binary):
            return walk(expr.left) or walk(expr.right)
        if isinstance(expr, Calculate):
            return walk(expr.inner) or any(f.column == column for f in expr.filters)
        return False

    return name in catalog and walk(catalog.expr(name))


def validate(spec: DashboardSpec, schema: StarSchema | None, catalog: MeasureCatalog | None) -> list[str]:
    """Semantic violations; empty list means the spec holds every invariant.

    When a star schema is provided, every visual query is executed so
    unknown columns/measures and emphasis targets are caught against data.
    """
    violations: list[str] = []
    if not spec.sections:
        violations.append("spec has no sections")
    if spec.narrative.hook:
        pair = spec.narrative.hook.get("headline_measures", [])
        if len(pair) != 2 or pair[0] == pair[1]:
            violations.append("narrative hook needs two distinct headline measures")
        for m in pair:
            if m not in spec.catalog:
                violations.append(f"hook measure [{m}] missing from spec catalog")
    for purpose in spec.narrative.declared_flow:
        if purpose not in SECTION_PURPOSES:
            violations.append(f"declared_flow has unknown purpose {purpose!r}")

    cw, ch = spec.canvas
    for si, section in enumerate(spec.sections):
        where = f"section {si} ({section.heading!r})"
        if not section.visuals:
            violations.append(f"{where}: no visuals")
        for vi, visual in enumerate(section.visuals):
            vwhere = f"{where} visual {vi} ({visual.kind})"
            box = visual.layout
            if box.x < 0 or box.y < 0 or box.x + box.w > cw or box.y + box.h > ch or box.w <= 0 or box.h <= 0:
                violations.append(f"{vwhere}: layout box outside canvas")
            measures = visual.query.measures
            for m in measures:
                if m not in spec.catalog:
                    violations.append(f"{vwhere}: measure [{m}] not in spec catalog")
            if visual.kind == "dual-axis" and len(measures) != 2:
                violations.append(f"{vwhere}: dual-axis visuals carry exactly 2 measures, got {len(measures)}")
            if visual.kind == "bubble" and len(measures) < 3:
                violations.append(f"{vwhere}: bubble visuals encode >= 3 quantities, got {len(measures)}")
            for a in visual.annotations:
                if not a.text.strip():
                    violations.append(f"{vwhere}: empty annotation text")
            seen_rules = set()
            for rule in visual.color_rules:
                key = json.dumps(rule.when, sort_keys=True)
                if key in seen_rules:
                    violations.append(f"{vwhere}: duplicate color rule predicate {rule.when}")
                seen_rules.add(key)
            if schema is not None:
                try:
                    result = run(schema, spec.catalog, visual.query)
                except (UnknownColumn, UnknownMeasure, StoreboardError) as err:
                    violations.append(f"{vwhere}: query failed: {err}")
                    continue
                if visual.emphasis is not None:
                    keys = {str(row.keys[0]) for row in result.rows if row.keys}
                    if visual.emphasis.target not in keys:
                        violations.append(
                            f"{vwhere}: emphasis target {visual.emphasis.target!r} absent from result groups"
                        )
    return violations


# ---------------------------------------------------------------------------
# Lint


def _annotations(spec: DashboardSpec) -> list[Annotation]:
    return [a for s in spec.sections for v in s.visuals for a in v.annotations]


def _flow_realized_fraction(declared: list[str], actual: list[str]) -> float:
    if not declared:
        return 0.0
    matched = 0
    pos = 0
    for purpose in declared:
        while pos < len(actual) and actual[pos] != purpose:
            pos += 1
        if pos < len(actual):
            matched += 1
            pos += 1
    return matched / len(declared)


def _semantic_color_coverage(spec: DashboardSpec) -> float | None:
    """Share of profit-sign visuals carrying loss-red and profit-green rules."""
    profit_visuals = []
    for s in spec.sections:
        for v in s.visuals:
            if any(_measure_mentions_column(spec.catalog, m, "Profit") for m in v.query.measures):
                profit_visuals.append(v)
    if not profit_visuals:
        return None
    covered = 0
    for v in profit_visuals:
        roles = {r.role for r in v.color_rules}
        if roles & {"loss-red", "profit-green"}:
            covered += 1
    return covered / len(profit_visuals)


def lint(spec: DashboardSpec) -> NarrativeScore:
    """Score the six narrative elements and report gaps for any below 1."""
    elements: dict[str, float] = {}
    gaps: list[dict] = []

    def gap(element: str, description: str) -> None:
        gaps.append({"element": element, "description": description})

    # hook
    hook_score = 0.0
    hook = spec.narrative.hook
    if hook:
        pair = hook.get("headline_measures", [])
        kpi_measures = {
            m
            for s in spec.sections
            if s.purpose == "kpi-overview"
            for v in s.visuals
            for m in v.query.measures
        }
        if len(pair) == 2 and set(pair) <= kpi_measures:
            hook_score = 1.0
        else:
            gap("hook", "hook measures do not headline a kpi-overview section")
    else:
        gap("hook", "no opening tension: narrative.hook is missing")
    elements["hook"] = hook_score

    # progressive focus
    purposes = [s.purpose for s in spec.sections]
    fraction = _flow_realized_fraction(spec.narrative.declared_flow, purposes)
    if not spec.narrative.declared_flow:
        progressive = 0.0
        gap("progressive-focus", "no declared narrative flow")
    elif purposes and purposes[0] != "kpi-overview":
        progressive = 0.0
        gap("progressive-focus", "dashboard does not open with a KPI overview")
    else:
        progressive = fraction
        if fraction < 1.0:
            gap("progressive-focus", "declared flow only partially realized in section order")
    elements["progressive-focus"] = progressive

    # iterative questioning
    non_kpi = [s for s in spec.sections if s.purpose != "kpi-overview"]
    if non_kpi:
        covered = 0
        for s in non_kpi:
            has_question = bool(s.question) or any(
                a.kind == "question" for v in s.visuals for a in v.annotations
            )
            covered += int(has_question)
        coverage = covered / len(non_kpi)
        questioning = min(1.0, coverage / QUESTION_COVERAGE_FULL)
    else:
        questioning = 1.0
    if questioning < 1.0:
        gap("iterative-questioning", "fewer than half of the diagnostic sections pose a question")
    elements["iterative-questioning"] = questioning

    # annotations / second voice
    count = len(_annotations(spec))
    annotations_score = min(1.0, count / ANNOTATION_FULL_SCORE)
    if annotations_score < 1.0:
        gap(
            "annotations-second-voice",
            f"{count} annotations; {ANNOTATION_FULL_SCORE}+ needed for a full second voice",
        )
    elements["annotations-second-voice"] = annotations_score

    # quantified comparisons
    comparisons = [v for s in spec.sections for v in s.visuals if v.kind in COMPARISON_KINDS]
    if comparisons:
        labeled = sum(
            1
            for v in comparisons
            if any(
                a.kind in ("label", "callout") and any(ch.isdigit() for ch in a.text)
                for a in v.annotations
            )
        )
        quantified = labeled / len(comparisons)
    else:
        quantified = 1.0
    if quantified < 1.0:
        gap("quantified-comparisons", "a comparison visual lacks a concrete value label")
    elements["quantified-comparisons"] = quantified

    # pacing / hierarchy
    ws = whitespace_ratio(spec)
    pacing = max(0.0, min(1.0, (ws - WHITESPACE_FLOOR) / (WHITESPACE_FULL - WHITESPACE_FLOOR)))
    if pacing < 1.0:
        gap("pacing-hierarchy", f"whitespace ratio {ws:.2f} below the {WHITESPACE_FULL:.2f} target")
    elements["pacing-hierarchy"] = pacing

    structural = {
        "annotation_count": count,
        "whitespace_ratio": ws,
        "semantic_color_coverage": _semantic_color_coverage(spec),
        "measure_count": len(spec.catalog),
    }
    return NarrativeScore(elements, gaps, structural)


# ---------------------------------------------------------------------------
# Version diffing


def diff_versions(a: DashboardSpec, b: DashboardSpec) -> dict:
    """Structured changes from a to b: measures, annotations, colors, flow."""
    a_measures = set(a.catalog.names())
    b_measures = set(b.catalog.names())
    a_cov = _semantic_color_coverage(a)
    b_cov = _semantic_color_coverage(b)
    a_flow = list(a.narrative.declared_flow)
    b_flow = list(b.narrative.declared_flow)
    return {
        "from": a.version_label,
        "to": b.version_label,
        "measures_added": sorted(b_measures - a_measures),
        "measures_removed": sorted(a_measures - b_measures),
        "measure_delta": len(b_measures) - len(a_measures),
        "annotation_delta": len(_annotations(b)) - len(_annotations(a)),
        "color_coverage_delta": (b_cov or 0.0) - (a_cov or 0.0),
        "flow_added": [p for p in b_flow if p not in a_flow],
        "flow_removed": [p for p in a_flow if p not in b_flow],
        "whitespace_delta": whitespace_ratio(b) - whitespace_ratio(a),
    }
