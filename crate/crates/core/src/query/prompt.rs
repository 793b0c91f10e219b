//! Instruction block sent to the LLM parser.

use std::fmt::Write;

use crate::model::ChartType;

const FACETS: &str = "\
- content (Content): what the graphic should communicate and how the information is organized, \
e.g. a category breakdown, a trend over time, a comparison, emphasis on the largest part, key numbers.
- chart_type (Chart Type): the primary chart form used to encode the data, e.g. bars, pie or donut, \
rose chart, timeline. Choose only from the pool listed below.
- layout (Layout): spatial composition and reading order beyond the chart itself, e.g. vertical poster, \
clear sections, a central chart with side notes, radial segments, dense labels.
- illustration (Illustration): whether and how icons or illustrations appear, their density, and whether \
they explain or decorate, e.g. an icon per category, pictorial symbols, scene backgrounds, minimal decoration.
- style (Style): overall look and feel including palette and typography, e.g. clean, editorial, playful, \
pastel, muted, colorful, typography-forward.";

const SCHEMA: &str = r#"{
  "rewrites": {
    "content": string or null,
    "layout": string or null,
    "illustration": string or null,
    "style": string or null
  },
  "chart_types": [chart type names from the pool],
  "weights": {
    "content": number >= 0,
    "chart_type": number >= 0,
    "layout": number >= 0,
    "illustration": number >= 0,
    "style": number >= 0
  }
}"#;

/// Builds the parser prompt for `q`. Identical input gives identical bytes.
pub fn render_parser_prompt(q: &str) -> String {
    let mut out = String::new();
    out.push_str(
        "You turn a search request for infographic exemplars into a structured intent.\n\
         Split the request into five facets:\n",
    );
    out.push_str(FACETS);
    out.push_str("\n\nChart type pool (use these exact names):\n");
    for t in ChartType::ALL {
        let _ = writeln!(out, "- {}", t.name());
    }
    out.push_str(
        "\nRules:\n\
         - For content, layout, illustration and style, write a short description focused on that facet \
         only, or null when the request says nothing about it.\n\
         - chart_types lists every chart type the request asks for; use [] when none is requested.\n\
         - Give each facet a non-negative weight reflecting how much the request cares about it. \
         A facet that is null (or chart_types that is empty) must have weight 0.\n\
         - Reply with one JSON object only, no prose, matching this schema:\n",
    );
    out.push_str(SCHEMA);
    out.push_str("\n\nRequest:\n");
    out.push_str(q);
    out.push('\n');
    out
}
