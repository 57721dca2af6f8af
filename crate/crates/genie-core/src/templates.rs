//! Task definitions, few-shot prompt assembly, and completion parsing.
//!
//! A task is described by an ordered list of marker strings (for QA:
//! `[document]`, `[question]`, `[answer]`). Prompts interleave those markers
//! with exemplar content; completions are parsed back into elements by
//! scanning for the same markers. Marker matching is exact and
//! case-sensitive — the filter stage depends on that lexical contract.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::text;

/// Exact positive rational, used for length caps so boundary comparisons
/// never suffer float rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    num: u32,
    den: u32,
}

impl Ratio {
    pub fn new(num: u32, den: u32) -> Result<Ratio, TemplateError> {
        if num == 0 || den == 0 {
            return Err(TemplateError::InvalidRatio(format!("{num}/{den}")));
        }
        Ok(Ratio { num, den })
    }

    /// True when `words` strictly exceeds `self * base_words`.
    pub fn exceeded_by(&self, words: usize, base_words: usize) -> bool {
        (words as u64) * (self.den as u64) > (base_words as u64) * (self.num as u64)
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Ratio {
    type Err = TemplateError;

    /// Accepts `"3/2"`, `"1.5"`, and plain integers.
    fn from_str(s: &str) -> Result<Ratio, TemplateError> {
        let bad = || TemplateError::InvalidRatio(s.to_owned());
        if let Some((n, d)) = s.split_once('/') {
            let num: u32 = n.trim().parse().map_err(|_| bad())?;
            let den: u32 = d.trim().parse().map_err(|_| bad())?;
            return Ratio::new(num, den);
        }
        if let Some((int, frac)) = s.split_once('.') {
            let digits = frac.len() as u32;
            if digits == 0 || digits > 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let den = 10u32.pow(digits);
            let int: u32 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            let frac: u32 = frac.parse().map_err(|_| bad())?;
            let num = int.checked_mul(den).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
            let g = gcd(num, den);
            return Ratio::new(num / g, den / g);
        }
        let num: u32 = s.trim().parse().map_err(|_| bad())?;
        Ratio::new(num, 1)
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

impl Serialize for Ratio {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Ratio, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// The three supported task families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Qa,
    Summarization,
    Extraction,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TaskKind::Qa => "qa",
            TaskKind::Summarization => "summarization",
            TaskKind::Extraction => "extraction",
        };
        f.write_str(name)
    }
}

/// A task definition: element markers, optional fixed instruction, length
/// cap, and shot count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_name: TaskKind,
    /// Ordered marker strings; the first is always the document marker.
    pub markers: Vec<String>,
    /// Fixed instruction text carried by the first element marker
    /// (e.g. the `[summarize]` instruction). `None` for QA.
    pub instruction_marker_text: Option<String>,
    /// Generated text longer than `cap * content_words` is rejected.
    pub length_ratio_cap: Ratio,
    pub min_example_words: usize,
    pub shots: usize,
}

impl TaskSpec {
    pub fn qa() -> TaskSpec {
        TaskSpec {
            task_name: TaskKind::Qa,
            markers: vec!["[document]".into(), "[question]".into(), "[answer]".into()],
            instruction_marker_text: None,
            length_ratio_cap: Ratio { num: 3, den: 2 },
            min_example_words: 10,
            shots: 4,
        }
    }

    pub fn summarization() -> TaskSpec {
        TaskSpec {
            task_name: TaskKind::Summarization,
            markers: vec!["[document]".into(), "[summarize]".into(), "[summary]".into()],
            instruction_marker_text: Some("Summarize the document in one paragraph.".into()),
            length_ratio_cap: Ratio { num: 1, den: 4 },
            min_example_words: 10,
            shots: 4,
        }
    }

    pub fn extraction() -> TaskSpec {
        TaskSpec {
            task_name: TaskKind::Extraction,
            markers: vec!["[document]".into(), "[extract]".into(), "[extraction]".into()],
            instruction_marker_text: Some("List the key facts stated in the document.".into()),
            length_ratio_cap: Ratio { num: 1, den: 1 },
            min_example_words: 10,
            shots: 4,
        }
    }

    pub fn for_task(kind: TaskKind) -> TaskSpec {
        match kind {
            TaskKind::Qa => TaskSpec::qa(),
            TaskKind::Summarization => TaskSpec::summarization(),
            TaskKind::Extraction => TaskSpec::extraction(),
        }
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        if self.markers.len() < 2 {
            return Err(TemplateError::InvalidTaskSpec(
                "a task needs the document marker plus at least one element marker".into(),
            ));
        }
        for (i, a) in self.markers.iter().enumerate() {
            if a.trim().is_empty() {
                return Err(TemplateError::InvalidTaskSpec("blank marker".into()));
            }
            for (j, b) in self.markers.iter().enumerate() {
                if i != j && b.contains(a.as_str()) {
                    return Err(TemplateError::InvalidTaskSpec(format!(
                        "marker {a:?} is a substring of {b:?}; matching would be ambiguous"
                    )));
                }
            }
        }
        if self.shots == 0 {
            return Err(TemplateError::InvalidTaskSpec("shots must be at least 1".into()));
        }
        Ok(())
    }

    pub fn document_marker(&self) -> &str {
        &self.markers[0]
    }

    /// Marker appended to the prompt as the generation cue.
    pub fn generation_cue(&self) -> &str {
        &self.markers[1]
    }

    /// All markers after the document marker, in template order.
    pub fn element_markers(&self) -> &[String] {
        &self.markers[1..]
    }

    /// True for the marker that carries the fixed task instruction.
    pub fn is_instruction_marker(&self, marker: &str) -> bool {
        self.instruction_marker_text.is_some() && marker == self.markers[1]
    }
}

/// One worked content-example pair for the few-shot prompt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Exemplar {
    pub content: String,
    pub elements: Vec<Element>,
}

/// A `(marker, text)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub marker: String,
    pub text: String,
}

impl Exemplar {
    pub fn validate(&self, task: &TaskSpec) -> Result<(), TemplateError> {
        let got: Vec<&str> = self.elements.iter().map(|e| e.marker.as_str()).collect();
        let want: Vec<&str> = task.element_markers().iter().map(String::as_str).collect();
        if got != want {
            return Err(TemplateError::InvalidExemplar(format!(
                "element markers {got:?} do not match task markers {want:?}"
            )));
        }
        if self.content.trim().is_empty()
            || self.elements.iter().any(|e| e.text.trim().is_empty())
        {
            return Err(TemplateError::InvalidExemplar("blank content or element text".into()));
        }
        Ok(())
    }
}

/// Parse a JSONL exemplar file: one `{content, elements: [{marker, text}]}`
/// object per line.
pub fn parse_exemplar_jsonl(raw: &str, task: &TaskSpec) -> Result<Vec<Exemplar>, TemplateError> {
    let mut out = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: Exemplar = serde_json::from_str(line).map_err(|e| {
            TemplateError::InvalidExemplar(format!("line {}: {e}", lineno + 1))
        })?;
        ex.validate(task)?;
        out.push(ex);
    }
    Ok(out)
}

/// Built-in exemplar sets, used when the config does not point at a file.
pub fn default_exemplars(task: &TaskSpec) -> Result<Vec<Exemplar>, TemplateError> {
    let raw = match task.task_name {
        TaskKind::Qa => include_str!("../data/exemplars/qa.jsonl"),
        TaskKind::Summarization => include_str!("../data/exemplars/summarization.jsonl"),
        TaskKind::Extraction => include_str!("../data/exemplars/extraction.jsonl"),
    };
    parse_exemplar_jsonl(raw, task)
}

/// A rendered prompt plus the cue the parser must re-prepend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuiltPrompt {
    pub text: String,
    pub cue: String,
}

/// Assemble the few-shot prompt: each exemplar as a document block followed
/// by its element blocks, exemplars separated by blank lines, then the target
/// content and the first element marker as a trailing generation cue.
pub fn build_prompt(
    task: &TaskSpec,
    exemplars: &[Exemplar],
    target_content: &str,
) -> Result<BuiltPrompt, TemplateError> {
    task.validate()?;
    if exemplars.len() != task.shots {
        return Err(TemplateError::ShotCountMismatch {
            expected: task.shots,
            got: exemplars.len(),
        });
    }
    if target_content.trim().is_empty() {
        return Err(TemplateError::EmptyContent);
    }

    let mut blocks = Vec::with_capacity(exemplars.len() + 1);
    for ex in exemplars {
        ex.validate(task)?;
        let mut lines = vec![format!("{} {}", task.document_marker(), ex.content.trim())];
        for el in &ex.elements {
            let text = if task.is_instruction_marker(&el.marker) {
                task.instruction_marker_text.as_deref().unwrap_or(&el.text)
            } else {
                &el.text
            };
            lines.push(format!("{} {}", el.marker, text.trim()));
        }
        blocks.push(lines.join("\n"));
    }
    blocks.push(format!(
        "{} {}\n{}",
        task.document_marker(),
        target_content.trim(),
        task.generation_cue()
    ));

    Ok(BuiltPrompt {
        text: blocks.join("\n\n"),
        cue: task.generation_cue().to_owned(),
    })
}

/// A completion parsed back into its template elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedExample {
    /// `(marker, text)` pairs in template order.
    pub elements: Vec<Element>,
    pub raw_completion: String,
}

impl ParsedExample {
    pub fn element(&self, marker: &str) -> Option<&str> {
        self.elements
            .iter()
            .find(|e| e.marker == marker)
            .map(|e| e.text.as_str())
    }

    /// Elements the model actually authored: everything except the fixed
    /// instruction element.
    pub fn payload_elements<'a>(&'a self, task: &'a TaskSpec) -> impl Iterator<Item = &'a Element> {
        self.elements
            .iter()
            .filter(move |e| !task.is_instruction_marker(&e.marker))
    }

    /// Generated text joined in marker order with the markers stripped.
    pub fn payload_text(&self, task: &TaskSpec) -> String {
        self.payload_elements(task)
            .map(|e| e.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Word count of the generated payload.
    pub fn payload_word_count(&self, task: &TaskSpec) -> usize {
        self.payload_elements(task)
            .map(|e| text::word_count(&e.text))
            .sum()
    }

    /// The response element (answer, summary, extraction): the last element.
    pub fn response_text(&self) -> &str {
        self.elements.last().map(|e| e.text.as_str()).unwrap_or("")
    }

    /// The instruction for quality scoring: the task's fixed instruction when
    /// there is one, otherwise the generated elements before the response
    /// (for QA, the question).
    pub fn instruction_text(&self, task: &TaskSpec) -> String {
        if let Some(fixed) = &task.instruction_marker_text {
            return fixed.clone();
        }
        let parts: Vec<&str> = self
            .elements
            .iter()
            .take(self.elements.len().saturating_sub(1))
            .map(|e| e.text.as_str())
            .collect();
        parts.join(" ")
    }

    /// Render this example the way the model would have emitted it, for
    /// round-trip checks: returns the cue and the completion after it.
    pub fn render_completion(&self, task: &TaskSpec) -> (String, String) {
        let rendered = self
            .elements
            .iter()
            .map(|e| format!("{} {}", e.marker, e.text))
            .collect::<Vec<_>>()
            .join("\n");
        let cue = task.generation_cue().to_owned();
        let completion = rendered
            .strip_prefix(cue.as_str())
            .unwrap_or(rendered.as_str())
            .to_owned();
        (cue, completion)
    }
}

/// Why a completion failed to parse into an example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", content = "marker", rename_all = "snake_case")]
pub enum FormatError {
    #[error("required marker {0:?} is missing")]
    MissingMarker(String),
    #[error("element {0:?} is empty")]
    EmptyElement(String),
    #[error("markers appear out of template order")]
    OutOfOrderMarkers,
}

/// Parse a raw completion into template elements.
///
/// The cue recorded at prompt time is re-prepended, the text is cut at any
/// document marker (the model starting a fresh exemplar), and the required
/// markers are scanned in template order. Text after the final marker runs to
/// the next marker occurrence or the end of the completion.
pub fn parse_completion(
    task: &TaskSpec,
    cue: &str,
    completion: &str,
) -> Result<ParsedExample, FormatError> {
    let full = format!("{cue}{completion}");
    // anything after a document marker belongs to a new example
    let scan = match full.find(task.document_marker()) {
        Some(pos) => &full[..pos],
        None => full.as_str(),
    };

    let required = task.element_markers();
    let mut occurrences: Vec<(usize, usize)> = Vec::new(); // (byte pos, marker index)
    for (mi, marker) in required.iter().enumerate() {
        let mut from = 0;
        while let Some(rel) = scan[from..].find(marker.as_str()) {
            occurrences.push((from + rel, mi));
            from += rel + marker.len();
        }
    }
    occurrences.sort_unstable();

    for (i, marker) in required.iter().enumerate() {
        match occurrences.get(i) {
            Some(&(_, mi)) if mi == i => {}
            _ => {
                if !occurrences.iter().any(|&(_, mi)| mi == i) {
                    return Err(FormatError::MissingMarker(marker.clone()));
                }
                return Err(FormatError::OutOfOrderMarkers);
            }
        }
    }

    let mut elements = Vec::with_capacity(required.len());
    for i in 0..required.len() {
        let (start, _) = occurrences[i];
        let text_start = start + required[i].len();
        let text_end = occurrences
            .get(i + 1)
            .map(|&(pos, _)| pos)
            .unwrap_or(scan.len());
        let text = scan[text_start..text_end].trim();
        if text.is_empty() {
            return Err(FormatError::EmptyElement(required[i].clone()));
        }
        elements.push(Element {
            marker: required[i].clone(),
            text: text.to_owned(),
        });
    }

    Ok(ParsedExample {
        elements,
        raw_completion: completion.to_owned(),
    })
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("expected {expected} exemplars, got {got}")]
    ShotCountMismatch { expected: usize, got: usize },
    #[error("target content is empty")]
    EmptyContent,
    #[error("invalid task spec: {0}")]
    InvalidTaskSpec(String),
    #[error("invalid exemplar: {0}")]
    InvalidExemplar(String),
    #[error("invalid ratio: {0}")]
    InvalidRatio(String),
}
