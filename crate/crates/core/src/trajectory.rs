//! Tagged response grammar: `<think>`, `<answer>`, `<search>`, `<result>`.
//!
//! A response is a sequence of tagged segments, optionally separated by
//! free-form filler text. The only structurally valid shape is
//!
//! ```text
//! Think Answer (Search Result Think Answer)*
//! ```
//!
//! Filler is kept so the original text can be reproduced, but it never
//! influences validation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Think,
    Answer,
    Search,
    Result,
}

impl SegmentKind {
    pub const ALL: [SegmentKind; 4] = [
        SegmentKind::Think,
        SegmentKind::Answer,
        SegmentKind::Search,
        SegmentKind::Result,
    ];

    pub fn tag_name(self) -> &'static str {
        match self {
            SegmentKind::Think => "think",
            SegmentKind::Answer => "answer",
            SegmentKind::Search => "search",
            SegmentKind::Result => "result",
        }
    }

    pub fn open_tag(self) -> &'static str {
        match self {
            SegmentKind::Think => "<think>",
            SegmentKind::Answer => "<answer>",
            SegmentKind::Search => "<search>",
            SegmentKind::Result => "<result>",
        }
    }

    pub fn close_tag(self) -> &'static str {
        match self {
            SegmentKind::Think => "</think>",
            SegmentKind::Answer => "</answer>",
            SegmentKind::Search => "</search>",
            SegmentKind::Result => "</result>",
        }
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrajectoryError {
    #[error("unclosed <{kind}> tag at byte {offset}")]
    UnclosedTag { kind: SegmentKind, offset: usize },
    /// `expected` is `None` for a closing tag that appears outside any segment.
    #[error("mismatched </{found}> at byte {offset} (open segment: {expected:?})")]
    MismatchedTag {
        expected: Option<SegmentKind>,
        found: SegmentKind,
        offset: usize,
    },
    #[error("<{inner}> opened at byte {offset} inside a <{outer}> segment")]
    NestedTag {
        outer: SegmentKind,
        inner: SegmentKind,
        offset: usize,
    },
    #[error("segment body for <{kind}> contains a tag token")]
    InvalidSegment { kind: SegmentKind },
    #[error("trajectory has no <answer> segment")]
    NoAnswer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Open(SegmentKind),
    Close(SegmentKind),
}

impl Tag {
    fn token(self) -> &'static str {
        match self {
            Tag::Open(k) => k.open_tag(),
            Tag::Close(k) => k.close_tag(),
        }
    }
}

/// Returns the tag token starting exactly at `text[at..]`, if any.
fn tag_at(text: &str, at: usize) -> Option<Tag> {
    let rest = &text[at..];
    if !rest.starts_with('<') {
        return None;
    }
    SegmentKind::ALL.iter().find_map(|&k| {
        if rest.starts_with(k.open_tag()) {
            Some(Tag::Open(k))
        } else if rest.starts_with(k.close_tag()) {
            Some(Tag::Close(k))
        } else {
            None
        }
    })
}

fn contains_tag(text: &str) -> bool {
    text.match_indices('<')
        .any(|(i, _)| tag_at(text, i).is_some())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    kind: SegmentKind,
    body: String,
}

impl Segment {
    /// Fails if `body` contains any of the eight tag tokens.
    pub fn new(kind: SegmentKind, body: impl Into<String>) -> Result<Self, TrajectoryError> {
        let body = body.into();
        if contains_tag(&body) {
            return Err(TrajectoryError::InvalidSegment { kind });
        }
        Ok(Segment { kind, body })
    }

    /// Builds a segment without checking the body. `render` still rejects
    /// bodies that contain tag tokens.
    pub fn new_unchecked(kind: SegmentKind, body: impl Into<String>) -> Self {
        Segment {
            kind,
            body: body.into(),
        }
    }

    pub fn think(body: impl Into<String>) -> Self {
        Self::new_unchecked(SegmentKind::Think, body)
    }

    pub fn answer(body: impl Into<String>) -> Self {
        Self::new_unchecked(SegmentKind::Answer, body)
    }

    pub fn search(body: impl Into<String>) -> Self {
        Self::new_unchecked(SegmentKind::Search, body)
    }

    pub fn result(body: impl Into<String>) -> Self {
        Self::new_unchecked(SegmentKind::Result, body)
    }

    pub fn kind(&self) -> SegmentKind {
        self.kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn set_body(&mut self, body: impl Into<String>) {
        self.body = body.into();
    }
}

/// An ordered list of segments.
///
/// Parsed trajectories also remember their source text and the filler
/// between segments; equality only looks at the segments.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    segments: Vec<Segment>,
    raw: Option<String>,
    filler: Vec<String>,
}

impl PartialEq for Trajectory {
    fn eq(&self, other: &Self) -> bool {
        self.segments == other.segments
    }
}

impl Eq for Trajectory {}

impl Trajectory {
    pub fn new(segments: Vec<Segment>) -> Self {
        Trajectory {
            segments,
            raw: None,
            filler: Vec::new(),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segments_mut(&mut self) -> &mut Vec<Segment> {
        &mut self.segments
    }

    pub fn kinds(&self) -> Vec<SegmentKind> {
        self.segments.iter().map(Segment::kind).collect()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Source text this trajectory was parsed from.
    pub fn raw(&self) -> Option<&str> {
        self.raw.as_deref()
    }

    /// Text outside the tags: `filler()[i]` precedes segment `i`, the last
    /// entry trails the final segment. Empty for constructed trajectories.
    pub fn filler(&self) -> &[String] {
        &self.filler
    }

    /// Reassembles the exact source text from segments and filler. For a
    /// trajectory that was not parsed this is the same as [`render`].
    pub fn to_source_text(&self) -> Result<String, TrajectoryError> {
        if self.filler.len() != self.segments.len() + 1 {
            return render(self);
        }
        let mut out = String::new();
        for (gap, seg) in self.filler.iter().zip(&self.segments) {
            out.push_str(gap);
            push_segment(&mut out, seg);
        }
        out.push_str(&self.filler[self.segments.len()]);
        Ok(out)
    }
}

fn push_segment(out: &mut String, seg: &Segment) {
    out.push_str(seg.kind.open_tag());
    out.push_str(&seg.body);
    out.push_str(seg.kind.close_tag());
}

pub fn parse(text: &str) -> Result<Trajectory, TrajectoryError> {
    let mut segments = Vec::new();
    let mut filler = Vec::new();
    // (kind, offset of the open tag, offset where the body starts)
    let mut open: Option<(SegmentKind, usize, usize)> = None;
    let mut gap_start = 0;

    let mut cursor = 0;
    while let Some(rel) = text[cursor..].find('<') {
        let at = cursor + rel;
        let Some(tag) = tag_at(text, at) else {
            cursor = at + 1;
            continue;
        };
        match (open, tag) {
            (None, Tag::Open(kind)) => {
                filler.push(text[gap_start..at].to_string());
                open = Some((kind, at, at + tag.token().len()));
            }
            (None, Tag::Close(found)) => {
                return Err(TrajectoryError::MismatchedTag {
                    expected: None,
                    found,
                    offset: at,
                });
            }
            (Some((outer, _, _)), Tag::Open(inner)) => {
                return Err(TrajectoryError::NestedTag {
                    outer,
                    inner,
                    offset: at,
                });
            }
            (Some((kind, _, body_start)), Tag::Close(found)) => {
                if found != kind {
                    return Err(TrajectoryError::MismatchedTag {
                        expected: Some(kind),
                        found,
                        offset: at,
                    });
                }
                segments.push(Segment::new_unchecked(kind, &text[body_start..at]));
                open = None;
                gap_start = at + tag.token().len();
            }
        }
        cursor = at + tag.token().len();
    }

    if let Some((kind, offset, _)) = open {
        return Err(TrajectoryError::UnclosedTag { kind, offset });
    }
    filler.push(text[gap_start..].to_string());

    Ok(Trajectory {
        segments,
        raw: Some(text.to_string()),
        filler,
    })
}

/// Canonical form: `<kind>body</kind>` per segment, joined by `\n`.
pub fn render(traj: &Trajectory) -> Result<String, TrajectoryError> {
    let mut out = String::new();
    for (i, seg) in traj.segments.iter().enumerate() {
        if contains_tag(&seg.body) {
            return Err(TrajectoryError::InvalidSegment { kind: seg.kind });
        }
        if i > 0 {
            out.push('\n');
        }
        push_segment(&mut out, seg);
    }
    Ok(out)
}

/// The binary indicators consumed by the reward.
///
/// * `f` - the kind sequence matches `Think Answer (Search Result Think Answer)*`
/// * `s` - at least one search was issued
/// * `t` - exactly one think and one answer, nothing else
/// * `u` - a search was issued, every search is followed by result, think,
///   answer, and the trajectory ends on an answer
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StructureFlags {
    pub f: bool,
    pub s: bool,
    pub t: bool,
    pub u: bool,
}

pub fn validate_structure(traj: &Trajectory) -> StructureFlags {
    flags_for_kinds(&traj.kinds())
}

/// Flags depend on the kind sequence alone.
pub fn flags_for_kinds(kinds: &[SegmentKind]) -> StructureFlags {
    use SegmentKind::*;

    let count = |k: SegmentKind| kinds.iter().filter(|&&x| x == k).count();

    let f = kinds.len() >= 2
        && kinds[..2] == [Think, Answer]
        && (kinds.len() - 2).is_multiple_of(4)
        && kinds[2..]
            .chunks(4)
            .all(|round| round == [Search, Result, Think, Answer]);

    let s = count(Search) > 0;
    let t = kinds.len() == 2 && count(Think) == 1 && count(Answer) == 1;

    let u = s
        && kinds.last() == Some(&Answer)
        && kinds
            .iter()
            .enumerate()
            .filter(|(_, &k)| k == Search)
            .all(|(i, _)| kinds.get(i + 1..i + 4) == Some(&[Result, Think, Answer][..]));

    StructureFlags { f, s, t, u }
}

/// First and (when there are several) last answer, each passed through
/// [`extract_boxed`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedAnswers {
    pub first: String,
    pub last: Option<String>,
}

impl ExtractedAnswers {
    /// The answer a reader would take as final.
    pub fn final_answer(&self) -> &str {
        self.last.as_deref().unwrap_or(&self.first)
    }
}

pub fn extract_answers(traj: &Trajectory) -> Result<ExtractedAnswers, TrajectoryError> {
    let mut answers = traj
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Answer)
        .map(|s| s.body.as_str());
    let first = answers.next().ok_or(TrajectoryError::NoAnswer)?;
    let last = answers.next_back();
    Ok(ExtractedAnswers {
        first: extract_boxed(first).to_string(),
        last: last.map(|b| extract_boxed(b).to_string()),
    })
}

const BOXED_MARKER: &str = "\\boxed{";

/// Content of the first `\boxed{...}` in `body`, honouring nested braces.
/// Falls back to the whole body when there is no marker or its brace is
/// never closed.
pub fn extract_boxed(body: &str) -> &str {
    let Some(pos) = body.find(BOXED_MARKER) else {
        return body;
    };
    let start = pos + BOXED_MARKER.len();
    let mut depth = 1usize;
    for (i, c) in body[start..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return &body[start..start + i];
                }
            }
            _ => {}
        }
    }
    body
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SegmentKind::*;

    fn kinds_of(text: &str) -> Vec<SegmentKind> {
        parse(text).unwrap().kinds()
    }

    #[test]
    fn parses_minimal_direct_answer() {
        let t = parse("<think>a</think><answer>b</answer>").unwrap();
        assert_eq!(
            t,
            Trajectory::new(vec![Segment::think("a"), Segment::answer("b")])
        );
    }

    #[test]
    fn parses_full_template() {
        let text = "<think>x</think><answer>y</answer><search>q</search><result>r</result><think>x2</think><answer>y2</answer>";
        assert_eq!(
            kinds_of(text),
            vec![Think, Answer, Search, Result, Think, Answer]
        );
        let t = parse(text).unwrap();
        assert_eq!(t.segments()[5].body(), "y2");
    }

    #[test]
    fn unclosed_tag_reports_open_offset() {
        let err = parse("<answer>b</answer><think>a").unwrap_err();
        assert_eq!(
            err,
            TrajectoryError::UnclosedTag {
                kind: Think,
                offset: 18
            }
        );
    }

    #[test]
    fn mismatched_and_nested() {
        assert_eq!(
            parse("<think>a</answer>").unwrap_err(),
            TrajectoryError::MismatchedTag {
                expected: Some(Think),
                found: Answer,
                offset: 8
            }
        );
        assert_eq!(
            parse("x</think>").unwrap_err(),
            TrajectoryError::MismatchedTag {
                expected: None,
                found: Think,
                offset: 1
            }
        );
        assert_eq!(
            parse("<think>a<search>q</search></think>").unwrap_err(),
            TrajectoryError::NestedTag {
                outer: Think,
                inner: Search,
                offset: 8
            }
        );
    }

    #[test]
    fn non_tag_angle_brackets_are_text() {
        let t = parse("<think>1 < 2 and <b>bold</b></think><answer><Think></answer>").unwrap();
        assert_eq!(t.segments()[0].body(), "1 < 2 and <b>bold</b>");
        assert_eq!(t.segments()[1].body(), "<Think>");
    }

    #[test]
    fn filler_is_preserved_in_source_text() {
        let text = "  preamble\n<think> a </think>\n\n<answer>b</answer> tail";
        let t = parse(text).unwrap();
        assert_eq!(t.filler(), &["  preamble\n", "\n\n", " tail"]);
        assert_eq!(t.to_source_text().unwrap(), text);
        assert_eq!(t.raw(), Some(text));
        assert_eq!(
            render(&t).unwrap(),
            "<think> a </think>\n<answer>b</answer>"
        );
    }

    #[test]
    fn render_canonical_and_invalid() {
        let t = Trajectory::new(vec![Segment::think("a")]);
        assert_eq!(render(&t).unwrap(), "<think>a</think>");
        let bad = Trajectory::new(vec![Segment::answer("</think>")]);
        assert_eq!(
            render(&bad).unwrap_err(),
            TrajectoryError::InvalidSegment { kind: Answer }
        );
        assert!(Segment::new(Answer, "</think>").is_err());
        assert!(Segment::new(Answer, "plain").is_ok());
    }

    #[test]
    fn empty_text_parses_to_no_segments() {
        let t = parse("").unwrap();
        assert!(t.is_empty());
        assert_eq!(validate_structure(&t), StructureFlags::default());
    }

    #[test]
    fn structure_examples() {
        let flags = flags_for_kinds(&[Think, Answer]);
        assert_eq!(
            flags,
            StructureFlags {
                f: true,
                s: false,
                t: true,
                u: false
            }
        );

        let flags = flags_for_kinds(&[Think, Answer, Search, Result, Think, Answer]);
        assert_eq!(
            flags,
            StructureFlags {
                f: true,
                s: true,
                t: false,
                u: true
            }
        );

        let flags = flags_for_kinds(&[Think, Answer, Search, Think, Answer]);
        assert!(!flags.f);
        assert!(!flags.u);

        let flags = flags_for_kinds(&[
            Think, Answer, Search, Result, Think, Answer, Search, Result, Think, Answer,
        ]);
        assert!(flags.f && flags.u && flags.s && !flags.t);

        let flags = flags_for_kinds(&[Answer, Think]);
        assert!(!flags.f && flags.t);

        let flags = flags_for_kinds(&[Think, Answer, Think, Answer]);
        assert!(!flags.f && !flags.t && !flags.s);
    }

    #[test]
    fn answers_first_and_last() {
        let t = Trajectory::new(vec![Segment::think("t"), Segment::answer("Paris")]);
        let a = extract_answers(&t).unwrap();
        assert_eq!(a.first, "Paris");
        assert_eq!(a.last, None);

        let t = Trajectory::new(vec![
            Segment::think("t"),
            Segment::answer("A"),
            Segment::search("q"),
            Segment::result("r"),
            Segment::think("t2"),
            Segment::answer("B"),
        ]);
        let a = extract_answers(&t).unwrap();
        assert_eq!((a.first.as_str(), a.last.as_deref()), ("A", Some("B")));
        assert_eq!(a.final_answer(), "B");

        let t = Trajectory::new(vec![Segment::think("t")]);
        assert_eq!(extract_answers(&t).unwrap_err(), TrajectoryError::NoAnswer);
    }

    #[test]
    fn boxed_extraction() {
        assert_eq!(extract_boxed("The answer is \\boxed{2}."), "2");
        assert_eq!(extract_boxed("The inital answer is \\boxed{}"), "");
        assert_eq!(
            extract_boxed("\\boxed{\\frac{1}{2}} and \\boxed{3}"),
            "\\frac{1}{2}"
        );
        assert_eq!(extract_boxed("\\boxed{open"), "\\boxed{open");
        assert_eq!(extract_boxed("no marker"), "no marker");
    }

    fn arb_kind() -> impl Strategy<Value = SegmentKind> {
        prop::sample::select(SegmentKind::ALL.to_vec())
    }

    fn arb_body() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 <>/{}\\\\\n]{0,12}".prop_filter("no tags", |s| !contains_tag(s))
    }

    fn arb_trajectory() -> impl Strategy<Value = Trajectory> {
        prop::collection::vec((arb_kind(), arb_body()), 0..8).prop_map(|segs| {
            Trajectory::new(
                segs.into_iter()
                    .map(|(k, b)| Segment::new_unchecked(k, b))
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn parse_render_round_trip(t in arb_trajectory()) {
            let text = render(&t).unwrap();
            let back = parse(&text).unwrap();
            prop_assert_eq!(&back, &t);
            prop_assert_eq!(render(&back).unwrap(), text);
        }

        #[test]
        fn flags_ignore_bodies(t in arb_trajectory(), bodies in prop::collection::vec(arb_body(), 8)) {
            let mut mutated = t.clone();
            for (seg, b) in mutated.segments_mut().iter_mut().zip(bodies) {
                seg.set_body(b);
            }
            prop_assert_eq!(validate_structure(&t), validate_structure(&mutated));
        }

        #[test]
        fn flag_implications(kinds in prop::collection::vec(arb_kind(), 0..12)) {
            let fl = flags_for_kinds(&kinds);
            if fl.t { prop_assert!(!fl.s); }
            if fl.f && !fl.s { prop_assert!(fl.t); }
            if !fl.s { prop_assert!(!fl.u); }
        }

        #[test]
        fn first_answer_stable_under_appends(t in arb_trajectory(), extra in arb_trajectory()) {
            prop_assume!(t.kinds().contains(&SegmentKind::Answer));
            let before = extract_answers(&t).unwrap().first;
            let mut longer = t.clone();
            longer.segments_mut().extend(extra.segments().iter().cloned());
            prop_assert_eq!(extract_answers(&longer).unwrap().first, before);
        }
    }
}
