//! Reader and writer for the `.dag` graph language, a dagitty-compatible
//! subset:
//!
//! ```text
//! pdag {
//! bb="0,0,1,1"
//! A [exposure,pos="0.275,0.3"]
//! "|a=0" [pos="0.29, 0.3"]
//! U1 [latent,tier=0]
//! "|a=0" -> "Y1^0"
//! U1 -> A; U1 -> Y0; U1 -> "Y1^0"
//! U1 -- U2
//! }
//! ```
//!
//! Recognised node attributes are `exposure`, `outcome` (optionally
//! `outcome="0"` / `outcome="1"`), `covariate`, `latent`, `observed`, `synthetic`,
//! `tier=N` and `pos="x,y"`. Anything else is kept verbatim. Nodes named
//! `Y0` and `Y1` are the outcomes and nodes named `U`, `U1`, `U_x`, ... are
//! latent unless an attribute says otherwise. A quoted `"|a=0"` node marks
//! the file as an intervention graph; its out-edges belong to the exposure.
//! `#` starts a comment that runs to the end of the line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{
    is_identifier, CausalGraph, Edge, EdgeKind, GraphBuilder, Node, NodeId,
    Observability, Period, Role, SplitMarker, ValidationReport,
};

/// Byte range `[start, end)` into the parsed text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    fn new(start: usize, end: usize) -> Self {
        SourceSpan { start, end }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("parse error at bytes {}..{}: {message}", span.start, span.end)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid graph: {0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Comma,
    Semi,
    Arrow,
    BackArrow,
    Dash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "'{w}'"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::LBrace => f.write_str("'{'"),
            Tok::RBrace => f.write_str("'}'"),
            Tok::LBracket => f.write_str("'['"),
            Tok::RBracket => f.write_str("']'"),
            Tok::Eq => f.write_str("'='"),
            Tok::Comma => f.write_str("','"),
            Tok::Semi => f.write_str("';'"),
            Tok::Arrow => f.write_str("'->'"),
            Tok::BackArrow => f.write_str("'<-'"),
            Tok::Dash => f.write_str("'--'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'{' | b'}' | b'[' | b']' | b'=' | b',' | b';' => {
                let tok = match c {
                    b'{' => Tok::LBrace,
                    b'}' => Tok::RBrace,
                    b'[' => Tok::LBracket,
                    b']' => Tok::RBracket,
                    b'=' => Tok::Eq,
                    b',' => Tok::Comma,
                    _ => Tok::Semi,
                };
                i += 1;
                out.push((tok, SourceSpan::new(start, i)));
            }
            b'"' => {
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    i += 1;
                }
                if i >= bytes.len() {
                    return Err(ParseError {
                        span: SourceSpan::new(start, bytes.len()),
                        message: "unterminated string".into(),
                    });
                }
                let s = text[start + 1..i].to_string();
                i += 1;
                out.push((Tok::Str(s), SourceSpan::new(start, i)));
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 2;
                out.push((Tok::Arrow, SourceSpan::new(start, i)));
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                i += 2;
                out.push((Tok::Dash, SourceSpan::new(start, i)));
            }
            b'<' if bytes.get(i + 1) == Some(&b'-') => {
                i += 2;
                out.push((Tok::BackArrow, SourceSpan::new(start, i)));
            }
            _ if is_word_byte(c) || (c == b'-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) => {
                i += 1;
                while i < bytes.len() && is_word_byte(bytes[i]) {
                    i += 1;
                }
                out.push((Tok::Word(text[start..i].to_string()), SourceSpan::new(start, i)));
            }
            _ => {
                let ch_len = text[i..].chars().next().map_or(1, char::len_utf8);
                return Err(ParseError {
                    span: SourceSpan::new(start, start + ch_len),
                    message: format!("unexpected character {:?}", &text[i..i + ch_len]),
                });
            }
        }
    }
    out.push((Tok::Eof, SourceSpan::new(text.len(), text.len())));
    Ok(out)
}

fn is_word_byte(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'.'
}

/// A node reference as written in the source.
#[derive(Debug, Clone)]
enum NameRef {
    Node(NodeId),
    Split(i64),
}

#[derive(Default)]
struct Decl {
    attrs: Vec<(String, Option<String>)>,
    span: Option<SourceSpan>,
}

struct Parser<'a> {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError {
            span: self.span(),
            message: format!("expected {expected}, found {}", self.peek()),
        })
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<SourceSpan, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            self.error(expected)
        }
    }

    fn name(&mut self) -> Result<(NameRef, SourceSpan), ParseError> {
        let (tok, span) = (self.peek().clone(), self.span());
        let parsed = match &tok {
            Tok::Word(w) => NodeId::new(w.as_str()).ok().map(NameRef::Node),
            Tok::Str(s) => resolve_quoted(s),
            _ => return self.error("a node name"),
        };
        match parsed {
            Some(r) => {
                self.bump();
                Ok((r, span))
            }
            None => Err(ParseError {
                span,
                message: format!("invalid node name {}", &self.text[span.start..span.end]),
            }),
        }
    }

    fn value(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Word(w) | Tok::Str(w) => {
                self.bump();
                Ok(w)
            }
            _ => self.error("an attribute value"),
        }
    }

    fn attrs(&mut self) -> Result<Vec<(String, Option<String>)>, ParseError> {
        self.expect(Tok::LBracket, "'['")?;
        let mut out = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::RBracket => {
                    self.bump();
                    return Ok(out);
                }
                Tok::Comma => {
                    self.bump();
                }
                Tok::Word(key) => {
                    self.bump();
                    let value = if *self.peek() == Tok::Eq {
                        self.bump();
                        Some(self.value()?)
                    } else {
                        None
                    };
                    out.push((key, value));
                }
                _ => return self.error("an attribute name or ']'"),
            }
        }
    }
}

fn resolve_quoted(s: &str) -> Option<NameRef> {
    if let Some(rest) = s.strip_prefix('|') {
        let value = rest.split_once('=')?.1.trim();
        return value.parse().ok().map(NameRef::Split);
    }
    let base = match s.split_once('^') {
        Some((base, sup)) if !sup.is_empty() && sup.chars().all(|c| c.is_ascii_digit()) => base,
        Some(_) => return None,
        None => s,
    };
    NodeId::new(base.trim()).ok().map(NameRef::Node)
}

/// Split value, its attribute list, and where it was declared.
type RawSplit = (i64, Vec<(String, Option<String>)>, SourceSpan);

struct Raw {
    decls: BTreeMap<NodeId, Decl>,
    order: Vec<NodeId>,
    split: Option<RawSplit>,
    edges: Vec<(NameRef, NameRef, EdgeKind, SourceSpan)>,
    graph_attrs: Vec<(String, String)>,
}

impl Raw {
    fn mention(&mut self, r: &NameRef, span: SourceSpan) {
        match r {
            NameRef::Node(id) => {
                if !self.decls.contains_key(id) {
                    self.order.push(id.clone());
                    self.decls.insert(
                        id.clone(),
                        Decl {
                            attrs: Vec::new(),
                            span: Some(span),
                        },
                    );
                }
            }
            NameRef::Split(v) => {
                if self.split.is_none() {
                    self.split = Some((*v, Vec::new(), span));
                }
            }
        }
    }
}

/// Parses `.dag` text into a validated graph.
pub fn parse(text: &str) -> Result<CausalGraph, DslError> {
    let raw = parse_raw(text)?;
    lower(raw)
}

/// Like [`parse`] but accepts arbitrary bytes.
pub fn parse_bytes(bytes: &[u8]) -> Result<CausalGraph, DslError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let at = e.valid_up_to();
            Err(DslError::Parse(ParseError {
                span: SourceSpan::new(at, (at + 1).min(bytes.len())),
                message: "input is not valid UTF-8".into(),
            }))
        }
    }
}

fn parse_raw(text: &str) -> Result<Raw, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        text,
    };
    match p.peek() {
        Tok::Word(w) if w == "pdag" || w == "dag" => {
            p.bump();
        }
        _ => return p.error("'pdag' or 'dag'"),
    }
    p.expect(Tok::LBrace, "'{'")?;

    let mut raw = Raw {
        decls: BTreeMap::new(),
        order: Vec::new(),
        split: None,
        edges: Vec::new(),
        graph_attrs: Vec::new(),
    };

    loop {
        match p.peek().clone() {
            Tok::RBrace => {
                p.bump();
                break;
            }
            Tok::Semi => {
                p.bump();
                continue;
            }
            Tok::Word(w) if matches!(p.toks.get(p.pos + 1), Some((Tok::Eq, _))) => {
                p.bump();
                p.bump();
                let value = p.value()?;
                raw.graph_attrs.push((w, value));
                continue;
            }
            Tok::Word(_) | Tok::Str(_) => {}
            _ => return p.error("a statement or '}'"),
        }

        let (first, first_span) = p.name()?;
        raw.mention(&first, first_span);
        if *p.peek() == Tok::LBracket {
            let attrs = p.attrs()?;
            match &first {
                NameRef::Node(id) => {
                    let decl = raw.decls.get_mut(id).expect("mentioned above");
                    decl.attrs.extend(attrs);
                    decl.span = Some(first_span);
                }
                NameRef::Split(_) => {
                    if let Some(split) = raw.split.as_mut() {
                        split.1.extend(attrs);
                    }
                }
            }
        }

        let mut prev = first;
        let mut prev_span = first_span;
        loop {
            let op = match p.peek() {
                Tok::Arrow => EdgeKind::Directed,
                Tok::Dash => EdgeKind::Undirected,
                Tok::BackArrow => EdgeKind::Directed,
                _ => break,
            };
            let reversed = *p.peek() == Tok::BackArrow;
            p.bump();
            let (next, next_span) = p.name()?;
            raw.mention(&next, next_span);
            let span = SourceSpan::new(prev_span.start, next_span.end);
            if reversed {
                raw.edges.push((next.clone(), prev.clone(), op, span));
            } else {
                raw.edges.push((prev.clone(), next.clone(), op, span));
            }
            prev = next;
            prev_span = next_span;
        }
    }

    if *p.peek() != Tok::Eof {
        return p.error("end of input");
    }
    Ok(raw)
}

fn parse_position(value: &str, span: SourceSpan) -> Result<(f64, f64), ParseError> {
    let bad = || ParseError {
        span,
        message: format!("pos must be \"x,y\", got {value:?}"),
    };
    let (x, y) = value.split_once(',').ok_or_else(bad)?;
    let x: f64 = x.trim().parse().map_err(|_| bad())?;
    let y: f64 = y.trim().parse().map_err(|_| bad())?;
    if x.is_finite() && y.is_finite() {
        Ok((x, y))
    } else {
        Err(bad())
    }
}

fn latent_by_name(id: &NodeId) -> bool {
    let s = id.as_str();
    match s.strip_prefix('U') {
        Some(rest) => {
            rest.is_empty() || rest.starts_with('_') || rest.chars().all(|c| c.is_ascii_digit())
        }
        None => false,
    }
}

fn default_outcome(id: &NodeId) -> Option<Period> {
    match id.as_str() {
        "Y0" => Some(Period::Pre),
        "Y1" => Some(Period::Post),
        _ => None,
    }
}

fn lower(raw: Raw) -> Result<CausalGraph, DslError> {
    let mut b = GraphBuilder::new();
    for (k, v) in raw.graph_attrs {
        b.attr(k, v);
    }

    let mut treatment: Option<NodeId> = None;
    for id in &raw.order {
        let decl = &raw.decls[id];
        let span = decl.span.unwrap_or(SourceSpan::new(0, 0));
        let mut node = Node::new(id.clone());
        let mut observability: Option<Observability> = None;
        let mut role: Option<Role> = None;
        for (key, value) in &decl.attrs {
            match (key.as_str(), value.as_deref()) {
                ("exposure", None) => role = Some(Role::Treatment),
                ("covariate", None) => role = Some(Role::Covariate),
                ("outcome", None) => {
                    let p = default_outcome(id).ok_or_else(|| ParseError {
                        span,
                        message: format!(
                            "cannot infer the period of outcome {id}; write outcome=\"0\" or outcome=\"1\""
                        ),
                    })?;
                    role = Some(Role::Outcome(p));
                }
                ("outcome", Some(v)) => {
                    let p = match v.trim() {
                        "0" => Period::Pre,
                        "1" => Period::Post,
                        _ => {
                            return Err(ParseError {
                                span,
                                message: format!("outcome period must be 0 or 1, got {v:?}"),
                            }
                            .into())
                        }
                    };
                    role = Some(Role::Outcome(p));
                }
                ("latent", None) => observability = Some(Observability::Latent),
                ("observed", None) => observability = Some(Observability::Observed),
                ("synthetic", None) => node.synthetic = true,
                ("pos", Some(v)) => node.position = Some(parse_position(v, span)?),
                ("tier", Some(v)) => {
                    let t: i64 = v.trim().parse().map_err(|_| ParseError {
                        span,
                        message: format!("tier must be an integer, got {v:?}"),
                    })?;
                    b.tier(id.clone(), t);
                }
                _ => node.attrs.push((key.clone(), value.clone())),
            }
        }
        let role = role.unwrap_or_else(|| match default_outcome(id) {
            Some(p) => Role::Outcome(p),
            None => Role::Covariate,
        });
        node.role = role;
        node.observability = observability.unwrap_or(
            if role == Role::Covariate && latent_by_name(id) {
                Observability::Latent
            } else {
                Observability::Observed
            },
        );
        if role == Role::Treatment && treatment.is_none() {
            treatment = Some(id.clone());
        }
        b.node(node);
    }

    if let Some((value, attrs, span)) = &raw.split {
        let mut position = None;
        for (k, v) in attrs {
            if let ("pos", Some(v)) = (k.as_str(), v.as_deref()) {
                position = Some(parse_position(v, *span)?);
            }
        }
        b.split(Some(SplitMarker {
            value: *value,
            position,
        }));
    }

    for (tail, head, kind, span) in raw.edges {
        let tail = match tail {
            NameRef::Node(id) => id,
            NameRef::Split(_) => {
                if kind != EdgeKind::Directed {
                    return Err(ParseError {
                        span,
                        message: "the intervention node only takes outgoing directed edges".into(),
                    }
                    .into());
                }
                treatment.clone().ok_or_else(|| ParseError {
                    span,
                    message: "intervention node used without an exposure node".into(),
                })?
            }
        };
        let head = match head {
            NameRef::Node(id) => id,
            NameRef::Split(_) => {
                return Err(ParseError {
                    span,
                    message: "edges cannot point into the intervention node".into(),
                }
                .into())
            }
        };
        let edge = match kind {
            EdgeKind::Directed => Edge::directed(tail, head),
            EdgeKind::Undirected => Edge::undirected(tail, head),
        };
        b.edge(edge);
    }

    b.build().map_err(DslError::Invalid)
}

fn quote_if_needed(name: &str) -> String {
    if is_identifier(name) {
        name.to_string()
    } else {
        format!("\"{name}\"")
    }
}

/// Canonical text for `g`: nodes sorted by name, then edges sorted by
/// (tail, head, kind). [`parse`] reads it back to an equal graph.
pub fn serialize(g: &CausalGraph) -> String {
    let mut out = String::from("pdag {\n");

    for (k, v) in g.attrs() {
        let _ = writeln!(out, "{k}=\"{v}\"");
    }

    // Names drawn as potential outcomes when the file is an intervention graph.
    let split = g.split();
    let relabeled: BTreeSet<NodeId> = match (split, g.treatment()) {
        (Some(_), Some(a)) => {
            let mut d = crate::graph::descendants(g, a.as_str()).unwrap_or_default();
            d.remove(a);
            d
        }
        _ => BTreeSet::new(),
    };
    let display = |id: &NodeId| -> String {
        match split {
            Some(m) if relabeled.contains(id) => format!("\"{}^{}\"", id, m.value),
            _ => quote_if_needed(id.as_str()),
        }
    };

    for node in g.nodes() {
        let mut attrs: Vec<String> = Vec::new();
        match node.role {
            Role::Treatment => attrs.push("exposure".into()),
            Role::Outcome(p) => {
                if default_outcome(&node.id) != Some(p) {
                    attrs.push(format!("outcome=\"{p}\""));
                }
            }
            Role::Covariate => {
                if default_outcome(&node.id).is_some() {
                    attrs.push("covariate".into());
                }
            }
        }
        let by_name = node.role == Role::Covariate && latent_by_name(&node.id);
        match (node.observability, by_name) {
            (Observability::Latent, false) => attrs.push("latent".into()),
            (Observability::Observed, true) => attrs.push("observed".into()),
            _ => {}
        }
        if node.synthetic {
            attrs.push("synthetic".into());
        }
        if let Some(t) = g.tier(node.id.as_str()) {
            attrs.push(format!("tier={t}"));
        }
        if let Some((x, y)) = node.position {
            attrs.push(format!("pos=\"{x},{y}\""));
        }
        for (k, v) in &node.attrs {
            match v {
                Some(v) => attrs.push(format!("{k}=\"{v}\"")),
                None => attrs.push(k.clone()),
            }
        }
        let name = display(&node.id);
        if attrs.is_empty() {
            let _ = writeln!(out, "{name}");
        } else {
            let _ = writeln!(out, "{name} [{}]", attrs.join(","));
        }
    }

    let split_name = split.map(|m| format!("\"|a={}\"", m.value));
    if let (Some(name), Some(m)) = (&split_name, split) {
        match m.position {
            Some((x, y)) => {
                let _ = writeln!(out, "{name} [pos=\"{x},{y}\"]");
            }
            None => {
                let _ = writeln!(out, "{name}");
            }
        }
    }

    let treatment = g.treatment();
    for e in g.edges() {
        let tail = match (&split_name, treatment) {
            (Some(name), Some(a)) if &e.tail == a && e.is_directed() => name.clone(),
            _ => display(&e.tail),
        };
        let op = match e.kind {
            EdgeKind::Directed => "->",
            EdgeKind::Undirected => "--",
        };
        let _ = writeln!(out, "{tail} {op} {}", display(&e.head));
    }
    out.push_str("}\n");
    out
}
