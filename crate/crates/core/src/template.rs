//! Minimal Jinja-style templater for kernel source.
//!
//! Supported syntax:
//!
//! * `{{ name }}` and `{{ name[i] }}` substitute a binding (or a list element).
//! * `{% for v in a..b %}` / `{% for v in list %}` ... `{% endfor %}` unrolls.
//! * `{% if flag %}` / `{% if not flag %}` ... `{% else %}` ... `{% endif %}`.
//!
//! There is no arithmetic, filters, macros or includes: the host computes
//! every value and binds it. A `-` just inside a delimiter trims whitespace:
//! `{%-` drops the spaces and tabs directly before the tag and `-%}` drops the
//! spaces, tabs and single newline directly after it, so a tag can sit on its
//! own indented line without leaving a blank line behind.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

/// A value bound in a [`RenderContext`].
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Text(String),
    Bool(bool),
    IntList(Vec<i64>),
    TextList(Vec<String>),
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<Vec<i64>> for Value {
    fn from(v: Vec<i64>) -> Self {
        Value::IntList(v)
    }
}

impl From<&[usize]> for Value {
    fn from(v: &[usize]) -> Self {
        Value::IntList(v.iter().map(|&x| x as i64).collect())
    }
}

impl From<Vec<usize>> for Value {
    fn from(v: Vec<usize>) -> Self {
        Value::from(v.as_slice())
    }
}

impl From<Vec<String>> for Value {
    fn from(v: Vec<String>) -> Self {
        Value::TextList(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("template line {line}: {kind}")]
pub struct TemplateError {
    pub line: usize,
    pub kind: TemplateErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateErrorKind {
    #[error("unterminated tag")]
    UnterminatedTag,
    #[error("block `{0}` is never closed")]
    UnclosedBlock(String),
    #[error("`{0}` without a matching open block")]
    UnexpectedClose(String),
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("malformed expression `{0}`")]
    Malformed(String),
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("`{0}` is not a boolean")]
    NotBoolean(String),
    #[error("`{0}` is not iterable")]
    NotIterable(String),
    #[error("`{0}` is not an integer")]
    NotInteger(String),
    #[error("`{0}` is not a list")]
    NotList(String),
    #[error("index {index} out of range for `{name}`")]
    IndexOutOfRange { name: String, index: i64 },
}

fn err(line: usize, kind: TemplateErrorKind) -> TemplateError {
    TemplateError { line, kind }
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Variable bindings used to specialize a template.
#[derive(Debug, Clone, Default)]
pub struct RenderContext {
    bindings: BTreeMap<String, Value>,
}

impl RenderContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: impl Into<Value>) -> Result<(), TemplateError> {
        if !is_identifier(name) {
            return Err(err(0, TemplateErrorKind::InvalidIdentifier(name.to_owned())));
        }
        self.bindings.insert(name.to_owned(), value.into());
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.bindings.get(name)
    }
}

/// Integer operand: a literal or a bound name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntArg {
    Literal(i64),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Iterable {
    /// `a..b`, `a` inclusive, `b` exclusive.
    Range(IntArg, IntArg),
    List(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Text(String),
    Var {
        name: String,
        index: Option<IntArg>,
        line: usize,
    },
    For {
        var: String,
        iter: Iterable,
        body: Vec<Node>,
        line: usize,
    },
    If {
        cond: String,
        negate: bool,
        then_branch: Vec<Node>,
        else_branch: Vec<Node>,
        line: usize,
    },
}

/// A parsed template. Parsing never looks at bindings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    nodes: Vec<Node>,
}

enum Token {
    Text(String),
    Var { body: String, line: usize },
    Tag { body: String, line: usize },
}

fn tokenize(source: &str) -> Result<Vec<Token>, TemplateError> {
    let mut tokens = Vec::new();
    let mut rest = source;
    let mut line = 1;
    let mut trim_next = false;
    loop {
        let next = match (rest.find("{{"), rest.find("{%")) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let Some(start) = next else {
            let text = if trim_next { trim_after(rest) } else { rest };
            if !text.is_empty() {
                tokens.push(Token::Text(text.to_owned()));
            }
            break;
        };
        let is_var = rest[start..].starts_with("{{");
        let close = if is_var { "}}" } else { "%}" };
        let mut text = &rest[..start];
        if trim_next {
            text = trim_after(text);
        }
        let inner_start = start + 2;
        let trim_before = rest[inner_start..].starts_with('-');
        if trim_before {
            text = text.trim_end_matches([' ', '\t']);
        }
        line += rest[..start].matches('\n').count();
        if !text.is_empty() {
            tokens.push(Token::Text(text.to_owned()));
        }
        let Some(end_rel) = rest[inner_start..].find(close) else {
            return Err(err(line, TemplateErrorKind::UnterminatedTag));
        };
        let mut body = &rest[inner_start..inner_start + end_rel];
        if trim_before {
            body = &body[1..];
        }
        trim_next = body.ends_with('-');
        if trim_next {
            body = &body[..body.len() - 1];
        }
        let body = body.trim().to_owned();
        tokens.push(if is_var {
            Token::Var { body, line }
        } else {
            Token::Tag { body, line }
        });
        line += rest[start..inner_start + end_rel].matches('\n').count();
        rest = &rest[inner_start + end_rel + 2..];
    }
    Ok(tokens)
}

fn trim_after(text: &str) -> &str {
    let text = text.trim_start_matches([' ', '\t']);
    text.strip_prefix("\r\n")
        .or_else(|| text.strip_prefix('\n'))
        .unwrap_or(text)
}

fn parse_ident(word: &str, line: usize) -> Result<String, TemplateError> {
    if is_identifier(word) {
        Ok(word.to_owned())
    } else {
        Err(err(line, TemplateErrorKind::InvalidIdentifier(word.to_owned())))
    }
}

fn parse_int_arg(word: &str, line: usize) -> Result<IntArg, TemplateError> {
    let word = word.trim();
    if let Ok(v) = word.parse::<i64>() {
        return Ok(IntArg::Literal(v));
    }
    if is_identifier(word) {
        return Ok(IntArg::Name(word.to_owned()));
    }
    Err(err(line, TemplateErrorKind::Malformed(word.to_owned())))
}

fn parse_var(body: &str, line: usize) -> Result<Node, TemplateError> {
    if let Some(open) = body.find('[') {
        let Some(inner) = body[open + 1..].strip_suffix(']') else {
            return Err(err(line, TemplateErrorKind::Malformed(body.to_owned())));
        };
        return Ok(Node::Var {
            name: parse_ident(body[..open].trim(), line)?,
            index: Some(parse_int_arg(inner, line)?),
            line,
        });
    }
    Ok(Node::Var {
        name: parse_ident(body, line)?,
        index: None,
        line,
    })
}

enum Close {
    EndFor,
    EndIf,
    Else,
    Eof,
}

struct Parser {
    tokens: core::iter::Peekable<alloc::vec::IntoIter<Token>>,
    last_line: usize,
}

impl Parser {
    fn parse_block(&mut self) -> Result<(Vec<Node>, Close, usize), TemplateError> {
        let mut nodes = Vec::new();
        while let Some(token) = self.tokens.next() {
            match token {
                Token::Text(text) => nodes.push(Node::Text(text)),
                Token::Var { body, line } => {
                    self.last_line = line;
                    nodes.push(parse_var(&body, line)?);
                }
                Token::Tag { body, line } => {
                    self.last_line = line;
                    let words: Vec<&str> = body.split_whitespace().collect();
                    match words.first().copied() {
                        Some("for") => nodes.push(self.parse_for(&body, line)?),
                        Some("if") => nodes.push(self.parse_if(&words, line)?),
                        Some("endfor") if words.len() == 1 => return Ok((nodes, Close::EndFor, line)),
                        Some("endif") if words.len() == 1 => return Ok((nodes, Close::EndIf, line)),
                        Some("else") if words.len() == 1 => return Ok((nodes, Close::Else, line)),
                        Some("endfor" | "endif" | "else") => {
                            return Err(err(line, TemplateErrorKind::Malformed(body)))
                        }
                        Some(other) => return Err(err(line, TemplateErrorKind::UnknownTag(other.to_owned()))),
                        None => return Err(err(line, TemplateErrorKind::Malformed(body))),
                    }
                }
            }
        }
        Ok((nodes, Close::Eof, self.last_line))
    }

    fn parse_for(&mut self, body: &str, line: usize) -> Result<Node, TemplateError> {
        let malformed = || err(line, TemplateErrorKind::Malformed(body.to_owned()));
        let rest = body["for".len()..].trim_start();
        let (var, rest) = rest.split_once(char::is_whitespace).ok_or_else(malformed)?;
        let rest = rest.trim_start().strip_prefix("in").ok_or_else(malformed)?;
        if !rest.starts_with(char::is_whitespace) {
            return Err(malformed());
        }
        let rest = rest.trim();
        let iter = match rest.split_once("..") {
            Some((a, b)) => Iterable::Range(parse_int_arg(a, line)?, parse_int_arg(b, line)?),
            None => Iterable::List(parse_ident(rest, line)?),
        };
        let var = parse_ident(var, line)?;
        let (body_nodes, close, _) = self.parse_block()?;
        match close {
            Close::EndFor => Ok(Node::For {
                var,
                iter,
                body: body_nodes,
                line,
            }),
            Close::Eof => Err(err(line, TemplateErrorKind::UnclosedBlock("for".into()))),
            Close::EndIf => Err(err(self.last_line, TemplateErrorKind::UnexpectedClose("endif".into()))),
            Close::Else => Err(err(self.last_line, TemplateErrorKind::UnexpectedClose("else".into()))),
        }
    }

    fn parse_if(&mut self, words: &[&str], line: usize) -> Result<Node, TemplateError> {
        let (negate, name) = match words {
            ["if", name] => (false, *name),
            ["if", "not", name] => (true, *name),
            _ => return Err(err(line, TemplateErrorKind::Malformed(words.join(" ")))),
        };
        let cond = parse_ident(name, line)?;
        let (then_branch, close, _) = self.parse_block()?;
        let else_branch = match close {
            Close::EndIf => Vec::new(),
            Close::Else => {
                let (nodes, close, _) = self.parse_block()?;
                match close {
                    Close::EndIf => nodes,
                    Close::Eof => return Err(err(line, TemplateErrorKind::UnclosedBlock("if".into()))),
                    Close::Else => {
                        return Err(err(self.last_line, TemplateErrorKind::UnexpectedClose("else".into())))
                    }
                    Close::EndFor => {
                        return Err(err(self.last_line, TemplateErrorKind::UnexpectedClose("endfor".into())))
                    }
                }
            }
            Close::Eof => return Err(err(line, TemplateErrorKind::UnclosedBlock("if".into()))),
            Close::EndFor => {
                return Err(err(self.last_line, TemplateErrorKind::UnexpectedClose("endfor".into())))
            }
        };
        Ok(Node::If {
            cond,
            negate,
            then_branch,
            else_branch,
            line,
        })
    }
}

struct Scope<'a> {
    ctx: &'a RenderContext,
    locals: Vec<(String, Value)>,
}

impl Scope<'_> {
    fn lookup(&self, name: &str, line: usize) -> Result<&Value, TemplateError> {
        self.locals
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .or_else(|| self.ctx.get(name))
            .ok_or_else(|| err(line, TemplateErrorKind::Unbound(name.to_owned())))
    }

    fn int(&self, arg: &IntArg, line: usize) -> Result<i64, TemplateError> {
        match arg {
            IntArg::Literal(v) => Ok(*v),
            IntArg::Name(name) => match self.lookup(name, line)? {
                Value::Int(v) => Ok(*v),
                _ => Err(err(line, TemplateErrorKind::NotInteger(name.clone()))),
            },
        }
    }
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Value::Text(t) => out.push_str(t),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::IntList(items) => {
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{v}");
            }
        }
        Value::TextList(items) => out.push_str(&items.join(", ")),
    }
}

fn render_nodes(nodes: &[Node], scope: &mut Scope<'_>, out: &mut String) -> Result<(), TemplateError> {
    for node in nodes {
        match node {
            Node::Text(text) => out.push_str(text),
            Node::Var { name, index: None, line } => {
                let value = scope.lookup(name, *line)?;
                write_value(out, value);
            }
            Node::Var {
                name,
                index: Some(index),
                line,
            } => {
                let i = scope.int(index, *line)?;
                let oob = || {
                    err(
                        *line,
                        TemplateErrorKind::IndexOutOfRange {
                            name: name.clone(),
                            index: i,
                        },
                    )
                };
                let slot = usize::try_from(i).map_err(|_| oob())?;
                match scope.lookup(name, *line)? {
                    Value::IntList(items) => {
                        let v = items.get(slot).ok_or_else(oob)?;
                        let _ = write!(out, "{v}");
                    }
                    Value::TextList(items) => out.push_str(items.get(slot).ok_or_else(oob)?),
                    _ => return Err(err(*line, TemplateErrorKind::NotList(name.clone()))),
                }
            }
            Node::For { var, iter, body, line } => {
                let items: Box<dyn Iterator<Item = Value>> = match iter {
                    Iterable::Range(a, b) => {
                        let (a, b) = (scope.int(a, *line)?, scope.int(b, *line)?);
                        Box::new((a..b).map(Value::Int))
                    }
                    Iterable::List(name) => match scope.lookup(name, *line)? {
                        Value::IntList(v) => Box::new(v.clone().into_iter().map(Value::Int)),
                        Value::TextList(v) => Box::new(v.clone().into_iter().map(Value::Text)),
                        _ => return Err(err(*line, TemplateErrorKind::NotIterable(name.clone()))),
                    },
                };
                for item in items {
                    scope.locals.push((var.clone(), item));
                    let result = render_nodes(body, scope, out);
                    scope.locals.pop();
                    result?;
                }
            }
            Node::If {
                cond,
                negate,
                then_branch,
                else_branch,
                line,
            } => {
                let flag = match scope.lookup(cond, *line)? {
                    Value::Bool(b) => *b,
                    _ => return Err(err(*line, TemplateErrorKind::NotBoolean(cond.clone()))),
                };
                let branch = if flag != *negate { then_branch } else { else_branch };
                render_nodes(branch, scope, out)?;
            }
        }
    }
    Ok(())
}

impl Template {
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: tokens.into_iter().peekable(),
            last_line: 1,
        };
        let (nodes, close, line) = parser.parse_block()?;
        match close {
            Close::Eof => Ok(Self {
                source: source.to_owned(),
                nodes,
            }),
            Close::EndFor => Err(err(line, TemplateErrorKind::UnexpectedClose("endfor".into()))),
            Close::EndIf => Err(err(line, TemplateErrorKind::UnexpectedClose("endif".into()))),
            Close::Else => Err(err(line, TemplateErrorKind::UnexpectedClose("else".into()))),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn render(&self, ctx: &RenderContext) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.source.len());
        let mut scope = Scope {
            ctx,
            locals: Vec::new(),
        };
        render_nodes(&self.nodes, &mut scope, &mut out)?;
        Ok(out)
    }
}

impl core::str::FromStr for Template {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::parse(s)
    }
}

impl core::fmt::Display for Template {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.source)
    }
}
