//! Tolerant reader for the teacher's "python list of dictionaries" replies.
//!
//! Teacher output is untrusted text, so this is a small recursive-descent
//! parser over a Python-literal subset: lists, dicts, single/double/triple
//! quoted strings with escapes, adjacent-string concatenation, numbers,
//! `True`/`False`/`None`, trailing commas and `#` comments. The first `[`
//! that opens a well-formed list containing at least one dict wins;
//! surrounding prose and code fences are ignored.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::CurateError;

/// A prompt/answer pair as read from the reply, before provenance is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPair {
    pub prompt: String,
    pub answer: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedPairs {
    pub pairs: Vec<RawPair>,
    /// Entries that were not dicts or lacked a usable prompt/answer.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Str(String),
    Scalar(String),
    List(Vec<Value>),
    Dict(Vec<(Value, Value)>),
}

impl Value {
    fn text(&self) -> Option<&str> {
        match self {
            Value::Str(s) | Value::Scalar(s) => Some(s),
            _ => None,
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    depth: usize,
}

const MAX_DEPTH: usize = 64;

impl<'a> Parser<'a> {
    fn new(src: &'a str, pos: usize) -> Self {
        Self { src, pos, depth: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn value(&mut self) -> Option<Value> {
        self.skip_ws();
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return None;
        }
        let v = match self.peek()? {
            '[' => self.list(),
            '{' => self.dict(),
            '"' | '\'' => self.strings(),
            c if c == '-' || c == '+' || c.is_ascii_digit() => self.scalar(),
            c if c.is_alphabetic() || c == '_' => self.scalar(),
            _ => None,
        };
        self.depth -= 1;
        v
    }

    fn list(&mut self) -> Option<Value> {
        self.bump();
        let mut items = Vec::new();
        loop {
            if self.eat(']') {
                return Some(Value::List(items));
            }
            items.push(self.value()?);
            if !self.eat(',') {
                return if self.eat(']') {
                    Some(Value::List(items))
                } else {
                    None
                };
            }
        }
    }

    fn dict(&mut self) -> Option<Value> {
        self.bump();
        let mut entries = Vec::new();
        loop {
            if self.eat('}') {
                return Some(Value::Dict(entries));
            }
            let k = self.value()?;
            if !self.eat(':') {
                return None;
            }
            let v = self.value()?;
            entries.push((k, v));
            if !self.eat(',') {
                return if self.eat('}') {
                    Some(Value::Dict(entries))
                } else {
                    None
                };
            }
        }
    }

    fn scalar(&mut self) -> Option<Value> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '_' | '.' | '-' | '+') {
                self.bump();
            } else {
                break;
            }
        }
        let s = &self.src[start..self.pos];
        if s.is_empty() {
            None
        } else {
            Some(Value::Scalar(s.to_string()))
        }
    }

    /// One or more adjacent string literals, concatenated.
    fn strings(&mut self) -> Option<Value> {
        let mut out = self.string()?;
        loop {
            let save = self.pos;
            self.skip_ws();
            match self.peek() {
                Some('"') | Some('\'') => out.push_str(&self.string()?),
                _ => {
                    self.pos = save;
                    return Some(Value::Str(out));
                }
            }
        }
    }

    fn string(&mut self) -> Option<String> {
        let quote = self.bump()?;
        let closer: String = [quote, quote].iter().collect();
        let triple = self.rest().starts_with(closer.as_str());
        if triple {
            self.pos += closer.len();
        }
        let mut out = String::new();
        loop {
            let c = self.bump()?;
            match c {
                '\\' => self.escape(&mut out)?,
                c if c == quote => {
                    if !triple {
                        return Some(out);
                    }
                    if self.rest().starts_with(closer.as_str()) {
                        self.pos += closer.len();
                        return Some(out);
                    }
                    out.push(c);
                }
                '\n' if !triple => return None,
                c => out.push(c),
            }
        }
    }

    fn escape(&mut self, out: &mut String) -> Option<()> {
        let c = self.bump()?;
        match c {
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            '0' => out.push('\0'),
            '\\' | '\'' | '"' | '/' => out.push(c),
            '\n' => {}
            'x' => out.push(self.hex(2)?),
            'u' => {
                let hi = self.hex_u32(4)?;
                if (0xD800..0xDC00).contains(&hi) && self.rest().starts_with("\\u") {
                    self.pos += 2;
                    let lo = self.hex_u32(4)?;
                    let cp = 0x10000 + ((hi - 0xD800) << 10) + (lo.wrapping_sub(0xDC00) & 0x3FF);
                    out.push(char::from_u32(cp).unwrap_or('\u{FFFD}'));
                } else {
                    out.push(char::from_u32(hi).unwrap_or('\u{FFFD}'));
                }
            }
            other => {
                out.push('\\');
                out.push(other);
            }
        }
        Some(())
    }

    fn hex_u32(&mut self, n: usize) -> Option<u32> {
        let digits = self.rest().get(..n)?;
        let v = u32::from_str_radix(digits, 16).ok()?;
        self.pos += n;
        Some(v)
    }

    fn hex(&mut self, n: usize) -> Option<char> {
        char::from_u32(self.hex_u32(n)?)
    }
}

fn field<'v>(entries: &'v [(Value, Value)], aliases: &[&str]) -> Option<&'v str> {
    aliases.iter().find_map(|alias| {
        entries.iter().find_map(|(k, v)| {
            let key = k.text()?.trim();
            if key.eq_ignore_ascii_case(alias) {
                v.text()
            } else {
                None
            }
        })
    })
}

const PROMPT_KEYS: [&str; 2] = ["prompt", "question"];
const ANSWER_KEYS: [&str; 2] = ["answer", "response"];

fn collect(items: Vec<Value>) -> ParsedPairs {
    let mut out = ParsedPairs::default();
    for item in items {
        let Value::Dict(entries) = item else {
            out.skipped += 1;
            continue;
        };
        let prompt = field(&entries, &PROMPT_KEYS).map(str::trim);
        let answer = field(&entries, &ANSWER_KEYS).map(str::trim);
        match (prompt, answer) {
            (Some(p), Some(a)) if !p.is_empty() && !a.is_empty() => out.pairs.push(RawPair {
                prompt: p.to_string(),
                answer: a.to_string(),
            }),
            _ => out.skipped += 1,
        }
    }
    out
}

/// Extracts prompt/answer pairs from a teacher reply.
pub fn parse_pairs(teacher_text: &str) -> Result<ParsedPairs, CurateError> {
    for (start, _) in teacher_text.match_indices('[') {
        let mut p = Parser::new(teacher_text, start);
        if let Some(Value::List(items)) = p.value() {
            if items.iter().any(|v| matches!(v, Value::Dict(_))) {
                return Ok(collect(items));
            }
        }
    }
    Err(CurateError::NoPairList {
        raw: teacher_text.to_string(),
    })
}
