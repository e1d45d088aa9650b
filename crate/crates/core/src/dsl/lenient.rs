//! Relaxed object notation.
//!
//! A superset of JSON that also accepts unquoted keys, single-quoted strings,
//! trailing commas and bare-word values (`{groupby_col: [City], function: mean}`).
//! Bare words that read as numbers, `true`, `false` or `null` become those
//! values; anything else becomes a string. Model outputs rarely come back as
//! strict JSON, so every structured answer goes through this reader.

use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl std::fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for SyntaxError {}

/// Parses a complete document; only whitespace may follow the value.
pub fn parse(text: &str) -> Result<Value, SyntaxError> {
    let mut p = Parser::new(text, 0);
    p.skip_ws();
    let v = p.value(Context::Top)?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing characters"));
    }
    Ok(v)
}

/// Parses the first `{...}` object embedded in free text (code fences, prose before or after).
pub fn extract_object(text: &str) -> Result<Value, SyntaxError> {
    let Some(start) = text.find('{') else {
        return Err(SyntaxError {
            line: 1,
            column: 1,
            message: "no object found".into(),
        });
    };
    let mut p = Parser::new(text, start);
    p.value(Context::Top)
}

#[derive(Clone, Copy, PartialEq)]
enum Context {
    Top,
    Array,
    Object,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, pos: usize) -> Self {
        Self { src, pos }
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        let before = &self.src[..self.pos.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
        SyntaxError {
            line,
            column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, want: char) -> Result<(), SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(self.error(format!("expected `{want}`, found `{c}`"))),
            None => Err(self.error(format!("expected `{want}`, found end of input"))),
        }
    }

    fn value(&mut self, ctx: Context) -> Result<Value, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some('{') => self.object(),
            Some('[') => self.array(),
            Some(q @ ('"' | '\'')) => self.string(q).map(Value::String),
            Some(_) => self.bare_value(ctx),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn object(&mut self) -> Result<Value, SyntaxError> {
        self.expect('{')?;
        let mut map = Map::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('}') => {
                    self.bump();
                    return Ok(Value::Object(map));
                }
                None => return Err(self.error("unterminated object")),
                _ => {}
            }
            let key_pos = self.pos;
            let key = match self.peek() {
                Some(q @ ('"' | '\'')) => self.string(q)?,
                _ => self.bare_key()?,
            };
            self.expect(':')?;
            let value = self.value(Context::Object)?;
            if map.insert(key.clone(), value).is_some() {
                self.pos = key_pos;
                return Err(self.error(format!("duplicate key `{key}`")));
            }
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.bump();
                }
                Some('}') => {}
                Some(c) => return Err(self.error(format!("expected `,` or `}}`, found `{c}`"))),
                None => return Err(self.error("unterminated object")),
            }
        }
    }

    fn array(&mut self) -> Result<Value, SyntaxError> {
        self.expect('[')?;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(']') => {
                    self.bump();
                    return Ok(Value::Array(items));
                }
                None => return Err(self.error("unterminated array")),
                _ => {}
            }
            items.push(self.value(Context::Array)?);
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.bump();
                }
                Some(']') => {}
                Some(c) => return Err(self.error(format!("expected `,` or `]`, found `{c}`"))),
                None => return Err(self.error("unterminated array")),
            }
        }
    }

    fn string(&mut self, quote: char) -> Result<String, SyntaxError> {
        self.bump();
        let mut out = String::new();
        loop {
            let c = self.bump().ok_or_else(|| self.error("unterminated string"))?;
            match c {
                c if c == quote => return Ok(out),
                '\\' => {
                    let esc = self.bump().ok_or_else(|| self.error("unterminated escape"))?;
                    match esc {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        'b' => out.push('\u{8}'),
                        'f' => out.push('\u{c}'),
                        '/' => out.push('/'),
                        '\\' => out.push('\\'),
                        '"' => out.push('"'),
                        '\'' => out.push('\''),
                        'u' => out.push(self.unicode_escape()?),
                        other => return Err(self.error(format!("invalid escape `\\{other}`"))),
                    }
                }
                c => out.push(c),
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, SyntaxError> {
        let end = self.pos + 4;
        let digits = self
            .src
            .get(self.pos..end)
            .ok_or_else(|| self.error("short unicode escape"))?;
        let v = u32::from_str_radix(digits, 16).map_err(|_| self.error("invalid unicode escape"))?;
        self.pos = end;
        Ok(v)
    }

    fn unicode_escape(&mut self) -> Result<char, SyntaxError> {
        let hi = self.hex4()?;
        if (0xD800..0xDC00).contains(&hi) {
            if self.src[self.pos..].starts_with("\\u") {
                self.pos += 2;
                let lo = self.hex4()?;
                let c = 0x10000 + ((hi - 0xD800) << 10) + (lo.wrapping_sub(0xDC00) & 0x3FF);
                return char::from_u32(c).ok_or_else(|| self.error("invalid surrogate pair"));
            }
            return Err(self.error("lone surrogate"));
        }
        char::from_u32(hi).ok_or_else(|| self.error("invalid unicode escape"))
    }

    fn bare_key(&mut self) -> Result<String, SyntaxError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if matches!(c, ':' | ',' | '{' | '}' | '[' | ']' | '\n') {
                break;
            }
            self.bump();
        }
        let key = self.src[start..self.pos].trim();
        if key.is_empty() {
            return Err(self.error("expected a key"));
        }
        Ok(key.to_string())
    }

    fn bare_value(&mut self, ctx: Context) -> Result<Value, SyntaxError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            let stop = match ctx {
                Context::Top => matches!(c, ',' | '{' | '}' | '[' | ']' | '\n'),
                Context::Array => matches!(c, ',' | ']' | '{' | '[' | '\n'),
                Context::Object => matches!(c, ',' | '}' | '{' | '[' | '\n'),
            };
            if stop {
                break;
            }
            self.bump();
        }
        let word = self.src[start..self.pos].trim();
        if word.is_empty() {
            return Err(self.error("expected a value"));
        }
        Ok(classify_bare(word))
    }
}

fn classify_bare(word: &str) -> Value {
    match word {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        "null" => return Value::Null,
        _ => {}
    }
    if let Ok(i) = word.parse::<i64>() {
        return Value::Number(Number::from(i));
    }
    if let Ok(x) = word.parse::<f64>() {
        if let Some(n) = Number::from_f64(x) {
            return Value::Number(n);
        }
    }
    Value::String(word.to_string())
}
