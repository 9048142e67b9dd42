//! Java lexing: a grammar-aware scanner (the `jp` tokenizer), a raw
//! whitespace tokenizer (the `utf8` tokenizer) and the brace-depth heuristic
//! that decides which lines are business logic.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lines;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TokenKind {
    Keyword,
    Identifier,
    LiteralNumber,
    LiteralString,
    LiteralChar,
    LiteralBoolNull,
    Operator,
    Separator,
    Comment,
    Annotation,
    Whitespace,
}

impl TokenKind {
    /// Whitespace and comments carry no code.
    pub fn is_trivia(self) -> bool {
        matches!(self, TokenKind::Whitespace | TokenKind::Comment)
    }

    pub fn is_literal(self) -> bool {
        matches!(
            self,
            TokenKind::LiteralNumber
                | TokenKind::LiteralString
                | TokenKind::LiteralChar
                | TokenKind::LiteralBoolNull
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// 1-based line of the first byte.
    pub line_no: usize,
    /// 0-based byte column of the first byte.
    pub col: usize,
    pub offset: usize,
    pub len: usize,
}

/// Tokens of one source text, sorted by offset and non-overlapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
    pub source: String,
}

impl TokenSequence {
    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    /// Tokens that are neither whitespace nor comments.
    pub fn significant(&self) -> impl Iterator<Item = (usize, &Token)> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.kind.is_trivia())
    }

    /// Significant tokens grouped by starting line; `result[i]` holds line `i + 1`.
    pub fn significant_by_line(&self, line_count: usize) -> Vec<Vec<&Token>> {
        let mut out: Vec<Vec<&Token>> = (0..line_count).map(|_| Vec::new()).collect();
        for (_, t) in self.significant() {
            if t.line_no >= 1 && t.line_no <= line_count {
                out[t.line_no - 1].push(t);
            }
        }
        out
    }
}

/// Java SE reserved words. `true`, `false` and `null` are literals.
pub const KEYWORDS: &[&str] = &[
    "_", "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class",
    "const", "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally",
    "float", "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long",
    "native", "new", "package", "private", "protected", "public", "return", "short", "static",
    "strictfp", "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try",
    "void", "volatile", "while",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

// Longest first so the scanner can take the first prefix match.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "->", "==", ">=", "<=", "!=", "&&", "||", "++", "--", "+=",
    "-=", "*=", "/=", "&=", "|=", "^=", "%=", "<<", ">>", "=", ">", "<", "!", "~", "?", ":", "+",
    "-", "*", "/", "&", "|", "^", "%",
];

const SEPARATORS: &[&str] = &["...", "::", "(", ")", "{", "}", "[", "]", ";", ",", ".", "@"];

/// Full grammar-aware scan. Unterminated strings, chars, text blocks and
/// block comments are errors carrying the line where they start.
pub fn lex_grammar(content: &str) -> Result<TokenSequence> {
    Scanner::new(content, false).run()
}

/// Same scan, but an unterminated literal or comment swallows the rest of its
/// line (strings, chars) or of the input (block comments, text blocks).
/// Used where lines are tokenized out of context.
pub fn lex_grammar_lenient(content: &str) -> TokenSequence {
    Scanner::new(content, true)
        .run()
        .expect("lenient scan never fails")
}

/// Whitespace split of every line; each maximal non-whitespace run becomes
/// one `Identifier` token.
pub fn lex_raw(content: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    for (i, (line_off, line_len)) in lines::line_index(content).into_iter().enumerate() {
        let line = &content[line_off..line_off + line_len];
        let mut start: Option<usize> = None;
        for (pos, ch) in line.char_indices().chain(core::iter::once((line.len(), ' '))) {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(pos),
                (true, Some(s)) => {
                    tokens.push(Token {
                        text: line[s..pos].to_string(),
                        kind: TokenKind::Identifier,
                        line_no: i + 1,
                        col: s,
                        offset: line_off + s,
                        len: pos - s,
                    });
                    start = None;
                }
                _ => {}
            }
        }
    }
    TokenSequence {
        tokens,
        source: String::new(),
    }
}

/// Number of code tokens (no whitespace, no comments) starting on `line_no`.
pub fn line_token_count(seq: &TokenSequence, line_no: usize) -> usize {
    seq.significant().filter(|(_, t)| t.line_no == line_no).count()
}

struct Scanner<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    line_start: usize,
    lenient: bool,
    tokens: Vec<Token>,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str, lenient: bool) -> Self {
        Scanner {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            line_start: 0,
            lenient,
            tokens: Vec::new(),
        }
    }

    fn run(mut self) -> Result<TokenSequence> {
        while self.pos < self.bytes.len() {
            let start = self.pos;
            let kind = self.scan_one()?;
            self.push(start, kind);
        }
        Ok(refine(TokenSequence {
            tokens: self.tokens,
            source: String::new(),
        }))
    }

    fn push(&mut self, start: usize, kind: TokenKind) {
        let text = &self.src[start..self.pos];
        self.tokens.push(Token {
            text: text.to_string(),
            kind,
            line_no: self.line,
            col: start - self.line_start,
            offset: start,
            len: self.pos - start,
        });
        // Advance line bookkeeping past any terminators inside the token.
        let breaks = lines::count_terminators(text);
        if breaks > 0 {
            self.line += breaks;
            let last = text.rfind(['\n', '\r']).unwrap_or(0);
            self.line_start = start + last + 1;
        }
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn current_char(&self) -> char {
        self.src[self.pos..].chars().next().unwrap_or('\0')
    }

    fn scan_one(&mut self) -> Result<TokenKind> {
        let c = self.current_char();
        if c.is_whitespace() {
            while self.pos < self.bytes.len() && self.current_char().is_whitespace() {
                self.pos += self.current_char().len_utf8();
            }
            return Ok(TokenKind::Whitespace);
        }
        let rest = &self.src[self.pos..];
        if rest.starts_with("//") {
            self.pos += rest.find(['\n', '\r']).unwrap_or(rest.len());
            return Ok(TokenKind::Comment);
        }
        if let Some(body) = rest.strip_prefix("/*") {
            match body.find("*/") {
                Some(end) => self.pos += end + 4,
                None if self.lenient => self.pos = self.bytes.len(),
                None => {
                    return Err(Error::Unterminated {
                        what: "comment",
                        line: self.line,
                    })
                }
            }
            return Ok(TokenKind::Comment);
        }
        if rest.starts_with("\"\"\"") {
            return self.text_block();
        }
        if c == '"' {
            return self.quoted(b'"', "string", TokenKind::LiteralString);
        }
        if c == '\'' {
            return self.quoted(b'\'', "char literal", TokenKind::LiteralChar);
        }
        if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|b| b.is_ascii_digit())) {
            self.number();
            return Ok(TokenKind::LiteralNumber);
        }
        if c == '@' {
            let after = &rest[1..];
            if after.starts_with(is_ident_start) || after.starts_with("\\u") {
                self.pos += 1;
                self.qualified_name();
                return Ok(TokenKind::Annotation);
            }
        }
        if is_ident_start(c) || rest.starts_with("\\u") {
            self.identifier();
            return Ok(TokenKind::Identifier);
        }
        if let Some(sep) = SEPARATORS.iter().find(|s| rest.starts_with(**s)) {
            self.pos += sep.len();
            return Ok(TokenKind::Separator);
        }
        if let Some(op) = OPERATORS.iter().find(|o| rest.starts_with(**o)) {
            self.pos += op.len();
            return Ok(TokenKind::Operator);
        }
        // Stray character (`#`, a lone backslash, ...): keep it as a one-char operator.
        self.pos += c.len_utf8();
        Ok(TokenKind::Operator)
    }

    fn quoted(&mut self, quote: u8, what: &'static str, kind: TokenKind) -> Result<TokenKind> {
        let mut i = self.pos + 1;
        loop {
            match self.bytes.get(i) {
                Some(b'\\') if !matches!(self.bytes.get(i + 1), Some(b'\n' | b'\r') | None) => {
                    i += 2
                }
                Some(&b) if b == quote => {
                    self.pos = i + 1;
                    return Ok(kind);
                }
                Some(b'\n') | Some(b'\r') | None => {
                    if self.lenient {
                        self.pos = i.min(self.bytes.len());
                        return Ok(kind);
                    }
                    return Err(Error::Unterminated {
                        what,
                        line: self.line,
                    });
                }
                Some(_) => i += 1,
            }
        }
    }

    fn text_block(&mut self) -> Result<TokenKind> {
        let mut i = self.pos + 3;
        while i < self.bytes.len() {
            if self.bytes[i] == b'\\' {
                i += 2;
                continue;
            }
            if self.src[i..].starts_with("\"\"\"") {
                self.pos = i + 3;
                return Ok(TokenKind::LiteralString);
            }
            i += 1;
        }
        if self.lenient {
            self.pos = self.bytes.len();
            return Ok(TokenKind::LiteralString);
        }
        Err(Error::Unterminated {
            what: "text block",
            line: self.line,
        })
    }

    fn number(&mut self) {
        let hex = matches!(self.peek(1), Some(b'x') | Some(b'X')) && self.peek(0) == Some(b'0');
        let mut seen_dot = false;
        while let Some(b) = self.peek(0) {
            let prev = self.bytes[self.pos.saturating_sub(1)];
            let exp_sign = (b == b'+' || b == b'-')
                && if hex {
                    matches!(prev, b'p' | b'P')
                } else {
                    matches!(prev, b'e' | b'E')
                };
            if b.is_ascii_alphanumeric() || b == b'_' || exp_sign {
                self.pos += 1;
            } else if b == b'.' && !seen_dot && self.peek(1) != Some(b'.') {
                // `1.toString` is not Java; `1.` and `1.5` are.
                if self.peek(1).is_some_and(|n| n.is_ascii_alphabetic())
                    && !matches!(self.peek(1), Some(b'e' | b'E' | b'f' | b'F' | b'd' | b'D'))
                {
                    break;
                }
                seen_dot = true;
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn identifier(&mut self) {
        while self.pos < self.bytes.len() {
            let rest = &self.src[self.pos..];
            if rest.starts_with("\\u") {
                // Unicode escape kept verbatim: `\` `u`+ and four hex digits.
                let mut j = 1;
                while rest.as_bytes().get(j) == Some(&b'u') {
                    j += 1;
                }
                let hex = rest.as_bytes()[j..]
                    .iter()
                    .take(4)
                    .take_while(|b| b.is_ascii_hexdigit())
                    .count();
                self.pos += j + hex;
                continue;
            }
            let c = self.current_char();
            if is_ident_part(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn qualified_name(&mut self) {
        self.identifier();
        while self.peek(0) == Some(b'.')
            && self.src[self.pos + 1..].starts_with(|c: char| is_ident_start(c))
        {
            self.pos += 1;
            self.identifier();
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Reclassifies identifier-shaped words after scanning.
fn refine(mut seq: TokenSequence) -> TokenSequence {
    for t in &mut seq.tokens {
        if t.kind == TokenKind::Identifier {
            if matches!(t.text.as_str(), "true" | "false" | "null") {
                t.kind = TokenKind::LiteralBoolNull;
            } else if is_keyword(&t.text) {
                t.kind = TokenKind::Keyword;
            }
        }
    }
    seq
}

/// Business-logic classification of every line of a file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineClasses {
    business: Vec<bool>,
    /// Set when braces did not balance; the classification is best effort.
    pub unbalanced: bool,
}

impl LineClasses {
    pub fn is_business(&self, line_no: usize) -> bool {
        line_no >= 1 && self.business.get(line_no - 1).copied().unwrap_or(false)
    }

    pub fn line_count(&self) -> usize {
        self.business.len()
    }

    pub fn business_lines(&self) -> impl Iterator<Item = usize> + '_ {
        self.business
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| i + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frame {
    /// Class, interface, enum or record body.
    Type,
    /// Method, constructor, initializer, lambda or statement block.
    Code,
    /// Array initializer or any other brace group that is not code.
    Data,
}

/// A line is business logic iff it starts inside a code block (not at type
/// level), holds at least one code token, is not only separators and braces,
/// and does not start with `import`, `package` or an annotation.
pub fn classify_lines(seq: &TokenSequence, content: &str) -> LineClasses {
    let line_count = lines::line_index(content).len();
    let mut business = alloc::vec![false; line_count];
    let sig: Vec<&Token> = seq.significant().map(|(_, t)| t).collect();

    let mut stack: Vec<Frame> = Vec::new();
    let mut unbalanced = false;
    // Significant-token indices since the last `;`, `{` or `}` at paren depth 0.
    let mut header: Vec<usize> = Vec::new();
    let mut paren_depth = 0usize;
    let mut current_line = 0usize;

    for (i, tok) in sig.iter().enumerate() {
        if tok.line_no != current_line {
            current_line = tok.line_no;
            if current_line >= 1 && current_line <= line_count {
                business[current_line - 1] = line_is_business(&sig, i, &stack);
            }
        }
        match (tok.kind, tok.text.as_str()) {
            (TokenKind::Separator, "(" | "[") => {
                paren_depth += 1;
                header.push(i);
            }
            (TokenKind::Separator, ")" | "]") => {
                paren_depth = paren_depth.saturating_sub(1);
                header.push(i);
            }
            (TokenKind::Separator, ";") if paren_depth == 0 => header.clear(),
            (TokenKind::Separator, "{") => {
                let frame = open_frame(&sig, &header, stack.last().copied());
                stack.push(frame);
                header.clear();
                paren_depth = 0;
            }
            (TokenKind::Separator, "}") => {
                if stack.pop().is_none() {
                    unbalanced = true;
                }
                header.clear();
                paren_depth = 0;
            }
            _ => header.push(i),
        }
    }
    if !stack.is_empty() {
        unbalanced = true;
    }
    LineClasses {
        business,
        unbalanced,
    }
}

fn line_is_business(sig: &[&Token], first: usize, stack: &[Frame]) -> bool {
    let inside_code = match stack.last() {
        Some(Frame::Code) => true,
        Some(Frame::Data) => stack.contains(&Frame::Code),
        _ => false,
    };
    if !inside_code {
        return false;
    }
    let line = sig[first].line_no;
    let on_line = sig[first..].iter().take_while(|t| t.line_no == line);
    let mut only_separators = true;
    for t in on_line {
        if t.kind != TokenKind::Separator {
            only_separators = false;
            break;
        }
    }
    if only_separators {
        return false;
    }
    let head = sig[first];
    !(head.kind == TokenKind::Annotation
        || (head.kind == TokenKind::Keyword && matches!(head.text.as_str(), "import" | "package")))
}

fn open_frame(sig: &[&Token], header: &[usize], top: Option<Frame>) -> Frame {
    let toks: Vec<&Token> = header.iter().map(|&i| sig[i]).collect();
    let declares_type = toks.iter().enumerate().any(|(j, t)| {
        let after_dot = j > 0 && toks[j - 1].text == ".";
        match (t.kind, t.text.as_str()) {
            (TokenKind::Keyword, "class" | "interface" | "enum") => !after_dot,
            (TokenKind::Annotation, "@interface") => true,
            (TokenKind::Identifier, "record") => toks
                .get(j + 1)
                .is_some_and(|n| n.kind == TokenKind::Identifier),
            _ => false,
        }
    });
    if declares_type {
        return Frame::Type;
    }
    let last = toks.last().map(|t| t.text.as_str());
    match top {
        None | Some(Frame::Type) => {
            let is_initializer = toks.is_empty() || (toks.len() == 1 && last == Some("static"));
            let is_signature = last == Some(")")
                || last == Some("->")
                || toks
                    .iter()
                    .any(|t| t.kind == TokenKind::Keyword && t.text == "throws");
            if is_initializer || is_signature {
                Frame::Code
            } else {
                Frame::Data
            }
        }
        Some(Frame::Data) => Frame::Data,
        Some(Frame::Code) => {
            let anonymous_class = last == Some(")")
                && toks
                    .iter()
                    .any(|t| t.kind == TokenKind::Keyword && t.text == "new");
            if anonymous_class {
                Frame::Type
            } else if matches!(last, Some("=" | "]" | ",")) {
                Frame::Data
            } else {
                Frame::Code
            }
        }
    }
}
