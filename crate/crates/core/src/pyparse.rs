//! Indentation-aware tokenizer and recursive-descent parser for the small,
//! Python-syntax subset that the code formats use: classes with attribute
//! assignments, (nested) function definitions, assignments, bare calls,
//! `return`, and comments.
//!
//! The parser runs in one of two modes. Strict mode fails on the first
//! statement it cannot recognize. Tolerant mode skips the offending
//! statement up to the next newline, records a [`ParseWarning`], and keeps
//! going; it never panics and always returns an AST.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const TAB_WIDTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    StringLiteral,
    Number,
    Keyword,
    Punct,
    Comment,
    Newline,
    Indent,
    Dedent,
    EndOfInput,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    pub column: usize,
}

impl Token {
    fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    fn is_keyword(&self, k: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == k
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizeError {
    #[error("unterminated string starting at {0}:{1}")]
    UnterminatedString(usize, usize),
    #[error("inconsistent indentation on line {0}")]
    InconsistentIndent(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WarningKind {
    UnknownStatement,
    UnexpectedIndent,
    UnterminatedString,
    InconsistentIndent,
    DanglingReference,
    DuplicateAssign,
    DuplicateEdge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub kind: WarningKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {:?}: {}",
            self.line, self.column, self.kind, self.message
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse failure at {line}:{column}: expected {expected}, found {found}")]
pub struct ParseFailure {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

impl From<TokenizeError> for ParseFailure {
    fn from(e: TokenizeError) -> Self {
        match e {
            TokenizeError::UnterminatedString(line, column) => ParseFailure {
                line,
                column,
                expected: "closing quote".into(),
                found: "end of line".into(),
            },
            TokenizeError::InconsistentIndent(line) => ParseFailure {
                line,
                column: 1,
                expected: "indentation matching an enclosing block".into(),
                found: "unmatched dedent".into(),
            },
        }
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, TokenizeError> {
    let mut lexer = Lexer::new(text, false);
    lexer.run()?;
    Ok(lexer.tokens)
}

/// Tokenizes without failing: unterminated strings close at end of line and
/// inconsistent dedents snap to the enclosing level, each with a warning.
pub fn tokenize_lenient(text: &str) -> (Vec<Token>, Vec<ParseWarning>) {
    let mut lexer = Lexer::new(text, true);
    // lenient mode never returns Err
    let _ = lexer.run();
    (lexer.tokens, lexer.warnings)
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    depth: usize,
    indents: Vec<usize>,
    tokens: Vec<Token>,
    warnings: Vec<ParseWarning>,
    lenient: bool,
    line_has_tokens: bool,
}

impl Lexer {
    fn new(text: &str, lenient: bool) -> Self {
        Lexer {
            chars: text.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            depth: 0,
            indents: vec![0],
            tokens: Vec::new(),
            warnings: Vec::new(),
            lenient,
            line_has_tokens: false,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn push(&mut self, kind: TokenKind, text: impl Into<String>, line: usize, column: usize) {
        if !matches!(
            kind,
            TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent
        ) {
            self.line_has_tokens = true;
        }
        self.tokens.push(Token {
            kind,
            text: text.into(),
            line,
            column,
        });
    }

    fn end_line(&mut self) {
        if self.line_has_tokens {
            let (line, col) = (self.line, self.col);
            self.push(TokenKind::Newline, "", line, col);
            self.line_has_tokens = false;
        }
    }

    fn run(&mut self) -> Result<(), TokenizeError> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.depth == 0 {
                at_line_start = false;
                let width = self.measure_indent();
                match self.peek() {
                    None => break,
                    Some('\n') | Some('\r') => {
                        at_line_start = true;
                        while let Some(c) = self.peek() {
                            self.bump();
                            if c == '\n' {
                                break;
                            }
                        }
                        continue;
                    }
                    // comment-only lines may open a block but never close one
                    Some('#') => {
                        if width > *self.indents.last().expect("indent stack never empty") {
                            self.apply_indent(width)?;
                        }
                    }
                    Some(_) => self.apply_indent(width)?,
                }
            }
            let Some(c) = self.peek() else { break };
            let (line, col) = (self.line, self.col);
            match c {
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        self.end_line();
                        at_line_start = true;
                    }
                }
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '\\' if matches!(self.peek_at(1), Some('\n')) => {
                    self.bump();
                    self.bump();
                }
                '#' => {
                    self.bump();
                    let mut text = String::new();
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        text.push(c);
                        self.bump();
                    }
                    self.push(TokenKind::Comment, text.trim().to_string(), line, col);
                }
                '"' | '\'' => self.string(c, line, col)?,
                c if c.is_ascii_digit() => {
                    let mut text = String::new();
                    while let Some(c) = self.peek() {
                        if c.is_ascii_alphanumeric() || c == '.' || c == '_' {
                            text.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.push(TokenKind::Number, text, line, col);
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut text = String::new();
                    while let Some(c) = self.peek() {
                        if c.is_alphanumeric() || c == '_' {
                            text.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let kind = match text.as_str() {
                        "class" | "def" | "return" => TokenKind::Keyword,
                        _ => TokenKind::Identifier,
                    };
                    self.push(kind, text, line, col);
                }
                _ => {
                    self.bump();
                    match c {
                        '(' | '[' | '{' => self.depth += 1,
                        ')' | ']' | '}' => self.depth = self.depth.saturating_sub(1),
                        _ => {}
                    }
                    if c == '-' && self.peek() == Some('>') {
                        self.bump();
                        self.push(TokenKind::Punct, "->", line, col);
                    } else {
                        self.push(TokenKind::Punct, c.to_string(), line, col);
                    }
                }
            }
        }
        self.end_line();
        let (line, col) = (self.line, self.col);
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(TokenKind::Dedent, "", line, col);
        }
        self.push(TokenKind::EndOfInput, "", line, col);
        Ok(())
    }

    fn measure_indent(&mut self) -> usize {
        let mut width = 0;
        while let Some(c) = self.peek() {
            match c {
                ' ' => width += 1,
                '\t' => width += TAB_WIDTH,
                _ => break,
            }
            self.bump();
        }
        width
    }

    fn apply_indent(&mut self, width: usize) -> Result<(), TokenizeError> {
        let (line, col) = (self.line, 1);
        let top = *self.indents.last().expect("indent stack never empty");
        if width > top {
            self.indents.push(width);
            self.push(TokenKind::Indent, "", line, col);
            return Ok(());
        }
        while width < *self.indents.last().expect("indent stack never empty") {
            self.indents.pop();
            self.push(TokenKind::Dedent, "", line, col);
        }
        if width != *self.indents.last().expect("indent stack never empty") {
            if !self.lenient {
                return Err(TokenizeError::InconsistentIndent(line));
            }
            self.warnings.push(ParseWarning {
                kind: WarningKind::InconsistentIndent,
                line,
                column: col,
                message: format!("indentation {width} matches no enclosing block"),
            });
            self.indents.push(width);
            self.push(TokenKind::Indent, "", line, col);
        }
        Ok(())
    }

    fn string(&mut self, quote: char, line: usize, col: usize) -> Result<(), TokenizeError> {
        let triple = self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote);
        let open = if triple { 3 } else { 1 };
        for _ in 0..open {
            self.bump();
        }
        let mut text = String::new();
        loop {
            let Some(c) = self.peek() else {
                return self.unterminated(text, line, col);
            };
            if c == '\n' && !triple {
                return self.unterminated(text, line, col);
            }
            if c == quote {
                if !triple {
                    self.bump();
                    break;
                }
                if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                    self.bump();
                    self.bump();
                    self.bump();
                    break;
                }
            }
            self.bump();
            if c == '\\' {
                match self.peek() {
                    Some('\n') => {
                        self.bump();
                    }
                    Some(esc) => {
                        self.bump();
                        match esc {
                            'n' => text.push('\n'),
                            't' => text.push('\t'),
                            'r' => text.push('\r'),
                            '\\' | '"' | '\'' => text.push(esc),
                            other => {
                                text.push('\\');
                                text.push(other);
                            }
                        }
                    }
                    None => return self.unterminated(text, line, col),
                }
            } else {
                text.push(c);
            }
        }
        self.push(TokenKind::StringLiteral, text, line, col);
        Ok(())
    }

    fn unterminated(&mut self, text: String, line: usize, col: usize) -> Result<(), TokenizeError> {
        if !self.lenient {
            return Err(TokenizeError::UnterminatedString(line, col));
        }
        self.warnings.push(ParseWarning {
            kind: WarningKind::UnterminatedString,
            line,
            column: col,
            message: "string closed at end of line".into(),
        });
        self.push(TokenKind::StringLiteral, text, line, col);
        Ok(())
    }
}

/// Lays a token stream back out as source text: one logical line per
/// `Newline`, two spaces per indentation level.
pub fn render_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut level = 0usize;
    let mut line_start = true;
    let mut prev: Option<&Token> = None;
    for tok in tokens {
        match tok.kind {
            TokenKind::Indent => level += 1,
            TokenKind::Dedent => level = level.saturating_sub(1),
            TokenKind::Newline => {
                out.push('\n');
                line_start = true;
                prev = None;
            }
            TokenKind::EndOfInput => {}
            _ => {
                if line_start {
                    out.push_str(&"  ".repeat(level));
                    line_start = false;
                } else if let Some(p) = prev {
                    let tight = tok.is_punct("(")
                        || tok.is_punct(")")
                        || tok.is_punct(",")
                        || tok.is_punct(".")
                        || tok.is_punct(":")
                        || tok.is_punct("]")
                        || p.is_punct("(")
                        || p.is_punct("[")
                        || p.is_punct(".");
                    if !tight {
                        out.push(' ');
                    }
                }
                match tok.kind {
                    TokenKind::StringLiteral => out.push_str(&quote_string(&tok.text)),
                    TokenKind::Comment => {
                        out.push_str("# ");
                        out.push_str(&tok.text);
                    }
                    _ => out.push_str(&tok.text),
                }
                prev = Some(tok);
            }
        }
    }
    out
}

/// Double-quoted literal with backslash escapes.
pub fn quote_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Str(String),
    Number(String),
    /// Plain or dotted name, e.g. `end` or `self.goal`.
    Ident(String),
    /// Elements are `Str` or `Ident`.
    List(Vec<Expr>),
    /// Constructor-style call used as a value, e.g. `Node()` or `nx.DiGraph()`.
    Ctor {
        name: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Expr::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_ident(&self) -> Option<&str> {
        match self {
            Expr::Ident(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stmt {
    Assign {
        target: String,
        value: Expr,
        line: usize,
    },
    Call {
        callee: String,
        args: Vec<Expr>,
        line: usize,
    },
    Return {
        value: Expr,
        line: usize,
    },
    Comment {
        text: String,
        line: usize,
    },
    Def(FunctionDecl),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: String,
    pub attributes: Vec<(String, Expr)>,
    pub methods: Vec<FunctionDecl>,
    pub comments: Vec<String>,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeAst {
    pub classes: Vec<ClassDecl>,
    pub functions: Vec<FunctionDecl>,
    /// Module-level statements other than class and function declarations.
    pub statements: Vec<Stmt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Strict,
    Tolerant,
}

pub fn parse(
    tokens: &[Token],
    mode: ParseMode,
) -> Result<(CodeAst, Vec<ParseWarning>), ParseFailure> {
    let mut p = Parser {
        tokens,
        pos: 0,
        mode,
        warnings: Vec::new(),
        classes: Vec::new(),
    };
    let ast = p.module()?;
    Ok((ast, p.warnings))
}

pub fn parse_strict(text: &str) -> Result<CodeAst, ParseFailure> {
    let tokens = tokenize(text)?;
    parse(&tokens, ParseMode::Strict).map(|(ast, _)| ast)
}

/// Lenient tokenize + tolerant parse. Never fails.
pub fn parse_tolerant(text: &str) -> (CodeAst, Vec<ParseWarning>) {
    let (tokens, mut warnings) = tokenize_lenient(text);
    let (ast, more) = parse(&tokens, ParseMode::Tolerant).expect("tolerant parse does not fail");
    warnings.extend(more);
    (ast, warnings)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    mode: ParseMode,
    warnings: Vec<ParseWarning>,
    classes: Vec<ClassDecl>,
}

type PResult<T> = Result<T, ParseFailure>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &'a Token {
        // streams from the lexer always end with EndOfInput
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn advance(&mut self) -> &'a Token {
        let t = self.peek();
        if self.pos < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn at(&self, kind: TokenKind) -> bool {
        self.peek().kind == kind
    }

    fn fail<T>(&self, expected: &str) -> PResult<T> {
        let t = self.peek();
        let found = match t.kind {
            TokenKind::Newline => "newline".to_string(),
            TokenKind::Indent => "indent".to_string(),
            TokenKind::Dedent => "dedent".to_string(),
            TokenKind::EndOfInput => "end of input".to_string(),
            _ => format!("{:?} {:?}", t.kind, t.text),
        };
        Err(ParseFailure {
            line: t.line,
            column: t.column,
            expected: expected.to_string(),
            found,
        })
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.peek().is_punct(p) {
            self.advance();
            Ok(())
        } else {
            self.fail(&format!("{p:?}"))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        if self.at(TokenKind::Identifier) {
            Ok(self.advance().text.clone())
        } else {
            self.fail("identifier")
        }
    }

    fn end_of_statement(&mut self) -> PResult<Option<Stmt>> {
        let trailing = if self.at(TokenKind::Comment) {
            let t = self.advance();
            Some(Stmt::Comment {
                text: t.text.clone(),
                line: t.line,
            })
        } else {
            None
        };
        match self.peek().kind {
            TokenKind::Newline => {
                self.advance();
                Ok(trailing)
            }
            TokenKind::EndOfInput | TokenKind::Dedent => Ok(trailing),
            _ => self.fail("end of statement"),
        }
    }

    fn warn(&mut self, kind: WarningKind, failure: &ParseFailure) {
        self.warnings.push(ParseWarning {
            kind,
            line: failure.line,
            column: failure.column,
            message: format!("expected {}, found {}", failure.expected, failure.found),
        });
    }

    /// Skips to just past the next newline, stopping early at a dedent or
    /// end of input.
    fn recover(&mut self) {
        loop {
            match self.peek().kind {
                TokenKind::Newline => {
                    self.advance();
                    return;
                }
                TokenKind::EndOfInput | TokenKind::Dedent => return,
                _ => {
                    self.advance();
                }
            }
        }
    }

    fn module(&mut self) -> PResult<CodeAst> {
        let mut ast = CodeAst::default();
        let stmts = self.statements(true)?;
        for s in stmts {
            match s {
                Stmt::Def(f) => ast.functions.push(f),
                other => ast.statements.push(other),
            }
        }
        ast.classes = std::mem::take(&mut self.classes);
        Ok(ast)
    }

    /// Parses statements until a dedent (not consumed) or end of input.
    fn statements(&mut self, top_level: bool) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        loop {
            let tok = self.peek();
            match tok.kind {
                TokenKind::EndOfInput => break,
                TokenKind::Dedent => {
                    if top_level {
                        // stray dedent at module level
                        self.advance();
                        continue;
                    }
                    break;
                }
                TokenKind::Newline => {
                    self.advance();
                }
                TokenKind::Indent => {
                    let failure = ParseFailure {
                        line: tok.line,
                        column: tok.column,
                        expected: "statement".into(),
                        found: "unexpected indent".into(),
                    };
                    if self.mode == ParseMode::Strict {
                        return Err(failure);
                    }
                    self.warn(WarningKind::UnexpectedIndent, &failure);
                    self.advance();
                    let nested = self.statements(false)?;
                    out.extend(nested);
                    if self.at(TokenKind::Dedent) {
                        self.advance();
                    }
                }
                TokenKind::Comment => {
                    self.advance();
                    out.push(Stmt::Comment {
                        text: tok.text.clone(),
                        line: tok.line,
                    });
                    if self.at(TokenKind::Newline) {
                        self.advance();
                    }
                }
                _ => {
                    let start = self.pos;
                    let result = if tok.is_keyword("class") {
                        self.class_decl(top_level).map(|_| Vec::new())
                    } else if tok.is_keyword("def") {
                        self.function_decl().map(|f| vec![Stmt::Def(f)])
                    } else {
                        self.simple_statement()
                    };
                    match result {
                        Ok(stmts) => out.extend(stmts),
                        Err(failure) => {
                            if self.mode == ParseMode::Strict {
                                return Err(failure);
                            }
                            self.warn(WarningKind::UnknownStatement, &failure);
                            if self.pos == start {
                                self.advance();
                            }
                            self.recover();
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        if !self.at(TokenKind::Indent) {
            if self.mode == ParseMode::Strict && !self.at(TokenKind::EndOfInput) {
                return self.fail("indented block");
            }
            // header at end of input (a stub) or an empty body
            return Ok(Vec::new());
        }
        self.advance();
        let body = self.statements(false)?;
        if self.at(TokenKind::Dedent) {
            self.advance();
        }
        Ok(body)
    }

    fn class_decl(&mut self, top_level: bool) -> PResult<()> {
        let line = self.advance().line;
        let name = self.expect_ident()?;
        if self.peek().is_punct("(") {
            self.advance();
            while !self.peek().is_punct(")") {
                if self.at(TokenKind::EndOfInput) || self.at(TokenKind::Newline) {
                    return self.fail("\")\"");
                }
                self.advance();
            }
            self.advance();
        }
        self.expect_punct(":")?;
        self.end_of_statement()?;
        let body = self.block()?;
        let mut class = ClassDecl {
            name,
            attributes: Vec::new(),
            methods: Vec::new(),
            comments: Vec::new(),
            line,
        };
        for stmt in body {
            match stmt {
                Stmt::Assign { target, value, .. } => class.attributes.push((target, value)),
                Stmt::Def(f) => class.methods.push(f),
                Stmt::Comment { text, .. } => class.comments.push(text),
                Stmt::Call { line, .. } | Stmt::Return { line, .. } => {
                    let failure = ParseFailure {
                        line,
                        column: 1,
                        expected: "attribute, method or comment in class body".into(),
                        found: "statement".into(),
                    };
                    if self.mode == ParseMode::Strict {
                        return Err(failure);
                    }
                    self.warn(WarningKind::UnknownStatement, &failure);
                }
            }
        }
        if !top_level && self.mode == ParseMode::Tolerant {
            self.warnings.push(ParseWarning {
                kind: WarningKind::UnknownStatement,
                line,
                column: 1,
                message: "nested class declaration hoisted to module level".into(),
            });
        }
        self.classes.push(class);
        Ok(())
    }

    fn function_decl(&mut self) -> PResult<FunctionDecl> {
        let line = self.advance().line;
        let name = self.expect_ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        while !self.peek().is_punct(")") {
            params.push(self.expect_ident()?);
            if self.peek().is_punct(",") {
                self.advance();
            } else if !self.peek().is_punct(")") {
                return self.fail("\",\" or \")\"");
            }
        }
        self.advance();
        self.expect_punct(":")?;
        self.end_of_statement()?;
        let body = self.block()?;
        Ok(FunctionDecl {
            name,
            params,
            body,
            line,
        })
    }

    fn dotted_name(&mut self) -> PResult<String> {
        let mut name = self.expect_ident()?;
        while self.peek().is_punct(".") {
            self.advance();
            name.push('.');
            name.push_str(&self.expect_ident()?);
        }
        Ok(name)
    }

    fn simple_statement(&mut self) -> PResult<Vec<Stmt>> {
        let tok = self.peek();
        let line = tok.line;
        let stmt = if tok.is_keyword("return") {
            self.advance();
            let value = self.expr()?;
            Stmt::Return { value, line }
        } else {
            let name = self.dotted_name()?;
            if self.peek().is_punct("=") {
                self.advance();
                let value = self.expr()?;
                Stmt::Assign {
                    target: name,
                    value,
                    line,
                }
            } else if self.peek().is_punct("(") {
                let args = self.call_args()?;
                Stmt::Call {
                    callee: name,
                    args,
                    line,
                }
            } else {
                return self.fail("\"=\" or \"(\"");
            }
        };
        let mut out = vec![stmt];
        if let Some(trailing) = self.end_of_statement()? {
            out.push(trailing);
        }
        Ok(out)
    }

    fn skip_inline_comments(&mut self) {
        while self.at(TokenKind::Comment) {
            self.advance();
        }
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        loop {
            self.skip_inline_comments();
            if self.peek().is_punct(")") {
                self.advance();
                break;
            }
            args.push(self.expr()?);
            self.skip_inline_comments();
            if self.peek().is_punct(",") {
                self.advance();
            } else if !self.peek().is_punct(")") {
                return self.fail("\",\" or \")\"");
            }
        }
        Ok(args)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let tok = self.peek();
        match tok.kind {
            TokenKind::StringLiteral => {
                self.advance();
                Ok(Expr::Str(tok.text.clone()))
            }
            TokenKind::Number => {
                self.advance();
                Ok(Expr::Number(tok.text.clone()))
            }
            TokenKind::Identifier => {
                let name = self.dotted_name()?;
                if self.peek().is_punct("(") {
                    let args = self.call_args()?;
                    Ok(Expr::Ctor { name, args })
                } else {
                    Ok(Expr::Ident(name))
                }
            }
            TokenKind::Punct if tok.text == "[" => {
                self.advance();
                let mut items = Vec::new();
                loop {
                    self.skip_inline_comments();
                    if self.peek().is_punct("]") {
                        self.advance();
                        break;
                    }
                    let item = self.expr()?;
                    if !matches!(item, Expr::Str(_) | Expr::Ident(_)) {
                        return Err(ParseFailure {
                            line: tok.line,
                            column: tok.column,
                            expected: "string or identifier list element".into(),
                            found: "nested expression".into(),
                        });
                    }
                    items.push(item);
                    self.skip_inline_comments();
                    if self.peek().is_punct(",") {
                        self.advance();
                    } else if !self.peek().is_punct("]") {
                        return self.fail("\",\" or \"]\"");
                    }
                }
                Ok(Expr::List(items))
            }
            _ => self.fail("expression"),
        }
    }
}

/// Cuts `text` before the first column-0 `class`/`def` line that follows at
/// least one statement, so a completion that runs on into a further
/// declaration keeps only its first one.
pub fn truncate_at_boundary(text: &str) -> &str {
    let mut seen_statement = false;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let starts_decl = line.starts_with("class ") || line.starts_with("def ");
        if starts_decl && seen_statement {
            return &text[..offset];
        }
        let trimmed = line.trim();
        if !trimmed.is_empty() && !starts_decl {
            seen_statement = true;
        }
        offset += line.len();
    }
    text
}
