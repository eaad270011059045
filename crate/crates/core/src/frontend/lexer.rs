// SPDX-License-Identifier: Apache-2.0

//! Indentation-aware tokenizer. Produces explicit `Newline`, `Indent` and
//! `Dedent` tokens so the parser never looks at whitespace.

use super::FrontendError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Integer literal text including optional sign and radix prefix.
    Int(String),
    Str(String),
    Colon,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Lt,
    Gt,
    Dot,
    Equals,
    /// `<=`
    Connect,
    /// `<-`
    PartialConnect,
    /// `=>`
    Arrow,
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

/// Removes `;` comments and `@[...]` source locators, respecting strings.
fn strip_line(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars().peekable();
    let mut in_str = false;
    while let Some(c) = chars.next() {
        if in_str {
            out.push(c);
            if c == '\\' {
                if let Some(n) = chars.next() {
                    out.push(n);
                }
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_str = true;
                out.push(c);
            }
            ';' => break,
            '@' if chars.peek() == Some(&'[') => {
                // Skip to the matching bracket, keeping columns stable.
                out.push(' ');
                let mut depth = 0;
                for n in chars.by_ref() {
                    out.push(' ');
                    match n {
                        '[' => depth += 1,
                        ']' => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                }
            }
            _ => out.push(c),
        }
    }
    out
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$'
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let mut toks = Vec::new();
    let mut indents: Vec<usize> = vec![0];
    let mut last_line = 0u32;
    for (idx, raw) in src.lines().enumerate() {
        let lineno = idx as u32 + 1;
        last_line = lineno;
        let text = strip_line(raw);
        if text.trim().is_empty() {
            continue;
        }
        if toks.is_empty() && text.trim_start().starts_with("FIRRTL version") {
            continue;
        }
        let indent = text.chars().take_while(|c| *c == ' ' || *c == '\t').count();
        let top = *indents.last().unwrap();
        if indent > top {
            indents.push(indent);
            toks.push(Token {
                tok: Tok::Indent,
                line: lineno,
                col: 1,
            });
        } else {
            while indent < *indents.last().unwrap() {
                indents.pop();
                toks.push(Token {
                    tok: Tok::Dedent,
                    line: lineno,
                    col: 1,
                });
            }
            if indent != *indents.last().unwrap() {
                return Err(FrontendError::syntax(lineno, indent as u32 + 1, "inconsistent indentation"));
            }
        }
        lex_line(&text, lineno, &mut toks)?;
        toks.push(Token {
            tok: Tok::Newline,
            line: lineno,
            col: text.len() as u32 + 1,
        });
    }
    while indents.len() > 1 {
        indents.pop();
        toks.push(Token {
            tok: Tok::Dedent,
            line: last_line + 1,
            col: 1,
        });
    }
    toks.push(Token {
        tok: Tok::Eof,
        line: last_line + 1,
        col: 1,
    });
    Ok(toks)
}

fn lex_line(text: &str, line: u32, toks: &mut Vec<Token>) -> Result<(), FrontendError> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i as u32 + 1;
        let push = |toks: &mut Vec<Token>, tok: Tok| toks.push(Token { tok, line, col });
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let mut word: String = chars[start..i].iter().collect();
            // Memory field keywords are hyphenated: `data-type`, `read-latency`.
            if matches!(word.as_str(), "data" | "read" | "write")
                && i + 1 < chars.len()
                && chars[i] == '-'
                && chars[i + 1].is_ascii_alphabetic()
            {
                i += 1;
                let s2 = i;
                while i < chars.len() && (is_ident_char(chars[i]) || chars[i] == '-') {
                    i += 1;
                }
                word.push('-');
                word.extend(&chars[s2..i]);
            }
            push(toks, Tok::Ident(word));
            continue;
        }
        let starts_number =
            c.is_ascii_digit() || (c == '-' && i + 1 < chars.len() && chars[i + 1].is_ascii_digit());
        if starts_number {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            push(toks, Tok::Int(chars[start..i].iter().collect()));
            continue;
        }
        if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            if i >= chars.len() {
                return Err(FrontendError::syntax(line, col, "unterminated string literal"));
            }
            push(toks, Tok::Str(chars[start..i].iter().collect()));
            i += 1;
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            ('<', Some('=')) => (Tok::Connect, 2),
            ('<', Some('-')) => (Tok::PartialConnect, 2),
            ('=', Some('>')) => (Tok::Arrow, 2),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            ('=', _) => (Tok::Equals, 1),
            (':', _) => (Tok::Colon, 1),
            (',', _) => (Tok::Comma, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('.', _) => (Tok::Dot, 1),
            _ => {
                return Err(FrontendError::syntax(line, col, format!("unexpected character `{c}`")));
            }
        };
        push(toks, tok);
        i += len;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn indentation_tokens() {
        let toks = kinds("a :\n  b\nc\n");
        assert_eq!(
            toks,
            vec![
                Tok::Ident("a".into()),
                Tok::Colon,
                Tok::Newline,
                Tok::Indent,
                Tok::Ident("b".into()),
                Tok::Newline,
                Tok::Dedent,
                Tok::Ident("c".into()),
                Tok::Newline,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_info_are_stripped() {
        let toks = kinds("x <= y @[foo.scala 3:4] ; trailing\n");
        assert_eq!(
            toks,
            vec![
                Tok::Ident("x".into()),
                Tok::Connect,
                Tok::Ident("y".into()),
                Tok::Newline,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn hyphenated_mem_fields_and_numbers() {
        let toks = kinds("data-type => UInt<8>(-3)\n");
        assert_eq!(toks[0], Tok::Ident("data-type".into()));
        assert_eq!(toks[1], Tok::Arrow);
        assert!(toks.contains(&Tok::Int("-3".into())));
        assert!(kinds("sub(a, b)").contains(&Tok::Ident("b".into())));
    }

    #[test]
    fn bad_indentation_reports_position() {
        let err = tokenize("a :\n    b\n  c\n").unwrap_err();
        assert_eq!(err.location(), Some((3, 3)));
    }
}
