use crate::error::{ParseError, ParseErrorKind, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Unsized decimal literal.
    Number(u64),
    /// Sized or based literal, bits most significant first.
    Based(Vec<bool>),
    Punct(char),
    AttrOpen,
    AttrClose,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Based(_) => "constant".into(),
            Tok::Punct(c) => format!("'{c}'"),
            Tok::AttrOpen => "'(*'".into(),
            Tok::AttrClose => "'*)'".into(),
            Tok::Eof => "end of file".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span(&self) -> SourceSpan {
        SourceSpan::new(self.line, self.col)
    }
}

fn syntax(span: SourceSpan, message: impl Into<String>) -> ParseError {
    ParseError {
        span,
        kind: ParseErrorKind::Syntax { expected: vec![] },
        message: message.into(),
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        src: text.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        while let Some(c) = cur.peek() {
            if c.is_ascii_whitespace() {
                cur.bump();
            } else if c == b'/' && cur.peek2() == Some(b'/') {
                while let Some(c) = cur.peek() {
                    if c == b'\n' {
                        break;
                    }
                    cur.bump();
                }
            } else if c == b'/' && cur.peek2() == Some(b'*') {
                let span = cur.span();
                cur.bump();
                cur.bump();
                loop {
                    match cur.peek() {
                        None => return Err(syntax(span, "unterminated block comment")),
                        Some(b'*') if cur.peek2() == Some(b'/') => {
                            cur.bump();
                            cur.bump();
                            break;
                        }
                        Some(_) => {
                            cur.bump();
                        }
                    }
                }
            } else {
                break;
            }
        }
        let span = cur.span();
        let Some(c) = cur.peek() else {
            out.push(Token {
                tok: Tok::Eof,
                span,
            });
            return Ok(out);
        };
        let tok = if c == b'(' && cur.peek2() == Some(b'*') {
            cur.bump();
            cur.bump();
            Tok::AttrOpen
        } else if c == b'*' && cur.peek2() == Some(b')') {
            cur.bump();
            cur.bump();
            Tok::AttrClose
        } else if c == b'\\' {
            cur.bump();
            let mut s = String::new();
            while let Some(c) = cur.peek() {
                if c.is_ascii_whitespace() {
                    break;
                }
                s.push(c as char);
                cur.bump();
            }
            if s.is_empty() {
                return Err(syntax(span, "empty escaped identifier"));
            }
            Tok::Ident(s)
        } else if is_ident_start(c) {
            let mut s = String::new();
            while let Some(c) = cur.peek() {
                if !is_ident_char(c) {
                    break;
                }
                s.push(c as char);
                cur.bump();
            }
            Tok::Ident(s)
        } else if c.is_ascii_digit() || c == b'\'' {
            lex_number(&mut cur, span.clone())?
        } else if b"()[]{},;:.=#".contains(&c) {
            cur.bump();
            Tok::Punct(c as char)
        } else {
            return Err(syntax(
                span,
                format!("unexpected character '{}'", c as char),
            ));
        };
        out.push(Token { tok, span });
    }
}

fn lex_number(cur: &mut Cursor<'_>, span: SourceSpan) -> Result<Tok, ParseError> {
    let mut digits = String::new();
    while let Some(c) = cur.peek() {
        if c.is_ascii_digit() || c == b'_' {
            if c != b'_' {
                digits.push(c as char);
            }
            cur.bump();
        } else {
            break;
        }
    }
    if cur.peek() != Some(b'\'') {
        let n = digits
            .parse::<u64>()
            .map_err(|_| syntax(span.clone(), format!("bad number '{digits}'")))?;
        return Ok(Tok::Number(n));
    }
    cur.bump();
    let width: Option<usize> = if digits.is_empty() {
        None
    } else {
        Some(
            digits
                .parse()
                .map_err(|_| syntax(span.clone(), "bad constant width"))?,
        )
    };
    let base = cur
        .bump()
        .map(|c| c.to_ascii_lowercase())
        .ok_or_else(|| syntax(span.clone(), "truncated constant"))?;
    let mut body = String::new();
    while let Some(c) = cur.peek() {
        if c.is_ascii_alphanumeric() || c == b'_' {
            if c != b'_' {
                body.push(c.to_ascii_lowercase() as char);
            }
            cur.bump();
        } else {
            break;
        }
    }
    let bad = || syntax(span.clone(), format!("bad constant digits '{body}'"));
    let mut bits: Vec<bool> = Vec::new();
    match base {
        b'b' => {
            for ch in body.chars() {
                match ch {
                    '0' => bits.push(false),
                    '1' => bits.push(true),
                    _ => return Err(bad()),
                }
            }
        }
        b'h' => {
            for ch in body.chars() {
                let v = ch.to_digit(16).ok_or_else(bad)?;
                bits.extend((0..4).rev().map(|i| (v >> i) & 1 == 1));
            }
        }
        b'd' => {
            let v: u64 = body.parse().map_err(|_| bad())?;
            bits.extend((0..64).rev().map(|i| (v >> i) & 1 == 1));
        }
        _ => return Err(syntax(span, "constant base must be b, h or d")),
    }
    if bits.is_empty() {
        return Err(bad());
    }
    let width = width.unwrap_or(bits.len().clamp(1, 32));
    if width == 0 {
        return Err(syntax(span, "zero-width constant"));
    }
    let mut out = vec![false; width];
    for (i, b) in bits.iter().rev().take(width).enumerate() {
        out[width - 1 - i] = *b;
    }
    Ok(Tok::Based(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn escaped_identifier_ends_at_whitespace() {
        assert_eq!(
            toks("\\u0/n[3] ,"),
            vec![Tok::Ident("u0/n[3]".into()), Tok::Punct(','), Tok::Eof]
        );
    }

    #[test]
    fn sized_constants() {
        assert_eq!(toks("1'b1")[0], Tok::Based(vec![true]));
        assert_eq!(toks("4'hA")[0], Tok::Based(vec![true, false, true, false]));
        assert_eq!(toks("3'd1")[0], Tok::Based(vec![false, false, true]));
    }

    #[test]
    fn comments_and_attributes() {
        let t = toks("// x\n(* init = 1 *) /* y */ a");
        assert_eq!(
            t,
            vec![
                Tok::AttrOpen,
                Tok::Ident("init".into()),
                Tok::Punct('='),
                Tok::Number(1),
                Tok::AttrClose,
                Tok::Ident("a".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("a\n  b").unwrap();
        assert_eq!((t[1].span.line, t[1].span.column), (2, 3));
    }
}
