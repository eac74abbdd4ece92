use super::TextError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i32),
    Float(f64),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Colon,
    Dot,
    Arrow,
    Eq,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Float(v) => format!("`{v}`"),
            Tok::Str(_) => "string".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Lexer<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn take_while(&mut self, out: &mut String, f: impl Fn(char) -> bool) {
        while let Some(c) = self.peek().filter(|c| f(*c)) {
            out.push(c);
            self.bump();
        }
    }

    fn number(&mut self, pos: Pos, negative: bool) -> Result<Tok, TextError> {
        let mut text = String::from(if negative { "-" } else { "" });
        self.take_while(&mut text, |c| c.is_ascii_digit());
        let mut float = false;
        if self.peek() == Some('.') {
            float = true;
            text.push('.');
            self.bump();
            let before = text.len();
            self.take_while(&mut text, |c| c.is_ascii_digit());
            if text.len() == before {
                return Err(TextError::syntax(pos, "expected digits after `.`"));
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            float = true;
            text.push('e');
            self.bump();
            if let Some(sign @ ('+' | '-')) = self.peek() {
                text.push(sign);
                self.bump();
            }
            let before = text.len();
            self.take_while(&mut text, |c| c.is_ascii_digit());
            if text.len() == before {
                return Err(TextError::syntax(pos, "expected exponent digits"));
            }
        }
        if self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(TextError::syntax(pos, format!("malformed number `{text}`")));
        }
        if float {
            text.parse().map(Tok::Float).map_err(|_| TextError::syntax(pos, format!("malformed number `{text}`")))
        } else {
            text.parse().map(Tok::Int).map_err(|_| TextError::syntax(pos, format!("integer `{text}` out of range")))
        }
    }

    fn string(&mut self, pos: Pos) -> Result<Tok, TextError> {
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(TextError::syntax(pos, "unterminated string")),
                Some('"') => return Ok(Tok::Str(out)),
                Some('\\') => {
                    let esc = self.pos();
                    match self.bump() {
                        Some('n') => out.push('\n'),
                        Some('t') => out.push('\t'),
                        Some('r') => out.push('\r'),
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        _ => return Err(TextError::syntax(esc, "unknown escape")),
                    }
                }
                Some(c) => out.push(c),
            }
        }
    }
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, TextError> {
    let mut lx = Lexer { chars: text.chars().peekable(), line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        while let Some(c) = lx.peek() {
            if c.is_whitespace() {
                lx.bump();
            } else if c == '#' {
                while lx.peek().is_some_and(|c| c != '\n') {
                    lx.bump();
                }
            } else {
                break;
            }
        }
        let pos = lx.pos();
        let Some(c) = lx.peek() else {
            out.push(Token { tok: Tok::Eof, pos });
            return Ok(out);
        };
        let tok = match c {
            '{' | '}' | '[' | ']' | ':' | '.' | '=' => {
                lx.bump();
                match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ':' => Tok::Colon,
                    '.' => Tok::Dot,
                    _ => Tok::Eq,
                }
            }
            '"' => {
                lx.bump();
                lx.string(pos)?
            }
            '-' => {
                lx.bump();
                match lx.peek() {
                    Some('>') => {
                        lx.bump();
                        Tok::Arrow
                    }
                    Some(d) if d.is_ascii_digit() => lx.number(pos, true)?,
                    Some('i') => {
                        let mut word = String::new();
                        lx.take_while(&mut word, |c| c.is_ascii_alphanumeric() || c == '_');
                        if word != "inf" {
                            return Err(TextError::syntax(pos, format!("unexpected `-{word}`")));
                        }
                        Tok::Float(f64::NEG_INFINITY)
                    }
                    _ => return Err(TextError::syntax(pos, "unexpected `-`")),
                }
            }
            c if c.is_ascii_digit() => lx.number(pos, false)?,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::new();
                lx.take_while(&mut word, |c| c.is_ascii_alphanumeric() || c == '_');
                Tok::Ident(word)
            }
            other => return Err(TextError::syntax(pos, format!("unexpected character `{other}`"))),
        };
        out.push(Token { tok, pos });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<Tok> {
        tokenize(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_and_arrows() {
        assert_eq!(
            toks("-3 2.5 1e3 -inf a->b"),
            [
                Tok::Int(-3),
                Tok::Float(2.5),
                Tok::Float(1000.0),
                Tok::Float(f64::NEG_INFINITY),
                Tok::Ident("a".into()),
                Tok::Arrow,
                Tok::Ident("b".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("# comment\n  x").unwrap();
        assert_eq!(t[0].pos, Pos { line: 2, col: 3 });
    }

    #[test]
    fn errors_carry_locations() {
        let err = tokenize("a\n  \"open").unwrap_err();
        assert_eq!(err.pos(), Pos { line: 2, col: 3 });
        assert!(tokenize("99999999999").is_err());
        assert!(tokenize("1.").is_err());
        assert!(tokenize("a $").is_err());
    }

    #[test]
    fn string_escapes() {
        assert_eq!(toks(r#""a\"b\n""#)[0], Tok::Str("a\"b\n".into()));
    }
}
