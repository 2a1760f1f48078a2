use super::MpcError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Assign,
    Le,
    Ge,
    Plus,
    Minus,
    Star,
    Bars,
    DotDot,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Num(x) => format!("number {x}"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Comma => "','".into(),
            Tok::Semi => "';'".into(),
            Tok::Colon => "':'".into(),
            Tok::Assign => "'='".into(),
            Tok::Le => "'<='".into(),
            Tok::Ge => "'>='".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Bars => "'||'".into(),
            Tok::DotDot => "'..'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

/// Token with its 1-based position and whether whitespace touches it on
/// either side (needed for `[a -b]` inside matrix literals).
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    pub space_before: bool,
    pub space_after: bool,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, MpcError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out: Vec<Token> = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut space = true;
    let syntax = |line, col, expected: &str, found: String| MpcError::Syntax {
        line,
        col,
        expected: expected.to_string(),
        found,
    };
    while i < chars.len() {
        let ch = chars[i];
        if ch == '\n' {
            i += 1;
            line += 1;
            col = 1;
            space = true;
            continue;
        }
        if ch.is_whitespace() {
            i += 1;
            col += 1;
            space = true;
            continue;
        }
        if ch == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            space = true;
            continue;
        }
        if let Some(last) = out.last_mut() {
            last.space_after = space;
        }
        let (start_line, start_col) = (line, col);
        let next = chars.get(i + 1).copied();
        let (tok, len) = if ch.is_ascii_alphabetic() || ch == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            (Tok::Ident(chars[i..j].iter().collect()), j - i)
        } else if ch.is_ascii_digit() || (ch == '.' && next.is_some_and(|c| c.is_ascii_digit())) {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j < chars.len() && chars[j] == '.' && chars.get(j + 1) != Some(&'.') {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text: String = chars[i..j].iter().collect();
            let value: f64 = text
                .parse()
                .map_err(|_| syntax(start_line, start_col, "a number", format!("'{text}'")))?;
            (Tok::Num(value), j - i)
        } else {
            match (ch, next) {
                ('|', Some('|')) => (Tok::Bars, 2),
                ('.', Some('.')) => (Tok::DotDot, 2),
                ('<', Some('=')) => (Tok::Le, 2),
                ('>', Some('=')) => (Tok::Ge, 2),
                ('=', Some('=')) => (Tok::Assign, 2),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                (',', _) => (Tok::Comma, 1),
                (';', _) => (Tok::Semi, 1),
                (':', _) => (Tok::Colon, 1),
                ('=', _) => (Tok::Assign, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                _ => return Err(syntax(start_line, start_col, "a token", format!("'{ch}'"))),
            }
        };
        out.push(Token { tok, line: start_line, col: start_col, space_before: space, space_after: true });
        i += len;
        col += len;
        space = false;
    }
    if let Some(last) = out.last_mut() {
        last.space_after = true;
    }
    out.push(Token { tok: Tok::Eof, line, col, space_before: true, space_after: true });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn ranges_and_numbers() {
        assert_eq!(toks("k=1..H-1"), vec![
            Tok::Ident("k".into()),
            Tok::Assign,
            Tok::Num(1.0),
            Tok::DotDot,
            Tok::Ident("H".into()),
            Tok::Minus,
            Tok::Num(1.0),
            Tok::Eof
        ]);
        assert_eq!(toks("1.000695409372118 2e-3 .5"), vec![
            Tok::Num(1.000695409372118),
            Tok::Num(2e-3),
            Tok::Num(0.5),
            Tok::Eof
        ]);
    }

    #[test]
    fn norms_and_relations() {
        assert_eq!(toks("|| x ||<=3 % comment\n>="), vec![
            Tok::Bars,
            Tok::Ident("x".into()),
            Tok::Bars,
            Tok::Le,
            Tok::Num(3.0),
            Tok::Ge,
            Tok::Eof
        ]);
    }

    #[test]
    fn spacing_flags_and_positions() {
        let t = tokenize("[-l  -r\n 0]").unwrap();
        assert!(t[3].space_before && !t[3].space_after);
        assert_eq!((t[5].line, t[5].col), (2, 2));
        let err = tokenize("a $ b").unwrap_err();
        assert!(matches!(err, MpcError::Syntax { line: 1, col: 3, .. }));
    }
}
