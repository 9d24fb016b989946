//! Parser for the specification DSL.
//!
//! Grammar (whitespace-insensitive, `#` starts a line comment):
//!
//! ```text
//! spec    := choice ;
//! choice  := seq { "or" seq } ;
//! seq     := ens { ";" ens } ;                  (right-associative)
//! ens     := base { "ensuring" pred } ;
//! base    := [ "achieve" ] pred | "(" spec ")" ;
//! pred    := term { "or" term } ;
//! term    := factor { "and" factor } ;
//! factor  := atom | "(" pred ")" ;
//! atom    := ident "(" num { "," num } ")" ;
//! ```
//!
//! Precedence: `or` binds loosest, then `;`, then `ensuring`; parentheses
//! override. An `or` outside predicate parentheses is therefore always a
//! choice between specifications. To get a disjunction inside a single
//! predicate write it parenthesized, e.g. `achieve (p(1) or q(2))` or
//! `... ensuring (p(1) or q(2))`. A bare parenthesized group is parsed as a
//! specification, so `(p(1) or q(2)); r(3)` is a choice followed by `r(3)`.
//!
//! Atom names are resolved against an [`AtomResolver`], which supplies the
//! quantitative semantics (e.g. room-grid `reach`/`avoid`).

use thiserror::Error;

use super::ast::{AtomicPredicate, Predicate, Spec};

/// Syntax or resolution error, with 1-based source position.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl ParseError {
    fn new(message: impl Into<String>, pos: (usize, usize)) -> Self {
        ParseError { message: message.into(), line: pos.0, column: pos.1 }
    }
}

/// Maps an atom name and its numeric arguments to a concrete predicate.
pub trait AtomResolver {
    fn resolve(&self, name: &str, args: &[f64]) -> Result<AtomicPredicate, String>;
}

impl<F> AtomResolver for F
where
    F: Fn(&str, &[f64]) -> Result<AtomicPredicate, String>,
{
    fn resolve(&self, name: &str, args: &[f64]) -> Result<AtomicPredicate, String> {
        self(name, args)
    }
}

/// Parses a specification, resolving atoms through `resolver`.
pub fn parse_spec(text: &str, resolver: &dyn AtomResolver) -> Result<Spec, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, resolver };
    let spec = p.choice()?;
    match p.peek() {
        TokenKind::Eof => Ok(spec),
        other => Err(ParseError::new(format!("unexpected {}", other.describe()), p.here())),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    Semi,
    Comma,
    Or,
    And,
    Ensuring,
    Achieve,
    Eof,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Num(n) => format!("number `{n}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Semi => "`;`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Or => "`or`".into(),
            TokenKind::And => "`and`".into(),
            TokenKind::Ensuring => "`ensuring`".into(),
            TokenKind::Achieve => "`achieve`".into(),
            TokenKind::Eof => "end of input".into(),
        }
    }
}

struct Token {
    kind: TokenKind,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut column = 1usize;
    let mut chars = text.chars().peekable();

    while let Some(&c) = chars.peek() {
        let start = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
        } else if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump(&mut chars);
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut ident = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    ident.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            let kind = match ident.as_str() {
                "or" => TokenKind::Or,
                "and" => TokenKind::And,
                "ensuring" => TokenKind::Ensuring,
                "achieve" => TokenKind::Achieve,
                _ => TokenKind::Ident(ident),
            };
            out.push(Token { kind, line: start.0, column: start.1 });
        } else if c.is_ascii_digit() || c == '-' || c == '.' {
            let mut num = String::new();
            if c == '-' {
                num.push(bump(&mut chars));
            }
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() || c == '.' {
                    num.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            let value: f64 = num
                .parse()
                .map_err(|_| ParseError::new(format!("malformed number `{num}`"), start))?;
            out.push(Token { kind: TokenKind::Num(value), line: start.0, column: start.1 });
        } else {
            let kind = match c {
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                ';' => TokenKind::Semi,
                ',' => TokenKind::Comma,
                _ => return Err(ParseError::new(format!("unexpected character `{c}`"), start)),
            };
            bump(&mut chars);
            out.push(Token { kind, line: start.0, column: start.1 });
        }
    }
    out.push(Token { kind: TokenKind::Eof, line, column });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    resolver: &'a dyn AtomResolver,
}

impl Parser<'_> {
    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.column)
    }

    fn advance(&mut self) -> &TokenKind {
        let k = &self.tokens[self.pos].kind;
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        k
    }

    fn eat(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        if *self.peek() == kind {
            self.advance();
            Ok(())
        } else {
            Err(ParseError::new(
                format!("expected {}, found {}", kind.describe(), self.peek().describe()),
                self.here(),
            ))
        }
    }

    fn choice(&mut self) -> Result<Spec, ParseError> {
        let mut spec = self.seq()?;
        while *self.peek() == TokenKind::Or {
            self.advance();
            let rhs = self.seq()?;
            spec = Spec::choice(spec, rhs);
        }
        Ok(spec)
    }

    fn seq(&mut self) -> Result<Spec, ParseError> {
        let mut parts = vec![self.ens()?];
        while *self.peek() == TokenKind::Semi {
            self.advance();
            parts.push(self.ens()?);
        }
        // `;` is right-associative.
        let mut spec = parts.pop().expect("at least one part");
        while let Some(lhs) = parts.pop() {
            spec = Spec::seq(lhs, spec);
        }
        Ok(spec)
    }

    fn ens(&mut self) -> Result<Spec, ParseError> {
        let mut spec = self.base()?;
        while *self.peek() == TokenKind::Ensuring {
            self.advance();
            let pred = self.term()?;
            spec = Spec::ensuring(spec, pred);
        }
        Ok(spec)
    }

    fn base(&mut self) -> Result<Spec, ParseError> {
        match self.peek() {
            TokenKind::Achieve => {
                self.advance();
                Ok(Spec::achieve(self.term()?))
            }
            TokenKind::LParen => {
                self.advance();
                let spec = self.choice()?;
                self.eat(TokenKind::RParen)?;
                Ok(spec)
            }
            _ => Ok(Spec::achieve(self.term()?)),
        }
    }

    /// Conjunction chain. A top-level `or` is left for the enclosing choice;
    /// predicate-level disjunction requires parentheses.
    fn term(&mut self) -> Result<Predicate, ParseError> {
        let mut pred = self.factor()?;
        while *self.peek() == TokenKind::And {
            self.advance();
            let rhs = self.factor()?;
            pred = Predicate::and(pred, rhs);
        }
        Ok(pred)
    }

    /// Full predicate grammar, only reachable inside predicate parentheses.
    fn pred(&mut self) -> Result<Predicate, ParseError> {
        let mut pred = self.term()?;
        while *self.peek() == TokenKind::Or {
            self.advance();
            let rhs = self.term()?;
            pred = Predicate::or(pred, rhs);
        }
        Ok(pred)
    }

    fn factor(&mut self) -> Result<Predicate, ParseError> {
        if *self.peek() == TokenKind::LParen {
            self.advance();
            let pred = self.pred()?;
            self.eat(TokenKind::RParen)?;
            return Ok(pred);
        }
        self.atom().map(Predicate::Atom)
    }

    fn atom(&mut self) -> Result<AtomicPredicate, ParseError> {
        let at = self.here();
        let name = match self.peek().clone() {
            TokenKind::Ident(name) => {
                self.advance();
                name
            }
            other => {
                return Err(ParseError::new(
                    format!("expected predicate, found {}", other.describe()),
                    at,
                ))
            }
        };
        self.eat(TokenKind::LParen)?;
        let mut args = Vec::new();
        loop {
            match self.peek().clone() {
                TokenKind::Num(n) => {
                    self.advance();
                    args.push(n);
                }
                other => {
                    return Err(ParseError::new(
                        format!("expected number, found {}", other.describe()),
                        self.here(),
                    ))
                }
            }
            match self.peek() {
                TokenKind::Comma => {
                    self.advance();
                }
                _ => break,
            }
        }
        self.eat(TokenKind::RParen)?;
        self.resolver.resolve(&name, &args).map_err(|msg| ParseError::new(msg, at))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_lang::ast::AtomicPredicate;

    /// Accepts any atom, attaching a dummy quantitative semantics.
    pub(crate) fn free_atoms(name: &str, args: &[f64]) -> Result<AtomicPredicate, String> {
        Ok(AtomicPredicate::custom(name, args.to_vec(), |_| 0.0))
    }

    fn strict_atoms(name: &str, args: &[f64]) -> Result<AtomicPredicate, String> {
        match name {
            "reach" | "avoid" => free_atoms(name, args),
            _ => Err(format!("unknown atomic predicate `{name}`")),
        }
    }

    fn parse(text: &str) -> Spec {
        parse_spec(text, &free_atoms).unwrap()
    }

    fn atom(name: &str, args: &[f64]) -> Predicate {
        Predicate::Atom(free_atoms(name, args).unwrap())
    }

    #[test]
    fn sequencing_of_two_goals() {
        let got = parse("reach(2,0); reach(0,0)");
        let want = Spec::seq(
            Spec::achieve(atom("reach", &[2.0, 0.0])),
            Spec::achieve(atom("reach", &[0.0, 0.0])),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn parenthesized_choice_then_goal() {
        let got = parse("(reach(2,0) or reach(0,2)); reach(2,2)");
        let want = Spec::seq(
            Spec::choice(
                Spec::achieve(atom("reach", &[2.0, 0.0])),
                Spec::achieve(atom("reach", &[0.0, 2.0])),
            ),
            Spec::achieve(atom("reach", &[2.0, 2.0])),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn ensuring_binds_tightest() {
        let got = parse("reach(2,0) ensuring avoid(1,0)");
        let want = Spec::ensuring(
            Spec::achieve(atom("reach", &[2.0, 0.0])),
            atom("avoid", &[1.0, 0.0]),
        );
        assert_eq!(got, want);

        // `or` splits at the specification level, not inside the ensuring.
        let got = parse("reach(2,0) ensuring avoid(1,0) or reach(0,2)");
        let want = Spec::choice(want, Spec::achieve(atom("reach", &[0.0, 2.0])));
        assert_eq!(got, want);
    }

    #[test]
    fn seq_is_right_associative() {
        let got = parse("a(1); b(2); c(3)");
        let want = Spec::seq(
            Spec::achieve(atom("a", &[1.0])),
            Spec::seq(Spec::achieve(atom("b", &[2.0])), Spec::achieve(atom("c", &[3.0]))),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn achieve_keyword_keeps_or_inside_the_predicate() {
        let got = parse("achieve (a(1) or b(2))");
        let want = Spec::achieve(Predicate::or(atom("a", &[1.0]), atom("b", &[2.0])));
        assert_eq!(got, want);

        // Without the keyword, the parenthesized group is a specification.
        let got = parse("(a(1) or b(2))");
        let want = Spec::choice(Spec::achieve(atom("a", &[1.0])), Spec::achieve(atom("b", &[2.0])));
        assert_eq!(got, want);
    }

    #[test]
    fn conjunction_and_nested_parens() {
        let got = parse("a(1) and b(2) and c(3)");
        let want = Spec::achieve(Predicate::and(
            Predicate::and(atom("a", &[1.0]), atom("b", &[2.0])),
            atom("c", &[3.0]),
        ));
        assert_eq!(got, want);

        let got = parse("x(0) ensuring ((a(1) or b(2)) and c(3))");
        let want = Spec::ensuring(
            Spec::achieve(atom("x", &[0.0])),
            Predicate::and(Predicate::or(atom("a", &[1.0]), atom("b", &[2.0])), atom("c", &[3.0])),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let got = parse("# goal\n  reach(2,0)  ; # then home\n reach(0,0)");
        let want = parse("reach(2,0); reach(0,0)");
        assert_eq!(got, want);
    }

    #[test]
    fn negative_and_fractional_arguments() {
        let got = parse("near(-1.5, 0.25)");
        assert_eq!(got, Spec::achieve(atom("near", &[-1.5, 0.25])));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_spec("reach(2,0);; reach(0,0)", &free_atoms).unwrap_err();
        assert_eq!((err.line, err.column), (1, 12));

        let err = parse_spec("reach(2,\n  oops)", &free_atoms).unwrap_err();
        assert_eq!(err.line, 2);

        let err = parse_spec("reach(1,1) ensuring", &free_atoms).unwrap_err();
        assert!(err.message.contains("expected predicate"));
    }

    #[test]
    fn unknown_atom_is_rejected_at_its_position() {
        let err = parse_spec("reach(0,0); blocked(1,2)", &free_atoms.clone())
            .err()
            .map(|_| ())
            .unwrap_or(());
        // free resolver accepts everything; the strict one rejects.
        let _ = err;
        let err = parse_spec("reach(0,0); blocked(1,2)", &strict_atoms).unwrap_err();
        assert!(err.message.contains("unknown atomic predicate"));
        assert_eq!((err.line, err.column), (1, 13));
    }

    #[test]
    fn trailing_garbage_is_an_error() {
        let err = parse_spec("reach(0,0) reach(1,1)", &free_atoms).unwrap_err();
        assert!(err.message.contains("unexpected"));
    }
}
