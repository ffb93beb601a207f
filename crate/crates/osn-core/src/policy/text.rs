//! Recursive-descent parser for the policy surface syntax.
//!
//! Grammar:
//!
//! ```text
//! expr   := term ('OR' term)*
//! term   := factor ('AND' factor)*
//! factor := IDENT | '(' expr ')' | INT 'of' '{' IDENT (',' IDENT)* '}'
//! ```
//!
//! `AND` binds tighter than `OR`. Identifiers are attribute names resolved
//! through a caller-supplied map; the parser itself never invents ids.
//! There is no negation operator: `NOT` is reserved and rejected so that the
//! monotonicity of attribute policies is visible in the grammar.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{AttributeId, PolicyTree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        expected: &'static str,
        found: String,
    },
    #[error("unknown attribute name {name:?} at byte {pos}")]
    UnknownAttribute { pos: usize, name: String },
    #[error("threshold {k} exceeds member count {n} at byte {pos}")]
    BadThreshold { pos: usize, k: u64, n: usize },
    #[error("negation is not supported (policies are monotone) at byte {pos}")]
    NegationUnsupported { pos: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Int(u64),
    And,
    Or,
    Of,
    Not,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("identifier {s:?}"),
            Token::Int(v) => format!("integer {v}"),
            Token::And => "'AND'".into(),
            Token::Or => "'OR'".into(),
            Token::Of => "'of'".into(),
            Token::Not => "'NOT'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
            Token::LBrace => "'{'".into(),
            Token::RBrace => "'}'".into(),
            Token::Comma => "','".into(),
            Token::End => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
    }

    fn next(&mut self) -> Result<(usize, Token), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let Some(c) = rest.chars().next() else {
            return Ok((start, Token::End));
        };
        let single = match c {
            '(' => Some(Token::LParen),
            ')' => Some(Token::RParen),
            '{' => Some(Token::LBrace),
            '}' => Some(Token::RBrace),
            ',' => Some(Token::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += c.len_utf8();
            return Ok((start, tok));
        }
        if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
            let word: String = rest
                .chars()
                .take_while(|ch| ch.is_ascii_alphanumeric() || *ch == '_' || *ch == '-')
                .collect();
            self.pos += word.len();
            let tok = if word.chars().all(|ch| ch.is_ascii_digit()) {
                match word.parse::<u64>() {
                    Ok(v) => Token::Int(v),
                    Err(_) => {
                        return Err(ParseError::Syntax {
                            pos: start,
                            expected: "integer",
                            found: format!("{word:?}"),
                        })
                    }
                }
            } else {
                match word.as_str() {
                    "AND" => Token::And,
                    "OR" => Token::Or,
                    "of" => Token::Of,
                    "NOT" => Token::Not,
                    _ => Token::Ident(word),
                }
            };
            return Ok((start, tok));
        }
        Err(ParseError::Syntax {
            pos: start,
            expected: "identifier, integer, or punctuation",
            found: format!("{c:?}"),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    lookahead: (usize, Token),
    names: &'a BTreeMap<String, AttributeId>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, names: &'a BTreeMap<String, AttributeId>) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let lookahead = lexer.next()?;
        Ok(Self {
            lexer,
            lookahead,
            names,
        })
    }

    fn advance(&mut self) -> Result<(usize, Token), ParseError> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.lookahead, next))
    }

    fn expect(&mut self, want: Token, expected: &'static str) -> Result<usize, ParseError> {
        let (pos, tok) = self.advance()?;
        if tok == want {
            Ok(pos)
        } else {
            Err(ParseError::Syntax {
                pos,
                expected,
                found: tok.describe(),
            })
        }
    }

    fn resolve(&self, pos: usize, name: &str) -> Result<AttributeId, ParseError> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| ParseError::UnknownAttribute {
                pos,
                name: name.to_string(),
            })
    }

    fn expr(&mut self) -> Result<PolicyTree, ParseError> {
        let mut terms = vec![self.term()?];
        while self.lookahead.1 == Token::Or {
            self.advance()?;
            terms.push(self.term()?);
        }
        if terms.len() == 1 {
            Ok(terms.pop().unwrap())
        } else {
            Ok(PolicyTree::Threshold { k: 1, children: terms })
        }
    }

    fn term(&mut self) -> Result<PolicyTree, ParseError> {
        let mut factors = vec![self.factor()?];
        while self.lookahead.1 == Token::And {
            self.advance()?;
            factors.push(self.factor()?);
        }
        if factors.len() == 1 {
            Ok(factors.pop().unwrap())
        } else {
            Ok(PolicyTree::Threshold {
                k: factors.len() as u32,
                children: factors,
            })
        }
    }

    fn factor(&mut self) -> Result<PolicyTree, ParseError> {
        let (pos, tok) = self.advance()?;
        match tok {
            Token::Ident(name) => Ok(PolicyTree::Leaf(self.resolve(pos, &name)?)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(inner)
            }
            Token::Int(k) => self.threshold_clause(pos, k),
            Token::Not => Err(ParseError::NegationUnsupported { pos }),
            other => Err(ParseError::Syntax {
                pos,
                expected: "identifier, '(' or threshold clause",
                found: other.describe(),
            }),
        }
    }

    fn threshold_clause(&mut self, k_pos: usize, k: u64) -> Result<PolicyTree, ParseError> {
        self.expect(Token::Of, "'of'")?;
        self.expect(Token::LBrace, "'{'")?;
        let mut members = Vec::new();
        loop {
            let (pos, tok) = self.advance()?;
            match tok {
                Token::Ident(name) => members.push(PolicyTree::Leaf(self.resolve(pos, &name)?)),
                Token::Not => return Err(ParseError::NegationUnsupported { pos }),
                other => {
                    return Err(ParseError::Syntax {
                        pos,
                        expected: "attribute name",
                        found: other.describe(),
                    })
                }
            }
            let (pos, tok) = self.advance()?;
            match tok {
                Token::Comma => continue,
                Token::RBrace => break,
                other => {
                    return Err(ParseError::Syntax {
                        pos,
                        expected: "',' or '}'",
                        found: other.describe(),
                    })
                }
            }
        }
        if k == 0 || k > members.len() as u64 {
            return Err(ParseError::BadThreshold {
                pos: k_pos,
                k,
                n: members.len(),
            });
        }
        Ok(PolicyTree::Threshold {
            k: k as u32,
            children: members,
        })
    }
}

/// Parses the surface syntax, resolving attribute names through `names`.
pub fn parse_policy(
    text: &str,
    names: &BTreeMap<String, AttributeId>,
) -> Result<PolicyTree, ParseError> {
    let mut parser = Parser::new(text, names)?;
    let tree = parser.expr()?;
    let (pos, tok) = parser.advance()?;
    if tok != Token::End {
        return Err(ParseError::Syntax {
            pos,
            expected: "end of input",
            found: tok.describe(),
        });
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn names(list: &[&str]) -> BTreeMap<String, AttributeId> {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        list.iter()
            .map(|n| (n.to_string(), AttributeId::random(&mut rng)))
            .collect()
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let map = names(&["a", "b", "c"]);
        let tree = parse_policy("a OR b AND c", &map).unwrap();
        match tree {
            PolicyTree::Threshold { k: 1, children } => {
                assert!(matches!(children[0], PolicyTree::Leaf(_)));
                assert!(matches!(children[1], PolicyTree::Threshold { k: 2, .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_attribute_reported_with_position() {
        let map = names(&["a"]);
        let err = parse_policy("a OR mystery", &map).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownAttribute {
                pos: 5,
                name: "mystery".into()
            }
        );
    }

    #[test]
    fn syntax_error_carries_position_and_expectation() {
        let map = names(&["a", "b"]);
        let err = parse_policy("a AND", &map).unwrap_err();
        assert!(matches!(
            err,
            ParseError::Syntax { pos: 5, expected: "identifier, '(' or threshold clause", .. }
        ));
        let err = parse_policy("(a OR b", &map).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { expected: "')'", .. }));
        let err = parse_policy("a b", &map).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { expected: "end of input", .. }));
    }

    #[test]
    fn negation_rejected() {
        let map = names(&["a"]);
        assert!(matches!(
            parse_policy("NOT a", &map),
            Err(ParseError::NegationUnsupported { pos: 0 })
        ));
        assert!(matches!(
            parse_policy("a AND NOT a", &map),
            Err(ParseError::NegationUnsupported { .. })
        ));
    }

    #[test]
    fn zero_threshold_rejected() {
        let map = names(&["a", "b"]);
        assert!(matches!(
            parse_policy("0 of {a, b}", &map),
            Err(ParseError::BadThreshold { k: 0, .. })
        ));
    }

    #[test]
    fn hyphenated_names_accepted() {
        let map = names(&["co-worker", "friend"]);
        let tree = parse_policy("co-worker AND friend", &map).unwrap();
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn whitespace_is_flexible() {
        let map = names(&["a", "b", "c"]);
        let t1 = parse_policy("2 of {a,b,c}", &map).unwrap();
        let t2 = parse_policy("  2   of   { a , b , c } ", &map).unwrap();
        assert_eq!(t1, t2);
    }
}
