//! Recursive-descent parser for the formula text format.
//!
//! Precedence from loosest to tightest: quantifiers (body extends as far right
//! as possible), `<->` (left), `->` (right), `or`, `and`, `not`, atoms.

use super::{is_set_name, Formula, FormulaError, LinearConstraint, Mso, Rho};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Param(String),
    Int(i64),
    Exists,
    Forall,
    In,
    Adj,
    True,
    False,
    And,
    Or,
    Not,
    Arrow,
    DoubleArrow,
    Eq,
    Neq,
    Le,
    Lt,
    Ge,
    Gt,
    Plus,
    Minus,
    Dot,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Pipe,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Param(s) => format!("parameter `${s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::End => "end of input".into(),
            other => format!("`{}`", symbol(other)),
        }
    }
}

fn symbol(t: &Tok) -> &'static str {
    match t {
        Tok::Exists => "exists",
        Tok::Forall => "forall",
        Tok::In => "in",
        Tok::Adj => "adj",
        Tok::True => "true",
        Tok::False => "false",
        Tok::And => "and",
        Tok::Or => "or",
        Tok::Not => "not",
        Tok::Arrow => "->",
        Tok::DoubleArrow => "<->",
        Tok::Eq => "=",
        Tok::Neq => "!=",
        Tok::Le => "<=",
        Tok::Lt => "<",
        Tok::Ge => ">=",
        Tok::Gt => ">",
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Dot => ".",
        Tok::Comma => ",",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBracket => "[",
        Tok::RBracket => "]",
        Tok::Pipe => "|",
        _ => "?",
    }
}

struct Lexed {
    toks: Vec<(Tok, usize)>,
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn syntax(text: &str, offset: usize, message: impl Into<String>) -> FormulaError {
    let (line, column) = position(text, offset);
    FormulaError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Lexed, FormulaError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let ident_end = |mut j: usize| {
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            j
        };
        let tok = if c.is_ascii_alphabetic() {
            i = ident_end(i);
            match &text[start..i] {
                "exists" => Tok::Exists,
                "forall" => Tok::Forall,
                "in" => Tok::In,
                "adj" => Tok::Adj,
                "true" => Tok::True,
                "false" => Tok::False,
                "and" => Tok::And,
                "or" => Tok::Or,
                "not" => Tok::Not,
                word => Tok::Ident(word.to_string()),
            }
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = text[start..i]
                .parse::<i64>()
                .map_err(|_| syntax(text, start, "integer literal out of range"))?;
            Tok::Int(n)
        } else if c == b'$' {
            i = ident_end(i + 1);
            if i == start + 1 {
                return Err(syntax(text, start, "expected a parameter name after `$`"));
            }
            Tok::Param(text[start + 1..i].to_string())
        } else {
            let two = text.get(i..i + 2).unwrap_or("");
            let three = text.get(i..i + 3).unwrap_or("");
            let (tok, len) = if three == "<->" {
                (Tok::DoubleArrow, 3)
            } else if two == "->" {
                (Tok::Arrow, 2)
            } else if two == "<=" {
                (Tok::Le, 2)
            } else if two == ">=" {
                (Tok::Ge, 2)
            } else if two == "!=" {
                (Tok::Neq, 2)
            } else {
                let t = match c {
                    b'&' => Tok::And,
                    b'!' => Tok::Not,
                    b'=' => Tok::Eq,
                    b'<' => Tok::Lt,
                    b'>' => Tok::Gt,
                    b'+' => Tok::Plus,
                    b'-' => Tok::Minus,
                    b'.' | b':' => Tok::Dot,
                    b',' => Tok::Comma,
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b'[' => Tok::LBracket,
                    b']' => Tok::RBracket,
                    b'|' => Tok::Pipe,
                    _ => {
                        let ch = text[i..].chars().next().unwrap();
                        return Err(syntax(text, i, format!("unexpected character `{ch}`")));
                    }
                };
                (t, 1)
            };
            i += len;
            tok
        };
        toks.push((tok, start));
    }
    toks.push((Tok::End, text.len()));
    Ok(Lexed { toks })
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    constraints: Vec<LinearConstraint>,
}

enum Rel {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, FormulaError> {
        Err(syntax(self.text, self.offset(), message))
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, FormulaError> {
        self.error(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, t: Tok) -> Result<(), FormulaError> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.unexpected(&format!("`{}`", symbol(&t)))
        }
    }

    fn ident(&mut self) -> Result<String, FormulaError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected("a variable name"),
        }
    }

    fn vertex_ident(&mut self) -> Result<String, FormulaError> {
        let at = self.offset();
        let name = self.ident()?;
        if is_set_name(&name) {
            return Err(syntax(self.text, at, format!("`{name}` is a set variable; a vertex variable is required")));
        }
        Ok(name)
    }

    fn set_ident(&mut self) -> Result<String, FormulaError> {
        let at = self.offset();
        let name = self.ident()?;
        if !is_set_name(&name) {
            return Err(syntax(self.text, at, format!("`{name}` is a vertex variable; a set variable is required")));
        }
        Ok(name)
    }

    fn iff(&mut self) -> Result<Mso, FormulaError> {
        let mut lhs = self.implication()?;
        while self.eat(&Tok::DoubleArrow) {
            let rhs = self.implication()?;
            lhs = Mso::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> Result<Mso, FormulaError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.implication()?;
            return Ok(Mso::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Mso, FormulaError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) || self.eat(&Tok::Pipe) {
            let rhs = self.conjunction()?;
            lhs = Mso::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Mso, FormulaError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::And) {
            let rhs = self.unary()?;
            lhs = Mso::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Mso, FormulaError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Mso::not(self.unary()?))
            }
            Tok::Exists | Tok::Forall => self.quantifier(),
            _ => self.atom(),
        }
    }

    fn quantifier(&mut self) -> Result<Mso, FormulaError> {
        let existential = self.bump() == Tok::Exists;
        let mut vars = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            vars.push(self.ident()?);
        }
        let mut guard = None;
        if self.eat(&Tok::In) {
            if let Some(v) = vars.iter().find(|v| is_set_name(v)) {
                return self.error(format!("`{v} in ...` needs a vertex variable"));
            }
            guard = Some(self.set_ident()?);
        }
        self.expect(Tok::Dot)?;
        let mut body = self.iff()?;
        for v in vars.into_iter().rev() {
            if let Some(set) = &guard {
                let member = Mso::member(v.clone(), set.clone());
                body = if existential {
                    Mso::and(member, body)
                } else {
                    Mso::implies(member, body)
                };
            }
            body = if existential {
                Mso::exists(v, body)
            } else {
                Mso::forall(v, body)
            };
        }
        Ok(body)
    }

    fn atom(&mut self) -> Result<Mso, FormulaError> {
        match self.peek().clone() {
            Tok::True => {
                self.bump();
                Ok(Mso::True)
            }
            Tok::False => {
                self.bump();
                Ok(Mso::False)
            }
            Tok::LParen => {
                self.bump();
                let inner = self.iff()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Adj => {
                self.bump();
                self.expect(Tok::LParen)?;
                let u = self.vertex_ident()?;
                self.expect(Tok::Comma)?;
                let v = self.vertex_ident()?;
                self.expect(Tok::RParen)?;
                Ok(Mso::Adj(u, v))
            }
            Tok::LBracket => {
                self.bump();
                self.constraint()
            }
            Tok::Ident(name) => {
                let at = self.offset();
                self.bump();
                match self.peek().clone() {
                    Tok::In => {
                        self.bump();
                        if is_set_name(&name) {
                            return Err(syntax(self.text, at, format!("`{name}` is a set variable; a vertex variable is required")));
                        }
                        let set = self.set_ident()?;
                        Ok(Mso::member(name, set))
                    }
                    t @ (Tok::Eq | Tok::Neq) => {
                        self.bump();
                        let other_at = self.offset();
                        let other = self.ident()?;
                        if is_set_name(&name) != is_set_name(&other) {
                            return Err(syntax(self.text, other_at, "cannot compare a vertex variable with a set variable"));
                        }
                        let eq = if is_set_name(&name) {
                            Mso::SetEq(name, other)
                        } else {
                            Mso::VertexEq(name, other)
                        };
                        Ok(if t == Tok::Neq { Mso::not(eq) } else { eq })
                    }
                    _ => self.unexpected("`in`, `=` or `!=`"),
                }
            }
            _ => self.unexpected("a formula"),
        }
    }

    fn constraint(&mut self) -> Result<Mso, FormulaError> {
        let lhs = self.rho()?;
        let rel = match self.peek() {
            Tok::Le => Rel::Le,
            Tok::Lt => Rel::Lt,
            Tok::Eq => Rel::Eq,
            Tok::Ge => Rel::Ge,
            Tok::Gt => Rel::Gt,
            _ => return self.unexpected("a relation (`<=`, `<`, `=`, `>=`, `>`)"),
        };
        self.bump();
        let rhs = self.rho()?;
        self.expect(Tok::RBracket)?;
        let (a, b) = match rel {
            Rel::Le | Rel::Lt | Rel::Eq => (lhs, rhs),
            Rel::Ge | Rel::Gt => (rhs, lhs),
        };
        Ok(match rel {
            Rel::Le | Rel::Ge => self.leaf(a, b),
            Rel::Eq => {
                let first = self.leaf(a.clone(), b.clone());
                Mso::and(first, self.leaf(b, a))
            }
            Rel::Lt | Rel::Gt => {
                let first = self.leaf(a.clone(), b.clone());
                Mso::and(first, Mso::not(self.leaf(b, a)))
            }
        })
    }

    fn leaf(&mut self, lhs: Rho, rhs: Rho) -> Mso {
        self.constraints.push(LinearConstraint { lhs, rhs });
        Mso::Constraint(self.constraints.len() - 1)
    }

    fn rho(&mut self) -> Result<Rho, FormulaError> {
        let mut acc = self.term()?;
        while self.eat(&Tok::Plus) {
            acc = acc.plus(self.term()?);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Rho, FormulaError> {
        let term = match self.peek().clone() {
            Tok::Int(n) => Rho::constant(n),
            Tok::Minus => {
                self.bump();
                match self.peek() {
                    Tok::Int(n) => Rho::constant(-n),
                    _ => return self.unexpected("an integer after `-`"),
                }
            }
            Tok::Param(p) => Rho {
                params: vec![p],
                ..Rho::default()
            },
            Tok::Pipe => {
                self.bump();
                let set = self.set_ident()?;
                if *self.peek() != Tok::Pipe {
                    return self.unexpected("`|`");
                }
                Rho::card(set)
            }
            _ => return self.unexpected("an integer, `$param` or `|X|`"),
        };
        self.bump();
        Ok(term)
    }
}

/// Parses a cardMSO sentence and establishes its prefix normal form.
pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let Lexed { toks } = lex(text)?;
    let mut p = Parser {
        text,
        toks,
        pos: 0,
        constraints: Vec::new(),
    };
    let body = p.iff()?;
    if *p.peek() != Tok::End {
        return p.unexpected("end of input");
    }
    let constraints = p.constraints;
    check_scopes(&body, &constraints, &mut Vec::new())?;

    let mut block = Vec::new();
    let mut rest = body;
    while let Mso::Exists(v, inner) = rest {
        if !is_set_name(&v) {
            rest = Mso::Exists(v, inner);
            break;
        }
        block.push(v);
        rest = *inner;
    }
    let in_constraints = |v: &String| {
        constraints
            .iter()
            .any(|c| c.lhs.cards.contains(v) || c.rhs.cards.contains(v))
    };
    let (prefix, pushed): (Vec<String>, Vec<String>) = block.into_iter().partition(in_constraints);
    for c in &constraints {
        for v in c.lhs.cards.iter().chain(&c.rhs.cards) {
            if !prefix.contains(v) {
                return Err(FormulaError::NonPrefixInConstraint(v.clone()));
            }
        }
    }
    let body = pushed
        .into_iter()
        .rev()
        .fold(rest, |acc, v| Mso::exists(v, acc));
    Ok(Formula {
        prefix,
        body,
        constraints,
    })
}

fn check_scopes(
    f: &Mso,
    constraints: &[LinearConstraint],
    scope: &mut Vec<String>,
) -> Result<(), FormulaError> {
    let bound = |v: &String, scope: &Vec<String>| {
        if scope.contains(v) {
            Ok(())
        } else {
            Err(FormulaError::Unbound(v.clone()))
        }
    };
    match f {
        Mso::True | Mso::False => Ok(()),
        Mso::Member { vertex, set } => {
            bound(vertex, scope)?;
            bound(set, scope)
        }
        Mso::Adj(a, b) | Mso::VertexEq(a, b) | Mso::SetEq(a, b) => {
            bound(a, scope)?;
            bound(b, scope)
        }
        Mso::Constraint(i) => {
            let c = &constraints[*i];
            c.lhs.cards.iter().chain(&c.rhs.cards).try_for_each(|v| bound(v, scope))
        }
        Mso::Not(a) => check_scopes(a, constraints, scope),
        Mso::And(a, b) | Mso::Or(a, b) | Mso::Implies(a, b) | Mso::Iff(a, b) => {
            check_scopes(a, constraints, scope)?;
            check_scopes(b, constraints, scope)
        }
        Mso::Exists(v, a) | Mso::Forall(v, a) => {
            if scope.contains(v) {
                return Err(FormulaError::Shadowed(v.clone()));
            }
            scope.push(v.clone());
            let r = check_scopes(a, constraints, scope);
            scope.pop();
            r
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let f = parse_formula("forall x. true or false and not true -> false <-> true").unwrap();
        let expected = Mso::forall(
            "x",
            Mso::iff(
                Mso::implies(
                    Mso::or(Mso::True, Mso::and(Mso::False, Mso::not(Mso::True))),
                    Mso::False,
                ),
                Mso::True,
            ),
        );
        assert_eq!(f.body, expected);
        let right = parse_formula("true -> false -> true").unwrap();
        assert_eq!(
            right.body,
            Mso::implies(Mso::True, Mso::implies(Mso::False, Mso::True))
        );
    }

    #[test]
    fn symbolic_connectives_and_comments() {
        let a = parse_formula("# comment\nforall x: !(x in X) | x = x & true").err();
        assert_eq!(a, Some(FormulaError::Unbound("X".into())));
        let b = parse_formula("exists X. forall x: !(x in X) | x = x & true # trailing\n").unwrap();
        let c = parse_formula("exists X. forall x. not x in X or (x = x and true)").unwrap();
        assert_eq!(b, c);
    }

    #[test]
    fn guarded_sugar() {
        let f = parse_formula("exists X. forall a, b in X. not adj(a, b)").unwrap();
        let expected = Mso::exists(
            "X",
            Mso::forall(
                "a",
                Mso::implies(
                    Mso::member("a", "X"),
                    Mso::forall("b", Mso::implies(Mso::member("b", "X"), Mso::not(Mso::adj("a", "b")))),
                ),
            ),
        );
        assert!(f.prefix.is_empty());
        assert_eq!(f.body, expected);
    }

    #[test]
    fn desugaring() {
        let f = parse_formula("exists A, B. [|A| < |B|] and [|A| > 2] and [|B| >= $k]").unwrap();
        assert_eq!(f.prefix, vec!["A".to_string(), "B".to_string()]);
        assert_eq!(f.constraints.len(), 5);
        assert_eq!(f.constraints[2].lhs, Rho::constant(2));
        assert_eq!(f.constraints[2].rhs, Rho::card("A"));
        assert_eq!(f.constraints[4].lhs.params, vec!["k".to_string()]);
        assert_eq!(
            f.body,
            Mso::and(
                Mso::and(
                    Mso::and(Mso::Constraint(0), Mso::not(Mso::Constraint(1))),
                    Mso::and(Mso::Constraint(2), Mso::not(Mso::Constraint(3))),
                ),
                Mso::Constraint(4),
            )
        );
    }

    #[test]
    fn prefix_keeps_only_constraint_variables() {
        let f = parse_formula("exists A, T, B. [|A| = |B|] and (forall x. x in T)").unwrap();
        assert_eq!(f.prefix, vec!["A".to_string(), "B".to_string()]);
        assert!(matches!(&f.body, Mso::Exists(t, _) if t == "T"));
    }

    #[test]
    fn scope_errors() {
        assert_eq!(
            parse_formula("exists X. forall v. exists Y. [|Y| <= |X|]"),
            Err(FormulaError::NonPrefixInConstraint("Y".into()))
        );
        assert_eq!(
            parse_formula("(exists Y. true) and [|Y| <= 1]"),
            Err(FormulaError::Unbound("Y".into()))
        );
        assert_eq!(
            parse_formula("forall x. exists x. true"),
            Err(FormulaError::Shadowed("x".into()))
        );
        assert_eq!(parse_formula("adj(x, y)"), Err(FormulaError::Unbound("x".into())));
        // Sibling scopes may reuse a name.
        assert!(parse_formula("(forall x. true) and (exists x. true)").is_ok());
    }

    #[test]
    fn syntax_errors_have_positions() {
        match parse_formula("forall x.\n  x in") {
            Err(FormulaError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 7)),
            other => panic!("unexpected {other:?}"),
        }
        match parse_formula("exists X. [|X| ~ 1]") {
            Err(FormulaError::Syntax { line, column, .. }) => assert_eq!((line, column), (1, 16)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_formula("x in"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_formula("exists X. X in X"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_formula("forall x. x = Y"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_formula("true true"), Err(FormulaError::Syntax { .. })));
        assert!(matches!(parse_formula(""), Err(FormulaError::Syntax { .. })));
    }

    #[test]
    fn negative_literals() {
        let f = parse_formula("exists Z. [|Z| + -2 <= -1]").unwrap();
        assert_eq!(f.constraints[0].lhs.constant, -2);
        assert_eq!(f.constraints[0].rhs.constant, -1);
    }
}
