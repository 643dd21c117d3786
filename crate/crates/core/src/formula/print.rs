//! Canonical printer. Every compound subformula except the root is wrapped in
//! parentheses, so parsing the output reproduces the tree exactly.

use std::fmt::{self, Display, Formatter};

use super::{Formula, LinearConstraint, Mso, Rho};

impl Display for Rho {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<String> = self.cards.iter().map(|s| format!("|{s}|")).collect();
        terms.extend(self.params.iter().map(|p| format!("${p}")));
        if self.constant != 0 || terms.is_empty() {
            terms.push(self.constant.to_string());
        }
        f.write_str(&terms.join(" + "))
    }
}

impl Display for LinearConstraint {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "[{} <= {}]", self.lhs, self.rhs)
    }
}

struct Printer<'a> {
    constraints: &'a [LinearConstraint],
}

impl Printer<'_> {
    fn child(&self, out: &mut String, node: &Mso) {
        if node.is_compound() {
            out.push('(');
            self.node(out, node);
            out.push(')');
        } else {
            self.node(out, node);
        }
    }

    fn binary(&self, out: &mut String, a: &Mso, op: &str, b: &Mso) {
        self.child(out, a);
        out.push(' ');
        out.push_str(op);
        out.push(' ');
        self.child(out, b);
    }

    fn node(&self, out: &mut String, node: &Mso) {
        match node {
            Mso::True => out.push_str("true"),
            Mso::False => out.push_str("false"),
            Mso::Member { vertex, set } => out.push_str(&format!("{vertex} in {set}")),
            Mso::Adj(u, v) => out.push_str(&format!("adj({u}, {v})")),
            Mso::VertexEq(u, v) | Mso::SetEq(u, v) => out.push_str(&format!("{u} = {v}")),
            Mso::Constraint(i) => match self.constraints.get(*i) {
                Some(c) => out.push_str(&c.to_string()),
                None => out.push_str(&format!("[?{i}]")),
            },
            Mso::Not(a) => {
                out.push_str("not ");
                self.child(out, a);
            }
            Mso::And(a, b) => self.binary(out, a, "and", b),
            Mso::Or(a, b) => self.binary(out, a, "or", b),
            Mso::Implies(a, b) => self.binary(out, a, "->", b),
            Mso::Iff(a, b) => self.binary(out, a, "<->", b),
            Mso::Exists(v, a) | Mso::Forall(v, a) => {
                let q = if matches!(node, Mso::Exists(..)) { "exists" } else { "forall" };
                out.push_str(&format!("{q} {v}. "));
                self.child(out, a);
            }
        }
    }
}

impl Formula {
    /// Renders a body that may reference this formula's constraints.
    pub fn render(&self, body: &Mso) -> String {
        let mut out = String::new();
        Printer {
            constraints: &self.constraints,
        }
        .node(&mut out, body);
        out
    }
}

impl Display for Formula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let p = Printer {
            constraints: &self.constraints,
        };
        let mut out = String::new();
        if self.prefix.is_empty() {
            p.node(&mut out, &self.body);
        } else {
            out.push_str(&format!("exists {}. ", self.prefix.join(", ")));
            p.child(&mut out, &self.body);
        }
        f.write_str(&out)
    }
}

/// Renders a constraint-free tree.
impl Display for Mso {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        Printer { constraints: &[] }.node(&mut out, self);
        f.write_str(&out)
    }
}
