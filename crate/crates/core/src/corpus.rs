//! Formula generators and the shipped `.cms` corpus.

use crate::formula::Formula;

pub use crate::balanced::part_names;

pub const SHIPPED: [(&str, &str); 6] = [
    ("bipartite_equal", include_str!("../corpus/bipartite_equal.cms")),
    ("equitable_coloring_3", include_str!("../corpus/equitable_coloring_3.cms")),
    ("equitable_connected_3", include_str!("../corpus/equitable_connected_3.cms")),
    ("ids_k", include_str!("../corpus/ids_k.cms")),
    ("independence", include_str!("../corpus/independence.cms")),
    ("clique", include_str!("../corpus/clique.cms")),
];

pub fn shipped(name: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Parses a shipped formula; panics on a corpus that does not parse.
pub fn shipped_formula(name: &str) -> Option<Formula> {
    shipped(name).map(|text| Formula::parse(text).expect("shipped corpus parses"))
}

pub fn bipartite_equal() -> String {
    "exists X1, X2.\n  (forall v. (v in X1 <-> not v in X2))\n  and [|X1| = |X2|]\n  \
     and (forall u, v. adj(u, v) -> ((u in X1 and v in X2) or (u in X2 and v in X1)))\n"
        .to_string()
}

pub fn independence() -> String {
    "forall u, v. not adj(u, v)\n".to_string()
}

pub fn clique() -> String {
    "forall u, v. u = v or adj(u, v)\n".to_string()
}

/// Independent dominating set of size `$k`.
pub fn ids() -> String {
    "exists X.\n  (forall a, b in X. not adj(a, b))\n  \
     and (forall b. b in X or (exists a in X. adj(a, b)))\n  and [|X| = $k]\n"
        .to_string()
}

/// Every vertex in exactly one of `names`.
pub fn exactly_one(names: &[String]) -> String {
    let memberships: Vec<String> = names.iter().map(|n| format!("x in {n}")).collect();
    let mut clauses = vec![format!("({})", memberships.join(" or "))];
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            clauses.push(format!("not (x in {} and x in {})", names[i], names[j]));
        }
    }
    format!("(forall x. {})", clauses.join(" and "))
}

/// `|T|` and `|U|` differ by at most one.
pub fn equi(t: &str, u: &str) -> String {
    format!("([|{t}| = |{u}| + 1] or [|{t}| + 1 = |{u}|] or [|{t}| = |{u}|])")
}

fn equi_all(names: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            out.push(equi(&names[i], &names[j]));
        }
    }
    out
}

/// `U` induces a connected subgraph.
pub fn conn(u: &str) -> String {
    format!(
        "(forall T. (forall x. x in T -> x in {u}) -> \
         (T = {u} or not (exists a. a in T) or \
         (exists a, b. a in {u} and not a in T and b in T and adj(a, b))))"
    )
}

fn sentence(names: &[String], clauses: Vec<String>) -> String {
    format!("exists {}.\n  {}\n", names.join(", "), clauses.join("\n  and "))
}

/// Equitable partition into `c` parts, optionally with every part non-empty.
pub fn equitable_partition(c: usize, no_empty_parts: bool) -> String {
    assert!(c >= 1, "c must be positive");
    let names = part_names(c);
    let mut clauses = vec![exactly_one(&names)];
    clauses.extend(equi_all(&names));
    if no_empty_parts {
        clauses.extend(names.iter().map(|n| format!("[1 <= |{n}|]")));
    }
    sentence(&names, clauses)
}

pub fn equitable_coloring(c: usize) -> String {
    let names = part_names(c);
    let same: Vec<String> = names.iter().map(|n| format!("(x in {n} and y in {n})")).collect();
    let mut clauses = vec![
        exactly_one(&names),
        format!("(forall x, y. ({}) -> not adj(x, y))", same.join(" or ")),
    ];
    clauses.extend(equi_all(&names));
    sentence(&names, clauses)
}

pub fn equitable_connected(c: usize) -> String {
    let names = part_names(c);
    let mut clauses = vec![exactly_one(&names)];
    clauses.extend(names.iter().map(|n| conn(n)));
    clauses.extend(equi_all(&names));
    sentence(&names, clauses)
}

/// Generator output for each shipped name.
pub fn generate(name: &str) -> Option<String> {
    Some(match name {
        "bipartite_equal" => bipartite_equal(),
        "equitable_coloring_3" => equitable_coloring(3),
        "equitable_connected_3" => equitable_connected(3),
        "ids_k" => ids(),
        "independence" => independence(),
        "clique" => clique(),
        _ => return None,
    })
}
