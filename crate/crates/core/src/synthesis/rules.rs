// SPDX-License-Identifier: Apache-2.0
//! Rewrite rule library.
//!
//! Algebraic rules are `lhs -> rhs` template pairs over at most five
//! variables. Resynthesis rules map a 3-input function (an 8-bit truth table)
//! to every minimum-size majority implementation of it; the database is built
//! once by exhaustive enumeration.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::logic::maj;

/// Expression over rule variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Template {
    Var(u8),
    Const(bool),
    Not(Box<Template>),
    Maj(Box<[Template; 3]>),
}

impl Template {
    pub fn var(i: u8) -> Self {
        Template::Var(i)
    }

    pub fn maj(a: Template, b: Template, c: Template) -> Self {
        Template::Maj(Box::new([a, b, c]))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(t: Template) -> Self {
        match t {
            Template::Not(inner) => *inner,
            Template::Const(b) => Template::Const(!b),
            t => Template::Not(Box::new(t)),
        }
    }

    /// Evaluates with variable `i` bound to `vars[i]` (bit-parallel).
    pub fn eval(&self, vars: &[u64]) -> u64 {
        match self {
            Template::Var(i) => vars[*i as usize],
            Template::Const(false) => 0,
            Template::Const(true) => !0,
            Template::Not(t) => !t.eval(vars),
            Template::Maj(c) => maj(c[0].eval(vars), c[1].eval(vars), c[2].eval(vars)),
        }
    }

    pub fn max_var(&self) -> Option<u8> {
        match self {
            Template::Var(i) => Some(*i),
            Template::Const(_) => None,
            Template::Not(t) => t.max_var(),
            Template::Maj(c) => c.iter().filter_map(Template::max_var).max(),
        }
    }

    /// Number of distinct majority subterms, i.e. nodes after sharing.
    pub fn maj_count(&self) -> usize {
        fn walk(t: &Template, seen: &mut HashSet<String>) {
            match t {
                Template::Maj(c) => {
                    if seen.insert(t.canonical()) {
                        c.iter().for_each(|t| walk(t, seen));
                    }
                }
                Template::Not(t) => walk(t, seen),
                _ => {}
            }
        }
        let mut seen = HashSet::new();
        walk(self, &mut seen);
        seen.len()
    }

    fn canonical(&self) -> String {
        match self {
            Template::Var(i) => format!("x{i}"),
            Template::Const(b) => format!("{}", *b as u8),
            Template::Not(t) => format!("~{}", t.canonical()),
            Template::Maj(c) => {
                let mut parts: Vec<String> = c.iter().map(Template::canonical).collect();
                parts.sort();
                format!("M({})", parts.join(","))
            }
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Template::Var(i) => write!(
                f,
                "{}",
                ["x", "y", "z", "u", "v"].get(*i as usize).unwrap_or(&"w")
            ),
            Template::Const(b) => write!(f, "{}", *b as u8),
            Template::Not(t) => write!(f, "~{t}"),
            Template::Maj(c) => write!(f, "M({}, {}, {})", c[0], c[1], c[2]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleForm {
    /// `lhs` rewritten to `rhs`; both sides must agree on every assignment.
    Algebraic { lhs: Template, rhs: Template },
    /// Any cone computing `function` over three leaves becomes one of
    /// `implementations`.
    Resynthesis {
        function: u8,
        implementations: Vec<Template>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub name: String,
    pub form: RuleForm,
    /// Whether the search engine tries the rule at every node. Rules that the
    /// structural-hashing builder applies on construction are not searched.
    pub searched: bool,
}

impl RewriteRule {
    fn algebraic(name: &str, lhs: Template, rhs: Template, searched: bool) -> Self {
        Self {
            name: name.to_string(),
            form: RuleForm::Algebraic { lhs, rhs },
            searched,
        }
    }

    /// Exhaustive truth-table check over the rule's local variables.
    pub fn verify(&self) -> bool {
        const VARS: [u64; 5] = [
            0xAAAA_AAAA,
            0xCCCC_CCCC,
            0xF0F0_F0F0,
            0xFF00_FF00,
            0xFFFF_0000,
        ];
        match &self.form {
            RuleForm::Algebraic { lhs, rhs } => {
                let vars = lhs
                    .max_var()
                    .max(rhs.max_var())
                    .map_or(0, |v| v as usize + 1);
                if vars > VARS.len() {
                    return false;
                }
                let mask = 0xFFFF_FFFFu64;
                lhs.eval(&VARS) & mask == rhs.eval(&VARS) & mask
            }
            RuleForm::Resynthesis {
                function,
                implementations,
            } => implementations.iter().all(|t| {
                t.max_var().is_none_or(|v| v < 3) && (t.eval(&VARS) & 0xFF) as u8 == *function
            }),
        }
    }
}

/// Outcome of checking one rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleCheck {
    pub name: String,
    pub passed: bool,
}

pub fn verify_rule_set(rules: &[RewriteRule]) -> Result<Vec<RuleCheck>> {
    let mut out = Vec::with_capacity(rules.len());
    for r in rules {
        if !r.verify() {
            return Err(Error::UnsoundRule(r.name.clone()));
        }
        out.push(RuleCheck {
            name: r.name.clone(),
            passed: true,
        });
    }
    Ok(out)
}

fn v(i: u8) -> Template {
    Template::var(i)
}

fn m(a: Template, b: Template, c: Template) -> Template {
    Template::maj(a, b, c)
}

fn n(t: Template) -> Template {
    Template::not(t)
}

pub fn algebraic_rules() -> Vec<RewriteRule> {
    let (x, y, z, u, w) = (v(0), v(1), v(2), v(3), v(4));
    vec![
        RewriteRule::algebraic(
            "commutativity",
            m(x.clone(), y.clone(), z.clone()),
            m(y.clone(), x.clone(), z.clone()),
            false,
        ),
        RewriteRule::algebraic(
            "majority",
            m(x.clone(), x.clone(), y.clone()),
            x.clone(),
            false,
        ),
        RewriteRule::algebraic(
            "complementary_majority",
            m(x.clone(), n(x.clone()), y.clone()),
            y.clone(),
            false,
        ),
        RewriteRule::algebraic(
            "inverter_propagation",
            n(m(x.clone(), y.clone(), z.clone())),
            m(n(x.clone()), n(y.clone()), n(z.clone())),
            false,
        ),
        RewriteRule::algebraic(
            "associativity",
            m(x.clone(), u.clone(), m(y.clone(), u.clone(), z.clone())),
            m(z.clone(), u.clone(), m(y.clone(), u.clone(), x.clone())),
            true,
        ),
        RewriteRule::algebraic(
            "complementary_associativity",
            m(x.clone(), u.clone(), m(y.clone(), n(u.clone()), z.clone())),
            m(x.clone(), u.clone(), m(y.clone(), x.clone(), z.clone())),
            true,
        ),
        RewriteRule::algebraic(
            "distributivity_factor",
            m(
                m(x.clone(), y.clone(), u.clone()),
                m(x.clone(), y.clone(), w.clone()),
                z.clone(),
            ),
            m(x.clone(), y.clone(), m(u.clone(), w.clone(), z.clone())),
            true,
        ),
        RewriteRule::algebraic(
            "distributivity_expand",
            m(x.clone(), y.clone(), m(u.clone(), w.clone(), z.clone())),
            m(
                m(x.clone(), y.clone(), u.clone()),
                m(x.clone(), y.clone(), w),
                z,
            ),
            true,
        ),
    ]
}

/// Largest number of implementations kept per function.
const MAX_IMPLEMENTATIONS: usize = 48;

struct Enumerator {
    best: BTreeMap<u8, (usize, Vec<Template>, HashSet<String>)>,
}

impl Enumerator {
    fn wants(&self, f: u8, size: usize) -> bool {
        match self.best.get(&f) {
            None => true,
            Some((best, impls, _)) => {
                size < *best || (size == *best && impls.len() < MAX_IMPLEMENTATIONS)
            }
        }
    }

    fn record(&mut self, f: u8, size: usize, t: Template) {
        let entry = self
            .best
            .entry(f)
            .or_insert_with(|| (size, Vec::new(), HashSet::new()));
        if size < entry.0 {
            *entry = (size, Vec::new(), HashSet::new());
        }
        if size == entry.0 && entry.1.len() < MAX_IMPLEMENTATIONS && entry.2.insert(t.canonical()) {
            entry.1.push(t);
        }
    }

    /// Depth-first enumeration of straight-line majority programs.
    fn extend(&mut self, lits: &mut Vec<(u8, Template)>, depth: usize, max_depth: usize) {
        let len = lits.len();
        for i in 0..len {
            for j in i + 1..len {
                for k in j + 1..len {
                    let f = maj(lits[i].0 as u64, lits[j].0 as u64, lits[k].0 as u64) as u8;
                    if lits.iter().any(|(g, _)| *g == f) {
                        continue;
                    }
                    let t = Template::maj(lits[i].1.clone(), lits[j].1.clone(), lits[k].1.clone());
                    // only programs whose last node uses every earlier node count
                    if self.wants(f, depth + 1) && t.maj_count() == depth + 1 {
                        self.record(f, depth + 1, t.clone());
                    }
                    if depth + 1 < max_depth {
                        lits.push((f, t.clone()));
                        lits.push((!f, Template::not(t)));
                        self.extend(lits, depth + 1, max_depth);
                        lits.truncate(len);
                    }
                }
            }
        }
    }
}

fn build_database() -> Vec<RewriteRule> {
    let mut e = Enumerator {
        best: BTreeMap::new(),
    };
    let mut lits: Vec<(u8, Template)> = vec![
        (0x00, Template::Const(false)),
        (0xFF, Template::Const(true)),
    ];
    for (i, f) in [0xAAu8, 0xCC, 0xF0].into_iter().enumerate() {
        lits.push((f, Template::var(i as u8)));
        lits.push((!f, Template::not(Template::var(i as u8))));
    }
    for (f, t) in lits.clone() {
        e.record(f, 0, t);
    }
    e.extend(&mut lits, 0, 3);
    e.best
        .into_iter()
        .map(|(f, (_, impls, _))| RewriteRule {
            name: format!("resynthesis_{f:02x}"),
            form: RuleForm::Resynthesis {
                function: f,
                implementations: impls,
            },
            searched: true,
        })
        .collect()
}

/// Resynthesis rules indexed by function; `None` when no implementation with
/// at most three nodes exists.
pub fn resynthesis_table() -> &'static [Option<RewriteRule>; 256] {
    static TABLE: OnceLock<Box<[Option<RewriteRule>; 256]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table: Box<[Option<RewriteRule>; 256]> = Box::new(std::array::from_fn(|_| None));
        for rule in build_database() {
            if let RuleForm::Resynthesis { function, .. } = rule.form {
                table[function as usize] = Some(rule);
            }
        }
        table
    })
}

/// The complete library: algebraic rules followed by the resynthesis rules.
pub fn rule_library() -> Vec<RewriteRule> {
    let mut rules = algebraic_rules();
    rules.extend(resynthesis_table().iter().flatten().cloned());
    rules
}
