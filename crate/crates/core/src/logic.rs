//! Logic programs read off decision paths, their interval form, and
//! cross-neuron conflict detection.
//!
//! A predicate `x <= c` constrains its dimension to `(-inf, c]` and `x > c` to
//! `(c, +inf)`, matching tree routing exactly. A conjunction is feasible iff
//! every constrained dimension keeps `lo < hi`.
//!
//! Text form: `None`, `(conflict)`, or clauses `(name <= 0.33)` / `(name > 0.33)`
//! joined by ` ∧ `. Parsing also accepts `≤` and the ASCII joiner `&&`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{DecisionPath, PathId};

pub use crate::tree::{Op, Predicate};

/// Which tree and leaf a program was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramSource {
    /// Response column of the neuron in the dataset.
    pub neuron: usize,
    pub path: PathId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicProgram {
    /// Root-to-leaf order.
    pub predicates: Vec<Predicate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ProgramSource>,
}

impl LogicProgram {
    pub fn new(predicates: Vec<Predicate>) -> Self {
        LogicProgram {
            predicates,
            source: None,
        }
    }

    pub fn with_source(mut self, neuron: usize, path: PathId) -> Self {
        self.source = Some(ProgramSource { neuron, path });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn holds(&self, state: &[f64]) -> bool {
        self.predicates.iter().all(|p| p.holds(state))
    }

    /// Fraction of predicates satisfied by `state`; an empty program is vacuously 1.
    pub fn satisfied_fraction(&self, state: &[f64]) -> f64 {
        if self.predicates.is_empty() {
            return 1.0;
        }
        let hits = self.predicates.iter().filter(|p| p.holds(state)).count();
        hits as f64 / self.predicates.len() as f64
    }

    pub fn to_box(&self) -> IntervalBox {
        let mut b = IntervalBox::default();
        for p in &self.predicates {
            b.constrain(p);
        }
        b
    }

    /// Drops every predicate implied by a tighter one on the same dimension and
    /// in the same direction; the survivors keep their order. Exact duplicates
    /// keep their first occurrence.
    pub fn simplified(&self) -> LogicProgram {
        let implied = |i: usize, p: &Predicate| {
            self.predicates.iter().enumerate().any(|(j, q)| {
                q.feature == p.feature
                    && q.op == p.op
                    && match p.op {
                        Op::Le => q.threshold < p.threshold,
                        Op::Gt => q.threshold > p.threshold,
                    }
                    || (j < i && q == p)
            })
        };
        LogicProgram {
            predicates: self
                .predicates
                .iter()
                .enumerate()
                .filter(|&(i, p)| !implied(i, p))
                .map(|(_, p)| *p)
                .collect(),
            source: self.source,
        }
    }

    /// False when the program's own predicates cannot all hold.
    pub fn is_consistent(&self) -> bool {
        self.to_box().is_feasible()
    }
}

/// Half-open interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const FULL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn of(p: &Predicate) -> Self {
        match p.op {
            Op::Le => Interval {
                lo: f64::NEG_INFINITY,
                hi: p.threshold,
            },
            Op::Gt => Interval {
                lo: p.threshold,
                hi: f64::INFINITY,
            },
        }
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo < v && v <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}]", self.lo, self.hi)
    }
}

/// Per-dimension intervals; unconstrained dimensions are absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalBox {
    pub bounds: BTreeMap<usize, Interval>,
}

impl IntervalBox {
    pub fn constrain(&mut self, p: &Predicate) {
        let slot = self.bounds.entry(p.feature).or_insert(Interval::FULL);
        *slot = slot.intersect(&Interval::of(p));
    }

    pub fn get(&self, feature: usize) -> Interval {
        self.bounds.get(&feature).copied().unwrap_or(Interval::FULL)
    }

    pub fn is_feasible(&self) -> bool {
        self.bounds.values().all(|i| !i.is_empty())
    }

    pub fn contains(&self, state: &[f64]) -> bool {
        self.bounds.iter().all(|(&f, i)| i.contains(state[f]))
    }
}

/// An empty intersection on one dimension: `lower_from` supplied the binding
/// lower bound and `upper_from` the binding upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub feature: usize,
    pub lower_from: usize,
    pub upper_from: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub bounds: IntervalBox,
    pub conflicts: Vec<Conflict>,
}

impl Reduction {
    pub fn is_feasible(&self) -> bool {
        self.conflicts.is_empty()
    }
}

/// The program for leaf `path` among `paths`, tagged with its source neuron.
pub fn program_of(paths: &[DecisionPath], path: PathId, neuron: usize) -> Result<LogicProgram> {
    paths
        .iter()
        .find(|p| p.id == path)
        .map(|p| LogicProgram::new(p.predicates.clone()).with_source(neuron, path))
        .ok_or(Error::UnknownPath {
            path: path.0,
            count: paths.len(),
        })
}

/// Intersects all programs dimension by dimension.
///
/// Bounds are attributed to the program's source neuron, or to its position in
/// `programs` when it has none. Equal bounds are attributed to the smaller id so
/// the result does not depend on input order.
pub fn reduce(programs: &[LogicProgram]) -> Reduction {
    #[derive(Clone, Copy)]
    struct Bound {
        value: f64,
        from: usize,
    }
    let mut lower: BTreeMap<usize, Bound> = BTreeMap::new();
    let mut upper: BTreeMap<usize, Bound> = BTreeMap::new();
    for (pos, program) in programs.iter().enumerate() {
        let from = program.source.map_or(pos, |s| s.neuron);
        for p in &program.predicates {
            let (table, tighter): (_, fn(f64, f64) -> bool) = match p.op {
                Op::Gt => (&mut lower, |new, old| new > old),
                Op::Le => (&mut upper, |new, old| new < old),
            };
            let candidate = Bound {
                value: p.threshold,
                from,
            };
            table
                .entry(p.feature)
                .and_modify(|b| {
                    if tighter(p.threshold, b.value) || (p.threshold == b.value && from < b.from) {
                        *b = candidate;
                    }
                })
                .or_insert(candidate);
        }
    }
    let mut bounds = IntervalBox::default();
    let mut conflicts = Vec::new();
    let features: std::collections::BTreeSet<usize> =
        lower.keys().chain(upper.keys()).copied().collect();
    for f in features {
        let lo = lower.get(&f);
        let hi = upper.get(&f);
        let interval = Interval {
            lo: lo.map_or(f64::NEG_INFINITY, |b| b.value),
            hi: hi.map_or(f64::INFINITY, |b| b.value),
        };
        if let (true, Some(lo), Some(hi)) = (interval.is_empty(), lo, hi) {
            conflicts.push(Conflict {
                feature: f,
                lower_from: lo.from,
                upper_from: hi.from,
            });
        }
        bounds.bounds.insert(f, interval);
    }
    Reduction { bounds, conflicts }
}

/// Per-timestep conflict count: `(conflicting, multiply_constrained)` over the
/// dimensions constrained by at least two of `programs`.
pub fn timestep_conflicts<P: AsRef<LogicProgram>>(programs: &[P]) -> (usize, usize) {
    let mut per_feature: BTreeMap<usize, (usize, Interval)> = BTreeMap::new();
    for program in programs {
        for (f, interval) in program.as_ref().to_box().bounds {
            let slot = per_feature.entry(f).or_insert((0, Interval::FULL));
            slot.0 += 1;
            slot.1 = slot.1.intersect(&interval);
        }
    }
    per_feature
        .values()
        .filter(|(n, _)| *n >= 2)
        .fold((0, 0), |(c, m), (_, i)| {
            (c + usize::from(i.is_empty()), m + 1)
        })
}

/// Mean over timesteps of the fraction of multiply-constrained dimensions whose
/// intervals do not intersect. Timesteps with no such dimension count as 0.
pub fn conflict_rate<T, P>(timesteps: impl IntoIterator<Item = T>) -> Result<f64>
where
    T: AsRef<[P]>,
    P: AsRef<LogicProgram>,
{
    let mut total = 0.0;
    let mut count = 0usize;
    for programs in timesteps {
        let (conflicting, constrained) = timestep_conflicts(programs.as_ref());
        if constrained > 0 {
            total += conflicting as f64 / constrained as f64;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Empty(
            "conflict rate needs at least one timestep".into(),
        ));
    }
    Ok(total / count as f64)
}

impl AsRef<LogicProgram> for LogicProgram {
    fn as_ref(&self) -> &LogicProgram {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notation {
    /// `(θ ≤ 0.33) ∧ (θ̇ > −0.10)`
    Unicode,
    /// `(θ <= 0.33) ∧ (θ̇ > 0.10)`, the canonical text grammar.
    #[default]
    Table,
    /// `(θ <= 0.33) && (θ̇ > 0.10)`
    Ascii,
}

impl Notation {
    fn le(self) -> &'static str {
        match self {
            Notation::Unicode => "≤",
            Notation::Table | Notation::Ascii => "<=",
        }
    }

    fn and(self) -> &'static str {
        match self {
            Notation::Unicode | Notation::Table => " ∧ ",
            Notation::Ascii => " && ",
        }
    }
}

impl std::str::FromStr for Notation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unicode" => Ok(Notation::Unicode),
            "table" => Ok(Notation::Table),
            "ascii" => Ok(Notation::Ascii),
            other => Err(Error::Config(format!(
                "unknown notation `{other}` (expected unicode, table or ascii)"
            ))),
        }
    }
}

pub const NONE_TEXT: &str = "None";
pub const CONFLICT_TEXT: &str = "(conflict)";

/// Renders a program with thresholds at two decimals. Predicates implied by a
/// tighter one on the same dimension are omitted (see [`LogicProgram::simplified`]).
pub fn render(program: &LogicProgram, names: &[String], notation: Notation) -> String {
    if program.is_empty() {
        return NONE_TEXT.to_owned();
    }
    if !program.is_consistent() {
        return CONFLICT_TEXT.to_owned();
    }
    program
        .simplified()
        .predicates
        .iter()
        .map(|p| render_clause(p, names, notation))
        .collect::<Vec<_>>()
        .join(notation.and())
}

fn render_clause(p: &Predicate, names: &[String], notation: Notation) -> String {
    let op = match p.op {
        Op::Le => notation.le(),
        Op::Gt => ">",
    };
    let name = names
        .get(p.feature)
        .cloned()
        .unwrap_or_else(|| format!("s{}", p.feature));
    let mut value = format!("{:.2}", p.threshold);
    if value == "-0.00" {
        value.remove(0);
    }
    let value = match notation {
        Notation::Unicode => value.replace('-', "−"),
        Notation::Table | Notation::Ascii => value,
    };
    format!("({name} {op} {value})")
}

/// Result of parsing program text.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedProgram {
    Clauses(Vec<Predicate>),
    Conflict,
}

impl ParsedProgram {
    pub fn render(&self, names: &[String], notation: Notation) -> String {
        match self {
            ParsedProgram::Clauses(preds) => {
                render(&LogicProgram::new(preds.clone()), names, notation)
            }
            ParsedProgram::Conflict => CONFLICT_TEXT.to_owned(),
        }
    }
}

/// Parses the text grammar; names resolve against `names`.
pub fn parse_program(text: &str, names: &[String]) -> Result<ParsedProgram> {
    let text = text.trim();
    if text == NONE_TEXT {
        return Ok(ParsedProgram::Clauses(Vec::new()));
    }
    if text == CONFLICT_TEXT {
        return Ok(ParsedProgram::Conflict);
    }
    let err = |message: String| Error::Parse {
        location: format!("program `{text}`"),
        message,
    };
    let normalized = text.replace("&&", "∧");
    normalized
        .split('∧')
        .map(|clause| {
            let inner = clause
                .trim()
                .strip_prefix('(')
                .and_then(|c| c.strip_suffix(')'))
                .ok_or_else(|| err(format!("clause `{}` is not parenthesized", clause.trim())))?;
            let (name, op, number) = [(" <= ", Op::Le), (" ≤ ", Op::Le), (" > ", Op::Gt)]
                .iter()
                .filter_map(|(tok, op)| inner.rfind(tok).map(|at| (at, *tok, *op)))
                .max_by_key(|(at, _, _)| *at)
                .map(|(at, tok, op)| (&inner[..at], op, &inner[at + tok.len()..]))
                .ok_or_else(|| err(format!("clause `({inner})` has no comparison")))?;
            let feature = names
                .iter()
                .position(|n| n == name.trim())
                .ok_or_else(|| err(format!("unknown state name `{}`", name.trim())))?;
            let threshold = number
                .trim()
                .replace('−', "-")
                .parse::<f64>()
                .map_err(|e| err(format!("bad threshold `{}`: {e}", number.trim())))?;
            Ok(Predicate {
                feature,
                op,
                threshold,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(ParsedProgram::Clauses)
}

/// One row of a program table: a neuron label and its programs in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramTableRow {
    pub neuron: String,
    pub programs: Vec<String>,
}

/// Markdown table with one row per neuron and its numbered path programs.
pub fn render_program_table(rows: &[ProgramTableRow]) -> String {
    let mut out = String::from("| Neuron | Logic Program |\n| --- | --- |\n");
    for row in rows {
        let cell = row
            .programs
            .iter()
            .enumerate()
            .map(|(k, p)| format!("{k}: {p}"))
            .collect::<Vec<_>>()
            .join("<br>");
        out.push_str(&format!("| {} | {} |\n", row.neuron, cell));
    }
    out
}

/// Inverse of [`render_program_table`].
pub fn parse_program_table(
    text: &str,
    names: &[String],
) -> Result<Vec<(String, Vec<ParsedProgram>)>> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(2) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            location: format!("program table line {}", line_no + 1),
            message,
        };
        let cells: Vec<&str> = line
            .strip_prefix('|')
            .and_then(|l| l.strip_suffix('|'))
            .ok_or_else(|| err("row must start and end with `|`".into()))?
            .split('|')
            .map(str::trim)
            .collect();
        let [neuron, programs] = cells[..] else {
            return Err(err(format!("expected 2 cells, found {}", cells.len())));
        };
        let parsed = programs
            .split("<br>")
            .enumerate()
            .map(|(k, entry)| {
                let body = entry
                    .trim()
                    .strip_prefix(&format!("{k}:"))
                    .ok_or_else(|| err(format!("entry `{entry}` should start with `{k}:`")))?;
                parse_program(body, names)
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((neuron.to_owned(), parsed));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;
    use crate::tree::{DecisionTree, TreeConfig};
    use proptest::prelude::*;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn pendulum_names() -> Vec<String> {
        names(&["θ", "θ\u{307}"])
    }

    fn program(preds: Vec<Predicate>, neuron: usize) -> LogicProgram {
        LogicProgram::new(preds).with_source(neuron, PathId(0))
    }

    #[test]
    fn empty_path_renders_none() {
        let paths = vec![DecisionPath {
            id: PathId(0),
            predicates: vec![],
        }];
        let p = program_of(&paths, PathId(0), 3).unwrap();
        assert_eq!(render(&p, &pendulum_names(), Notation::Table), "None");
        assert!(matches!(
            program_of(&paths, PathId(1), 3),
            Err(Error::UnknownPath { path: 1, count: 1 })
        ));
    }

    #[test]
    fn renders_two_clause_program() {
        let p = LogicProgram::new(vec![Predicate::le(1, 0.44), Predicate::gt(1, -0.33)]);
        assert_eq!(
            render(&p, &pendulum_names(), Notation::Unicode),
            "(θ̇ ≤ 0.44) ∧ (θ̇ > −0.33)"
        );
        assert_eq!(
            render(&p, &pendulum_names(), Notation::Table),
            "(θ̇ <= 0.44) ∧ (θ̇ > -0.33)"
        );
        assert_eq!(
            render(&p, &pendulum_names(), Notation::Ascii),
            "(θ̇ <= 0.44) && (θ̇ > -0.33)"
        );
    }

    #[test]
    fn renders_single_clause_and_fallback_names() {
        let p = LogicProgram::new(vec![Predicate::le(1, 0.33)]);
        assert_eq!(
            render(&p, &pendulum_names(), Notation::Unicode),
            "(θ̇ ≤ 0.33)"
        );
        let step = LogicProgram::new(vec![Predicate::le(0, 1.5)]);
        assert_eq!(render(&step, &[], Notation::Unicode), "(s0 ≤ 1.50)");
    }

    #[test]
    fn looser_bounds_are_omitted() {
        let p = LogicProgram::new(vec![
            Predicate::le(1, 4.8),
            Predicate::le(0, 1.66),
            Predicate::le(0, -1.27),
            Predicate::gt(0, -2.0),
            Predicate::gt(0, -2.0),
        ]);
        assert_eq!(
            p.simplified().predicates,
            vec![
                Predicate::le(1, 4.8),
                Predicate::le(0, -1.27),
                Predicate::gt(0, -2.0)
            ]
        );
        assert_eq!(
            render(&p, &pendulum_names(), Notation::Table),
            "(θ̇ <= 4.80) ∧ (θ <= -1.27) ∧ (θ > -2.00)"
        );
    }

    #[test]
    fn self_inconsistent_program_renders_conflict() {
        let p = LogicProgram::new(vec![Predicate::le(0, 1.0), Predicate::gt(0, 2.0)]);
        assert_eq!(render(&p, &pendulum_names(), Notation::Table), "(conflict)");
        assert_eq!(
            parse_program("(conflict)", &pendulum_names()).unwrap(),
            ParsedProgram::Conflict
        );
    }

    #[test]
    fn parse_accepts_variants() {
        let n = pendulum_names();
        let expected =
            ParsedProgram::Clauses(vec![Predicate::le(1, 0.44), Predicate::gt(0, -0.33)]);
        for text in [
            "(θ̇ <= 0.44) ∧ (θ > -0.33)",
            "(θ̇ ≤ 0.44) ∧ (θ > −0.33)",
            "(θ̇ <= 0.44) && (θ > -0.33)",
        ] {
            assert_eq!(parse_program(text, &n).unwrap(), expected, "{text}");
        }
        assert_eq!(
            parse_program("None", &n).unwrap(),
            ParsedProgram::Clauses(vec![])
        );
        assert!(parse_program("(phi <= 1.00)", &n).is_err());
        assert!(parse_program("θ <= 1.00", &n).is_err());
        assert!(parse_program("(θ = 1.00)", &n).is_err());
    }

    #[test]
    fn reduce_reports_clash() {
        let r = reduce(&[
            program(vec![Predicate::le(0, 3.0)], 0),
            program(vec![Predicate::gt(0, 4.0)], 1),
        ]);
        assert_eq!(
            r.conflicts,
            vec![Conflict {
                feature: 0,
                lower_from: 1,
                upper_from: 0
            }]
        );
        assert_eq!(r.bounds.get(0), Interval { lo: 4.0, hi: 3.0 });
    }

    #[test]
    fn reduce_keeps_tightest_bound() {
        let r = reduce(&[
            program(vec![Predicate::le(0, 3.0)], 0),
            program(vec![Predicate::le(0, 5.0)], 1),
        ]);
        assert!(r.is_feasible());
        assert_eq!(
            r.bounds.get(0),
            Interval {
                lo: f64::NEG_INFINITY,
                hi: 3.0
            }
        );
    }

    #[test]
    fn reduce_across_dimensions() {
        let r = reduce(&[
            program(vec![Predicate::gt(0, 1.0), Predicate::le(0, 2.0)], 0),
            program(vec![Predicate::le(1, 0.0)], 1),
        ]);
        assert!(r.is_feasible());
        assert_eq!(r.bounds.get(0), Interval { lo: 1.0, hi: 2.0 });
        assert_eq!(
            r.bounds.get(1),
            Interval {
                lo: f64::NEG_INFINITY,
                hi: 0.0
            }
        );
        assert!(r.bounds.contains(&[1.5, -1.0]));
        assert!(!r.bounds.contains(&[1.0, -1.0]));
    }

    #[test]
    fn conflict_rate_extremes() {
        let empty = vec![LogicProgram::new(vec![]), LogicProgram::new(vec![])];
        assert_eq!(conflict_rate(vec![empty.clone(), empty]).unwrap(), 0.0);

        let clash = vec![
            LogicProgram::new(vec![Predicate::le(0, 3.0)]),
            LogicProgram::new(vec![Predicate::gt(0, 4.0)]),
        ];
        assert_eq!(conflict_rate(vec![clash.clone(); 5]).unwrap(), 1.0);
        assert!(conflict_rate(Vec::<Vec<LogicProgram>>::new()).is_err());
    }

    /// Independent check: a dimension conflicts when some pair of programs has
    /// no common witness point on it.
    fn oracle_rate(timesteps: &[Vec<LogicProgram>]) -> f64 {
        let mut total = 0.0;
        for programs in timesteps {
            let dims: std::collections::BTreeSet<usize> = programs
                .iter()
                .flat_map(|p| p.predicates.iter().map(|q| q.feature))
                .collect();
            let (mut constrained, mut conflicting) = (0, 0);
            for d in dims {
                let on_dim: Vec<Vec<&Predicate>> = programs
                    .iter()
                    .map(|p| {
                        p.predicates
                            .iter()
                            .filter(|q| q.feature == d)
                            .collect::<Vec<_>>()
                    })
                    .filter(|v| !v.is_empty())
                    .collect();
                if on_dim.len() < 2 {
                    continue;
                }
                constrained += 1;
                let witnesses: Vec<f64> = on_dim
                    .iter()
                    .flatten()
                    .flat_map(|q| [q.threshold, q.threshold + 1e-6, q.threshold - 1e-6])
                    .collect();
                let mut clash = false;
                for a in 0..on_dim.len() {
                    for b in a + 1..on_dim.len() {
                        let ok = witnesses.iter().any(|&v| {
                            let mut s = vec![0.0; d + 1];
                            s[d] = v;
                            on_dim[a].iter().chain(&on_dim[b]).all(|q| q.holds(&s))
                        });
                        clash |= !ok;
                    }
                }
                conflicting += usize::from(clash);
            }
            if constrained > 0 {
                total += conflicting as f64 / constrained as f64;
            }
        }
        total / timesteps.len() as f64
    }

    #[test]
    fn conflict_rate_matches_pairwise_oracle() {
        // neuron A reads the true state, neuron B a shifted copy of it
        let timesteps: Vec<Vec<LogicProgram>> = (0..200)
            .map(|t| {
                let s = -1.0 + t as f64 * 0.01;
                let a = if s <= 0.0 {
                    Predicate::le(0, 0.0)
                } else {
                    Predicate::gt(0, 0.0)
                };
                let shifted = s + 0.3;
                let b = if shifted <= 0.5 {
                    Predicate::le(0, 0.5)
                } else {
                    Predicate::gt(0, 0.5)
                };
                vec![LogicProgram::new(vec![a]), LogicProgram::new(vec![b])]
            })
            .collect();
        let rate = conflict_rate(&timesteps).unwrap();
        assert_eq!(rate, oracle_rate(&timesteps));
        assert!(rate == 0.0, "s <= 0 with s > 0.5 never co-occurs");

        let crossed: Vec<Vec<LogicProgram>> = (0..200)
            .map(|t| {
                let s = -1.0 + t as f64 * 0.01;
                let a = if s <= 0.0 {
                    Predicate::le(0, 0.0)
                } else {
                    Predicate::gt(0, 0.0)
                };
                let b = if -s <= 0.5 {
                    Predicate::gt(0, 0.5)
                } else {
                    Predicate::le(0, 0.5)
                };
                vec![LogicProgram::new(vec![a]), LogicProgram::new(vec![b])]
            })
            .collect();
        let rate = conflict_rate(&crossed).unwrap();
        assert_eq!(rate, oracle_rate(&crossed));
        assert!(rate > 0.0 && rate < 1.0, "{rate}");
    }

    #[test]
    fn program_table_round_trip() {
        let n = pendulum_names();
        let rows = vec![
            ProgramTableRow {
                neuron: "0".into(),
                programs: vec!["(θ̇ <= 0.33)".into(), "(θ̇ > 0.33)".into()],
            },
            ProgramTableRow {
                neuron: "1".into(),
                programs: vec!["None".into()],
            },
        ];
        let table = render_program_table(&rows);
        let parsed = parse_program_table(&table, &n).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(
            parsed[0].1,
            vec![
                ParsedProgram::Clauses(vec![Predicate::le(1, 0.33)]),
                ParsedProgram::Clauses(vec![Predicate::gt(1, 0.33)])
            ]
        );
        assert_eq!(parsed[1].1, vec![ParsedProgram::Clauses(vec![])]);
    }

    fn predicate() -> impl Strategy<Value = Predicate> {
        (0usize..3, any::<bool>(), -500i32..500).prop_map(|(f, le, c)| Predicate {
            feature: f,
            op: if le { Op::Le } else { Op::Gt },
            threshold: f64::from(c) / 100.0,
        })
    }

    fn programs() -> impl Strategy<Value = Vec<LogicProgram>> {
        prop::collection::vec(
            (prop::collection::vec(predicate(), 0..4), 0usize..6)
                .prop_map(|(p, n)| LogicProgram::new(p).with_source(n, PathId(0))),
            0..6,
        )
    }

    proptest! {
        #[test]
        fn reduce_is_order_independent(ps in programs(), seed in any::<u64>()) {
            let mut shuffled = ps.clone();
            let len = shuffled.len().max(1);
            shuffled.rotate_left(seed as usize % len);
            shuffled.reverse();
            let a = reduce(&ps);
            let b = reduce(&shuffled);
            prop_assert_eq!(&a.bounds, &b.bounds);
            prop_assert_eq!(a.conflicts, b.conflicts);

            // associativity: reducing halves then combining their boxes
            let mid = ps.len() / 2;
            let left = LogicProgram::new(box_predicates(&reduce(&ps[..mid]).bounds));
            let right = LogicProgram::new(box_predicates(&reduce(&ps[mid..]).bounds));
            prop_assert_eq!(reduce(&[left, right]).bounds, a.bounds);
        }

        #[test]
        fn adding_a_program_never_removes_conflicts(ps in programs(), extra in prop::collection::vec(predicate(), 0..4)) {
            let (before, _) = timestep_conflicts(&ps);
            let mut more = ps.clone();
            more.push(LogicProgram::new(extra));
            let (after, _) = timestep_conflicts(&more);
            prop_assert!(after >= before);
            let rate = conflict_rate([more]).unwrap();
            prop_assert!((0.0..=1.0).contains(&rate));
        }

        #[test]
        fn canonical_text_round_trips(preds in prop::collection::vec(predicate(), 0..5)) {
            let n = names(&["θ", "θ\u{307}", "h_R"]);
            let text = render(&LogicProgram::new(preds), &n, Notation::Table);
            let parsed = parse_program(&text, &n).unwrap();
            prop_assert_eq!(parsed.render(&n, Notation::Table), text);
        }

        #[test]
        fn tree_paths_are_feasible(ys in prop::collection::vec(-3.0f64..3.0, 40), xs in prop::collection::vec(-2i32..3, 80)) {
            let x = Matrix::from_vec(40, 2, xs.into_iter().map(f64::from).collect()).unwrap();
            let mut cfg = TreeConfig::surrogate();
            cfg.min_leaf_fraction = 0.05;
            cfg.max_depth = 5;
            let tree = DecisionTree::fit_regression(&x, &ys, &cfg).unwrap();
            for path in tree.enumerate_paths() {
                prop_assert!(LogicProgram::new(path.predicates).is_consistent());
            }
        }
    }

    fn box_predicates(b: &IntervalBox) -> Vec<Predicate> {
        let mut out = Vec::new();
        for (&f, i) in &b.bounds {
            if i.lo.is_finite() {
                out.push(Predicate::gt(f, i.lo));
            }
            if i.hi.is_finite() {
                out.push(Predicate::le(f, i.hi));
            }
        }
        out
    }
}
