//! CNF formulas, cardinality constraints and their forbidden patterns.
//!
//! A clause forbids exactly one computational pattern on its variables: the
//! assignment that makes every literal false. A clause touching a unit in
//! the undefined level is treated as satisfied, because the undefined unit can
//! still be completed to a satisfying value. Cardinality constraints use the
//! same completion rule and compile to full basis states.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{basis_index, SpaceSpec, TritString};
use crate::operators::{ForbiddenEntry, ForbiddenSet};

/// Largest variable count for which exhaustive uniqueness checks run.
pub const MAX_EXHAUSTIVE_VARS: usize = 20;

/// DIMACS text of the bundled 45-clause instance.
pub const BUNDLED_DIMACS: &str = include_str!("../data/bundled_instance.cnf");

const BUNDLED_VARS: [[usize; 3]; 45] = [
    [2, 1, 3], [1, 3, 2], [0, 1, 2], [2, 3, 4], [4, 0, 3], [1, 0, 4], [3, 0, 1], [1, 4, 0], [2, 1, 0],
    [0, 4, 3], [4, 2, 3], [3, 1, 0], [1, 2, 0], [3, 2, 0], [4, 1, 3], [1, 0, 4], [3, 2, 4], [3, 2, 4],
    [1, 3, 4], [2, 4, 1], [3, 1, 2], [2, 1, 4], [4, 0, 1], [3, 4, 0], [2, 4, 0], [2, 4, 3], [1, 4, 2],
    [4, 3, 1], [2, 0, 4], [3, 0, 2], [4, 3, 2], [0, 2, 4], [0, 4, 2], [1, 4, 0], [4, 2, 1], [2, 3, 4],
    [0, 4, 1], [2, 0, 4], [3, 2, 1], [0, 2, 1], [0, 3, 1], [1, 4, 2], [0, 2, 3], [2, 1, 4], [4, 1, 0],
];

const BUNDLED_NEGATED: [[u8; 3]; 45] = [
    [1, 1, 1], [1, 1, 1], [1, 0, 1], [1, 0, 1], [1, 1, 1], [1, 1, 1], [1, 1, 1], [1, 0, 1], [1, 1, 0],
    [1, 1, 1], [1, 1, 0], [1, 1, 1], [1, 1, 0], [1, 1, 0], [1, 0, 1], [1, 0, 1], [1, 0, 0], [1, 0, 1],
    [1, 1, 0], [1, 1, 1], [1, 1, 0], [1, 0, 1], [1, 1, 1], [1, 0, 0], [1, 0, 0], [1, 1, 0], [1, 0, 1],
    [1, 0, 1], [1, 0, 1], [1, 1, 0], [1, 1, 0], [1, 1, 1], [1, 1, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1],
    [1, 1, 1], [1, 1, 0], [1, 0, 1], [1, 1, 0], [1, 1, 1], [1, 1, 1], [1, 0, 0], [1, 1, 0], [1, 0, 0],
];

/// Disjunction of literals over distinct variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    vars: Vec<usize>,
    negated: Vec<bool>,
}

impl Clause {
    pub fn new(vars: Vec<usize>, negated: Vec<bool>) -> Result<Self> {
        if vars.is_empty() {
            return invalid("a clause needs at least one literal");
        }
        if vars.len() != negated.len() {
            return invalid("one negation flag per variable is required");
        }
        for (k, v) in vars.iter().enumerate() {
            if vars[..k].contains(v) {
                return invalid(format!("variable {v} repeated in clause"));
            }
        }
        Ok(Self { vars, negated })
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn negated(&self) -> &[bool] {
        &self.negated
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Literals as a canonical sorted set, for duplicate detection.
    fn key(&self) -> Vec<(usize, bool)> {
        let mut k: Vec<_> = self.vars.iter().copied().zip(self.negated.iter().copied()).collect();
        k.sort_unstable();
        k
    }

    /// Three-valued evaluation: `levels` holds 0, 1 or `undefined` per
    /// variable.
    pub fn satisfied_by_levels(&self, levels: &[usize], undefined: usize) -> bool {
        self.vars.iter().zip(&self.negated).any(|(&v, &neg)| {
            let l = levels[v];
            l == undefined || (l == 1) != neg
        })
    }
}

/// Conjunction of clauses with an optional planted solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnfFormula {
    n_vars: usize,
    clauses: Vec<Clause>,
    planted: Option<Vec<u8>>,
}

impl CnfFormula {
    pub fn new(n_vars: usize, clauses: Vec<Clause>, planted: Option<Vec<u8>>) -> Result<Self> {
        if n_vars == 0 {
            return invalid("a formula needs at least one variable");
        }
        for c in &clauses {
            if let Some(&v) = c.vars.iter().find(|&&v| v >= n_vars) {
                return invalid(format!("variable {v} outside 0..{n_vars}"));
            }
        }
        let f = Self { n_vars, clauses, planted: None };
        if let Some(p) = &planted {
            if p.len() != n_vars || p.iter().any(|&b| b > 1) {
                return invalid("planted assignment must be one bit per variable");
            }
            let levels: Vec<usize> = p.iter().map(|&b| b as usize).collect();
            if !f.clauses.iter().all(|c| c.satisfied_by_levels(&levels, 2)) {
                return invalid("planted assignment violates a clause");
            }
        }
        Ok(Self { planted, ..f })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn planted(&self) -> Option<&[u8]> {
        self.planted.as_deref()
    }

    /// Adds a clause; the planted assignment is dropped if it no longer
    /// satisfies the formula.
    pub fn with_clause(&self, c: Clause) -> Result<CnfFormula> {
        let mut clauses = self.clauses.clone();
        clauses.push(c);
        let planted = self.planted.clone().filter(|p| {
            let levels: Vec<usize> = p.iter().map(|&b| b as usize).collect();
            clauses.iter().all(|c| c.satisfied_by_levels(&levels, 2))
        });
        CnfFormula::new(self.n_vars, clauses, planted)
    }

    /// Every satisfying bit string, as integers with bit `j` for variable
    /// `j`.
    pub fn satisfying_assignments(&self) -> Result<Vec<u32>> {
        if self.n_vars > MAX_EXHAUSTIVE_VARS {
            return Err(Error::Unsupported(format!(
                "exhaustive search limited to {MAX_EXHAUSTIVE_VARS} variables"
            )));
        }
        let masks: Vec<(u32, u32)> = self.clauses.iter().map(clause_masks).collect();
        Ok((0..1u32 << self.n_vars)
            .filter(|&x| masks.iter().all(|&(scope, bad)| x & scope != bad))
            .collect())
    }

    /// One pattern entry of weight `weight` per clause.
    pub fn forbidden_set(&self, weight: f64) -> ForbiddenSet {
        let mut f = ForbiddenSet::new();
        for c in &self.clauses {
            let (levels, units) = clause_forbidden_pattern(c);
            f.push(ForbiddenEntry::Pattern { levels, units, weight });
        }
        f
    }

    /// Fixes variable `var` to `bit`: satisfied clauses are dropped and the
    /// falsified literal is removed from the rest. Returns `None` when a
    /// clause loses all of its literals.
    pub fn substitute(&self, var: usize, bit: u8) -> Option<Vec<Clause>> {
        let mut out = Vec::with_capacity(self.clauses.len());
        for c in &self.clauses {
            match c.vars.iter().position(|&v| v == var) {
                None => out.push(c.clone()),
                Some(k) => {
                    if (bit == 1) != c.negated[k] {
                        continue;
                    }
                    if c.len() == 1 {
                        return None;
                    }
                    let mut vars = c.vars.clone();
                    let mut neg = c.negated.clone();
                    vars.remove(k);
                    neg.remove(k);
                    out.push(Clause { vars, negated: neg });
                }
            }
        }
        Some(out)
    }
}

/// (scope mask, violating values mask) for bit-parallel evaluation.
fn clause_masks(c: &Clause) -> (u32, u32) {
    c.vars.iter().zip(&c.negated).fold((0, 0), |(s, b), (&v, &neg)| {
        (s | 1 << v, if neg { b | 1 << v } else { b })
    })
}

/// The compiled-in 45-clause, 5-variable instance with planted `00000`.
pub fn load_bundled_instance() -> CnfFormula {
    let clauses = BUNDLED_VARS
        .iter()
        .zip(BUNDLED_NEGATED.iter())
        .map(|(v, n)| Clause {
            vars: v.to_vec(),
            negated: n.iter().map(|&x| x == 1).collect(),
        })
        .collect();
    CnfFormula {
        n_vars: 5,
        clauses,
        planted: Some(vec![0; 5]),
    }
}

/// `f` plus the all-positive clause `(x0 v x1 v x2)`.
pub fn unsatisfiable_variant(f: &CnfFormula) -> Result<CnfFormula> {
    f.with_clause(Clause::new(vec![0, 1, 2], vec![false; 3])?)
}

/// The unique violating assignment of `c`: level 0 for positive literals,
/// level 1 for negated ones, as `(levels, units)`.
pub fn clause_forbidden_pattern(c: &Clause) -> (Vec<usize>, Vec<usize>) {
    (
        c.negated.iter().map(|&n| n as usize).collect(),
        c.vars.clone(),
    )
}

/// Three-valued satisfaction of a full trit string.
pub fn satisfies(f: &CnfFormula, t: &TritString) -> Result<bool> {
    if t.len() != f.n_vars {
        return invalid(format!("string has {} units, formula has {} variables", t.len(), f.n_vars));
    }
    if t.digits().iter().any(|&d| d > 2) {
        return invalid("formula strings use levels 0, 1 and u");
    }
    Ok(f.clauses.iter().all(|c| c.satisfied_by_levels(t.digits(), 2)))
}

/// Random 3-SAT instance whose only solution is all zeros.
///
/// Clauses draw three distinct variables uniformly and negation flags
/// uniformly among the seven patterns with at least one negation; repeated
/// clauses are redrawn. Clauses are added until exactly one assignment
/// survives.
pub fn planted_generator(n: usize, seed: u64) -> Result<CnfFormula> {
    if n < 3 {
        return invalid(format!("planted instances need at least 3 variables, got {n}"));
    }
    if n > MAX_EXHAUSTIVE_VARS {
        return Err(Error::Unsupported(format!(
            "uniqueness check limited to {MAX_EXHAUSTIVE_VARS} variables, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alive: Vec<u32> = (0..1u32 << n).collect();
    let mut seen = HashSet::new();
    let mut clauses = Vec::new();
    while alive.len() > 1 {
        let vars = sample(&mut rng, n, 3).into_vec();
        let pattern: u8 = rng.random_range(1..8);
        let negated: Vec<bool> = (0..3).map(|k| pattern >> k & 1 == 1).collect();
        let c = Clause { vars, negated };
        if !seen.insert(c.key()) {
            continue;
        }
        let (scope, bad) = clause_masks(&c);
        alive.retain(|&x| x & scope != bad);
        clauses.push(c);
    }
    CnfFormula::new(n, clauses, Some(vec![0; n]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CardinalityKind {
    Exactly,
    AtMostOnes,
    AtMostZeros,
}

/// Constraint on the number of ones or zeros within `scope`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CardinalityConstraint {
    pub kind: CardinalityKind,
    pub k: usize,
    pub scope: Vec<usize>,
}

impl CardinalityConstraint {
    pub fn new(kind: CardinalityKind, k: usize, scope: Vec<usize>) -> Result<Self> {
        if k > scope.len() {
            return invalid(format!("bound {k} exceeds scope size {}", scope.len()));
        }
        for (i, u) in scope.iter().enumerate() {
            if scope[..i].contains(u) {
                return invalid(format!("unit {u} repeated in scope"));
            }
        }
        Ok(Self { kind, k, scope })
    }

    /// Whether some completion of the undefined units meets the constraint.
    pub fn feasible(&self, levels: &[usize], undefined: usize) -> bool {
        let (mut ones, mut zeros, mut us) = (0, 0, 0);
        for &u in &self.scope {
            match levels[u] {
                0 => zeros += 1,
                1 => ones += 1,
                l if l == undefined => us += 1,
                _ => {}
            }
        }
        match self.kind {
            CardinalityKind::Exactly => ones <= self.k && ones + us >= self.k,
            CardinalityKind::AtMostOnes => ones <= self.k,
            CardinalityKind::AtMostZeros => zeros <= self.k,
        }
    }
}

/// Basis indices of every string that no completion can make feasible.
pub fn cardinality_forbidden_patterns(c: &CardinalityConstraint, spec: &SpaceSpec) -> Result<Vec<usize>> {
    if spec.levels() != 2 {
        return invalid("cardinality constraints need three-level units");
    }
    if let Some(&u) = c.scope.iter().find(|&&u| u >= spec.n_units()) {
        return invalid(format!("unit {u} outside a space of {} units", spec.n_units()));
    }
    Ok(spec
        .strings()
        .enumerate()
        .filter(|(_, t)| !c.feasible(t.digits(), spec.undefined_level()))
        .map(|(i, _)| i)
        .collect())
}

/// Forbidden basis states of a cardinality constraint at a common weight.
pub fn cardinality_forbidden_set(c: &CardinalityConstraint, spec: &SpaceSpec, weight: f64) -> Result<ForbiddenSet> {
    let mut f = ForbiddenSet::new();
    for index in cardinality_forbidden_patterns(c, spec)? {
        f.push(ForbiddenEntry::Basis { index, weight });
    }
    Ok(f)
}

/// Clauses `(x_j v !x_{j+1})` encoding `m_states` values in `m_states - 1`
/// bits; the valid strings have all ones before all zeros.
pub fn domain_wall_clauses(m_states: usize) -> Result<CnfFormula> {
    if m_states < 2 {
        return invalid(format!("a domain-wall variable needs at least 2 values, got {m_states}"));
    }
    let n = m_states - 1;
    let clauses = (0..n.saturating_sub(1))
        .map(|j| Clause { vars: vec![j, j + 1], negated: vec![false, true] })
        .collect();
    CnfFormula::new(n, clauses, None)
}

/// Bit strings allowed by a domain-wall encoding, as level vectors.
pub fn domain_wall_states(m_states: usize) -> Vec<Vec<u8>> {
    let n = m_states.saturating_sub(1);
    (0..m_states)
        .map(|ones| (0..n).map(|j| (j < ones) as u8).collect())
        .collect()
}

/// DIMACS text: `p cnf` header, one zero-terminated clause per line, and a
/// `c planted` comment when a planted assignment is present.
pub fn to_dimacs(f: &CnfFormula) -> String {
    let mut s = String::new();
    if let Some(p) = &f.planted {
        let bits: String = p.iter().map(|b| char::from(b'0' + b)).collect();
        writeln!(s, "c planted {bits}").unwrap();
    }
    writeln!(s, "p cnf {} {}", f.n_vars, f.clauses.len()).unwrap();
    for c in &f.clauses {
        for (&v, &neg) in c.vars.iter().zip(&c.negated) {
            let lit = v as i64 + 1;
            write!(s, "{} ", if neg { -lit } else { lit }).unwrap();
        }
        s.push_str("0\n");
    }
    s
}

pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut planted = None;
    let mut clauses = Vec::new();
    let mut pending: Vec<i64> = Vec::new();
    let perr = |line: usize, message: String| Error::Parse { line, message };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            let rest = rest.trim();
            if let Some(bits) = rest.strip_prefix("planted") {
                let bits = bits.trim();
                let parsed: Option<Vec<u8>> = bits
                    .chars()
                    .map(|c| c.to_digit(2).map(|d| d as u8))
                    .collect();
                planted = Some(parsed.ok_or_else(|| perr(line_no, format!("bad planted bits `{bits}`")))?);
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if header.is_some() || parts.len() != 3 || parts[0] != "cnf" {
                return Err(perr(line_no, "expected a single `p cnf <vars> <clauses>` header".into()));
            }
            let nv = parts[1].parse().map_err(|_| perr(line_no, "bad variable count".into()))?;
            let nc = parts[2].parse().map_err(|_| perr(line_no, "bad clause count".into()))?;
            header = Some((nv, nc));
            continue;
        }
        let Some((n_vars, _)) = header else {
            return Err(perr(line_no, "clause before header".into()));
        };
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| perr(line_no, format!("bad literal `{tok}`")))?;
            if lit == 0 {
                let vars: Vec<usize> = pending.iter().map(|l| (l.unsigned_abs() - 1) as usize).collect();
                if let Some(&v) = vars.iter().find(|&&v| v >= n_vars) {
                    return Err(perr(line_no, format!("variable {} exceeds header count {n_vars}", v + 1)));
                }
                let negated = pending.iter().map(|&l| l < 0).collect();
                clauses.push(Clause::new(vars, negated).map_err(|e| perr(line_no, e.to_string()))?);
                pending.clear();
            } else {
                pending.push(lit);
            }
        }
    }
    let (n_vars, n_clauses) = header.ok_or_else(|| perr(0, "missing `p cnf` header".into()))?;
    if !pending.is_empty() {
        return Err(perr(text.lines().count(), "last clause lacks a 0 terminator".into()));
    }
    if clauses.len() != n_clauses {
        return Err(perr(0, format!("header declares {n_clauses} clauses, found {}", clauses.len())));
    }
    CnfFormula::new(n_vars, clauses, planted)
}

pub fn read_dimacs(path: &Path) -> Result<CnfFormula> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dimacs(&text)
}

pub fn write_dimacs(path: &Path, f: &CnfFormula) -> Result<()> {
    crate::experiments::write_atomic(path, to_dimacs(f).as_bytes())
}

/// Flat basis index of a bit assignment.
pub fn bits_index(bits: &[u8], spec: &SpaceSpec) -> Result<usize> {
    basis_index(&TritString::from_bits(bits), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{embed_operator, trit_string, C64};
    use crate::operators::forbidden_generator;
    use crate::states::{phi_sat, SweepAngle};
    use proptest::prelude::*;

    fn bits_of(x: u32, n: usize) -> String {
        (0..n).map(|j| if x >> j & 1 == 1 { '1' } else { '0' }).collect()
    }

    #[test]
    fn bundled_instance_facts() {
        let f = load_bundled_instance();
        assert_eq!(f.clauses().len(), 45);
        assert_eq!(f.clauses()[0].vars(), &[2, 1, 3]);
        assert_eq!(f.clauses()[0].negated(), &[true, true, true]);
        assert_eq!(f.planted(), Some(&[0u8; 5][..]));
        assert!(satisfies(&f, &"00000".parse().unwrap()).unwrap());
        assert!(!satisfies(&f, &"11111".parse().unwrap()).unwrap());
        assert!(satisfies(&f, &"uuuuu".parse().unwrap()).unwrap());
        assert_eq!(f.satisfying_assignments().unwrap(), vec![0]);
    }

    #[test]
    fn bundled_file_round_trips() {
        let f = load_bundled_instance();
        assert_eq!(parse_dimacs(BUNDLED_DIMACS).unwrap(), f);
        assert_eq!(to_dimacs(&f), BUNDLED_DIMACS);
    }

    #[test]
    fn unsatisfiable_variant_facts() {
        let v = unsatisfiable_variant(&load_bundled_instance()).unwrap();
        assert_eq!(v.clauses().len(), 46);
        assert_eq!(v.planted(), None);
        let (levels, units) = clause_forbidden_pattern(v.clauses().last().unwrap());
        assert_eq!((levels, units), (vec![0, 0, 0], vec![0, 1, 2]));
        assert!(v.satisfying_assignments().unwrap().is_empty());
    }

    #[test]
    fn forbidden_pattern_examples() {
        let c = Clause::new(vec![1, 2, 3], vec![false, false, true]).unwrap();
        assert_eq!(clause_forbidden_pattern(&c), (vec![0, 0, 1], vec![1, 2, 3]));
        let c = Clause::new(vec![2, 1, 3], vec![true; 3]).unwrap();
        assert_eq!(clause_forbidden_pattern(&c), (vec![1, 1, 1], vec![2, 1, 3]));
        assert!(Clause::new(vec![1, 1, 2], vec![false; 3]).is_err());
    }

    #[test]
    fn satisfies_rejects_length_mismatch() {
        assert!(satisfies(&load_bundled_instance(), &"000".parse().unwrap()).is_err());
    }

    #[test]
    fn substitution_drops_and_shrinks() {
        let f = CnfFormula::new(3, vec![
            Clause::new(vec![0, 1], vec![false, true]).unwrap(),
            Clause::new(vec![0, 2], vec![true, false]).unwrap(),
        ], None).unwrap();
        let r = f.substitute(0, 1).unwrap();
        assert_eq!(r, vec![Clause::new(vec![2], vec![false]).unwrap()]);
        let g = CnfFormula::new(1, vec![Clause::new(vec![0], vec![false]).unwrap()], None).unwrap();
        assert!(g.substitute(0, 0).is_none());
    }

    #[test]
    fn planted_generator_examples() {
        for seed in 0..5 {
            let f = planted_generator(5, seed).unwrap();
            assert!(satisfies(&f, &"00000".parse().unwrap()).unwrap());
            assert_eq!(f.satisfying_assignments().unwrap(), vec![0]);
            assert!(f.clauses().iter().all(|c| c.len() == 3 && c.negated().iter().any(|&n| n)));
            let keys: HashSet<_> = f.clauses().iter().map(|c| c.key()).collect();
            assert_eq!(keys.len(), f.clauses().len());
        }
        assert_eq!(planted_generator(6, 11).unwrap(), planted_generator(6, 11).unwrap());
        assert!(planted_generator(2, 0).is_err());
        assert!(matches!(planted_generator(21, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cardinality_examples() {
        let s2 = SpaceSpec::qubits(2).unwrap();
        let exactly_one = CardinalityConstraint::new(CardinalityKind::Exactly, 1, vec![0, 1]).unwrap();
        let bad: Vec<String> = cardinality_forbidden_patterns(&exactly_one, &s2).unwrap()
            .into_iter().map(|i| trit_string(i, &s2).unwrap().to_string()).collect();
        assert_eq!(bad, vec!["00", "11"]);

        let s5 = SpaceSpec::qubits(5).unwrap();
        let three_hot = CardinalityConstraint::new(CardinalityKind::Exactly, 3, (0..5).collect()).unwrap();
        let forbidden = cardinality_forbidden_patterns(&three_hot, &s5).unwrap();
        // Independent count: strings with more than three ones or too few ones+u.
        let expected = s5.strings().filter(|t| {
            let ones = t.digits().iter().filter(|&&d| d == 1).count();
            let us = t.digits().iter().filter(|&&d| d == 2).count();
            ones > 3 || ones + us < 3
        }).count();
        assert_eq!(forbidden.len(), expected);
        assert_eq!(forbidden.len(), 62);

        let at_most = CardinalityConstraint::new(CardinalityKind::AtMostZeros, 2, (0..5).collect()).unwrap();
        let idx = bits_index(&[0, 0, 0, 1, 1], &s5).unwrap();
        assert!(cardinality_forbidden_patterns(&at_most, &s5).unwrap().contains(&idx));
        assert!(CardinalityConstraint::new(CardinalityKind::Exactly, 3, vec![0, 1]).is_err());
    }

    #[test]
    fn domain_wall_examples() {
        let f = domain_wall_clauses(5).unwrap();
        assert_eq!((f.n_vars(), f.clauses().len()), (4, 3));
        let valid: Vec<String> = f.satisfying_assignments().unwrap().into_iter().map(|x| bits_of(x, 4)).collect();
        let mut expected = vec!["0000", "1000", "1100", "1110", "1111"];
        expected.sort();
        let mut valid_sorted = valid.clone();
        valid_sorted.sort();
        assert_eq!(valid_sorted, expected);
        let f2 = domain_wall_clauses(2).unwrap();
        assert_eq!((f2.n_vars(), f2.clauses().len()), (1, 0));
        for m in 2..9 {
            assert_eq!(domain_wall_clauses(m).unwrap().satisfying_assignments().unwrap().len(), m);
            assert_eq!(domain_wall_states(m).len(), m);
        }
        assert!(domain_wall_clauses(1).is_err());
    }

    fn connected(states: &[u32]) -> bool {
        let mut seen = vec![states[0]];
        let mut frontier = vec![states[0]];
        while let Some(s) = frontier.pop() {
            for &t in states {
                if !seen.contains(&t) && (s ^ t).count_ones() == 1 {
                    seen.push(t);
                    frontier.push(t);
                }
            }
        }
        seen.len() == states.len()
    }

    #[test]
    fn encoding_adjacency() {
        let dw = domain_wall_clauses(5).unwrap().satisfying_assignments().unwrap();
        assert!(connected(&dw));
        let one_hot: Vec<u32> = (0..5).map(|j| 1 << j).collect();
        assert!(!connected(&one_hot));
    }

    #[test]
    fn dimacs_errors() {
        assert!(matches!(parse_dimacs("1 2 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_dimacs("p cnf 2 1\n1 3 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 2\n1 2 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 1\n1 2\n").is_err());
        assert!(parse_dimacs("p cnf 2 1\n1 x 0\n").is_err());
        let f = parse_dimacs("c hello\np cnf 3 1\n1 -2\n 3 0\n").unwrap();
        assert_eq!(f.clauses()[0].negated(), &[false, true, false]);
    }

    #[test]
    fn phi_sat_avoids_every_bundled_pattern() {
        let f = load_bundled_instance();
        let spec = SpaceSpec::qubits(5).unwrap();
        for k in 0..20 {
            let theta = SweepAngle::new(0.05 + 1.5 * k as f64 / 19.0).unwrap();
            let psi = phi_sat(theta, &[0; 5]).unwrap();
            for c in f.clauses() {
                let (levels, units) = clause_forbidden_pattern(c);
                let mut local = nalgebra::DMatrix::<C64>::zeros(27, 27);
                let li = levels.iter().rev().fold(0, |a, &l| a * 3 + l);
                local[(li, li)] = C64::new(1.0, 0.0);
                let p = embed_operator(&local, &units, &spec).unwrap();
                assert!((p * psi.amplitudes()).norm() < 1e-12);
            }
        }
        let psi = phi_sat(SweepAngle::new(0.4).unwrap(), &[0; 5]).unwrap();
        let g = forbidden_generator(&f.forbidden_set(1.0), &spec).unwrap();
        assert!(g.apply(&psi).norm_sqr() < 1e-24);
    }

    proptest! {
        #[test]
        fn satisfaction_agrees_with_patterns(seed in 0u64..200, n in 3usize..6) {
            let f = planted_generator(n, seed).unwrap();
            let spec = SpaceSpec::qubits(n).unwrap();
            let fs = f.forbidden_set(1.0);
            for (i, t) in spec.strings().enumerate() {
                let hit = fs.entries.iter().any(|e| e.matches(i, &spec) == Some(true));
                prop_assert_eq!(satisfies(&f, &t).unwrap(), !hit);
            }
        }

        #[test]
        fn dimacs_round_trip(seed in 0u64..100, n in 3usize..8) {
            let f = planted_generator(n, seed).unwrap();
            prop_assert_eq!(parse_dimacs(&to_dimacs(&f)).unwrap(), f);
        }
    }
}
