//! Finite structural causal models with exact exogenous distributions.

mod format;
mod gen;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::num::{fmt_short, Rational};
use crate::syntax::{Event, Sym, Var};

pub use format::{parse_scm, write_scm};
pub use gen::{random_positive_scm, random_scm, ConstantMode, GenConfig};
pub(crate) use gen::composition;

/// How `V` is computed from earlier variables and the exogenous outcome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mechanism {
    /// `table[row]`, where `row` is the mixed-radix index of the parents'
    /// value positions followed by the outcome index (fastest digit).
    Table { parents: Vec<usize>, table: Vec<u32> },
    /// The constant function left by an intervention.
    Constant(u32),
}

/// An intervention: values for some endogenous variables (at most one each).
pub type Setting = BTreeMap<Var, u32>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScmError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("value {value} is outside the range of {var}")]
    OutOfRange { var: String, value: u32 },
    #[error("constant c{index} of {var} is not interpreted by the model")]
    UninterpretedConstant { var: String, index: u32 },
    #[error("free range variable {0}")]
    FreeRangeVariable(String),
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// The first invariant a model violates.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error("{var} depends on later variable {parent}: rows {row_a} and {row_b} differ only there and give {out_a} vs {out_b}")]
    NotRecursive { var: String, parent: String, row_a: String, row_b: String, out_a: u32, out_b: u32 },
    #[error("exogenous weight of `{outcome}` is negative")]
    NegativeWeight { outcome: String },
    #[error("exogenous weights sum to {sum}, not 1")]
    NotNormalized { sum: String },
    #[error("constants of {var} do not name value {value} (closed-world violation)")]
    NotSurjective { var: String, value: u32 },
    #[error("{var}: {message}")]
    BadTable { var: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scm {
    vars: Vec<Var>,
    ranges: Vec<Vec<u32>>,
    outcomes: Vec<String>,
    pmf: Vec<Rational>,
    mechanisms: Vec<Mechanism>,
    constants: Vec<Vec<u32>>,
    /// Observational solution per outcome.
    obs: Vec<Vec<u32>>,
}

impl Scm {
    /// Builds a model; ranges are sorted and deduplicated. Structural shape
    /// (table sizes, value ranges) is checked here, semantic invariants by
    /// [`Scm::validate`].
    pub fn new(
        vars: Vec<Var>,
        ranges: Vec<Vec<u32>>,
        outcomes: Vec<String>,
        pmf: Vec<Rational>,
        mechanisms: Vec<Mechanism>,
        constants: Vec<Vec<u32>>,
    ) -> Result<Self, ScmError> {
        let n = vars.len();
        if ranges.len() != n || mechanisms.len() != n || constants.len() != n {
            return Err(ScmError::Malformed("per-variable lists have different lengths".into()));
        }
        if outcomes.len() != pmf.len() || outcomes.is_empty() {
            return Err(ScmError::Malformed("need one weight per exogenous outcome and at least one outcome".into()));
        }
        let ranges: Vec<Vec<u32>> = ranges
            .into_iter()
            .map(|mut r| {
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        for (i, r) in ranges.iter().enumerate() {
            if r.is_empty() || r[0] == 0 {
                return Err(ScmError::Malformed(format!("range of {} must be non-empty positive integers", vars[i])));
            }
        }
        let mut scm = Scm { vars, ranges, outcomes, pmf, mechanisms, constants, obs: Vec::new() };
        for (i, m) in scm.mechanisms.iter().enumerate() {
            match m {
                Mechanism::Constant(v) => scm.check_value(i, *v)?,
                Mechanism::Table { parents, table } => {
                    if parents.iter().any(|&p| p >= n || p == i) {
                        return Err(ScmError::Malformed(format!("bad parent list for {}", scm.vars[i])));
                    }
                    let rows: usize =
                        parents.iter().map(|&p| scm.ranges[p].len()).product::<usize>() * scm.outcomes.len();
                    if table.len() != rows {
                        return Err(ScmError::Malformed(format!(
                            "table of {} has {} rows, expected {}",
                            scm.vars[i],
                            table.len(),
                            rows
                        )));
                    }
                    for &v in table {
                        scm.check_value(i, v)?;
                    }
                }
            }
            for &v in &scm.constants[i] {
                scm.check_value(i, v)?;
            }
        }
        scm.refresh();
        Ok(scm)
    }

    fn refresh(&mut self) {
        self.obs = (0..self.outcomes.len()).map(|u| self.solve_indexed(u, &[])).collect();
    }

    fn check_value(&self, var: usize, value: u32) -> Result<(), ScmError> {
        if self.ranges[var].binary_search(&value).is_err() {
            return Err(ScmError::OutOfRange { var: self.vars[var].to_string(), value });
        }
        Ok(())
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn var_index(&self, v: &Var) -> Option<usize> {
        self.vars.iter().position(|w| w == v)
    }

    fn index_of(&self, v: &Var) -> Result<usize, ScmError> {
        self.var_index(v).ok_or_else(|| ScmError::UnknownVariable(v.to_string()))
    }

    pub fn range(&self, i: usize) -> &[u32] {
        &self.ranges[i]
    }

    pub fn range_of(&self, v: &Var) -> Result<&[u32], ScmError> {
        Ok(&self.ranges[self.index_of(v)?])
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn pmf(&self) -> &[Rational] {
        &self.pmf
    }

    pub fn mechanism(&self, i: usize) -> &Mechanism {
        &self.mechanisms[i]
    }

    pub fn constants(&self, i: usize) -> &[u32] {
        &self.constants[i]
    }

    /// Replaces the constant interpretation of every variable.
    pub fn with_constants(&self, constants: Vec<Vec<u32>>) -> Result<Self, ScmError> {
        Scm::new(
            self.vars.clone(),
            self.ranges.clone(),
            self.outcomes.clone(),
            self.pmf.clone(),
            self.mechanisms.clone(),
            constants,
        )
    }

    /// Value denoted by `c^V_index`.
    pub fn constant_value(&self, v: &Var, index: u32) -> Result<u32, ScmError> {
        let i = self.index_of(v)?;
        self.constants[i]
            .get((index as usize).wrapping_sub(1))
            .copied()
            .ok_or(ScmError::UninterpretedConstant { var: v.to_string(), index })
    }

    /// Smallest number of constants interpreted across variables.
    pub fn constant_count(&self) -> usize {
        self.constants.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// True when every variable's constants denote pairwise-distinct values.
    pub fn constants_distinct(&self) -> bool {
        self.constants.iter().all(|c| {
            let set: BTreeSet<_> = c.iter().collect();
            set.len() == c.len()
        })
    }

    fn row_index(&self, parents: &[usize], values: &[u32], u: usize) -> usize {
        let mut row = 0;
        for &p in parents {
            let pos = self.ranges[p].binary_search(&values[p]).expect("value in range");
            row = row * self.ranges[p].len() + pos;
        }
        row * self.outcomes.len() + u
    }

    /// Checks recursiveness with respect to the declared order, pmf
    /// normalization and closed-world surjectivity, in that order.
    pub fn validate(&self) -> Result<(), Violation> {
        for (i, m) in self.mechanisms.iter().enumerate() {
            let Mechanism::Table { parents, table } = m else { continue };
            for (k, &p) in parents.iter().enumerate() {
                if p < i {
                    continue;
                }
                // Does the table actually read this later parent?
                let radix: Vec<usize> = parents.iter().map(|&q| self.ranges[q].len()).collect();
                let rows = radix.iter().product::<usize>();
                let stride: usize = radix[k + 1..].iter().product::<usize>() * self.outcomes.len();
                for base in 0..rows {
                    let digit = (base / (stride / self.outcomes.len())) % radix[k];
                    if digit != 0 {
                        continue;
                    }
                    for d in 1..radix[k] {
                        for u in 0..self.outcomes.len() {
                            let a = base * self.outcomes.len() + u;
                            let b = a + d * stride;
                            if table[a] != table[b] {
                                return Err(Violation::NotRecursive {
                                    var: self.vars[i].to_string(),
                                    parent: self.vars[p].to_string(),
                                    row_a: self.describe_row(parents, a),
                                    row_b: self.describe_row(parents, b),
                                    out_a: table[a],
                                    out_b: table[b],
                                });
                            }
                        }
                    }
                }
            }
        }
        for (o, w) in self.outcomes.iter().zip(&self.pmf) {
            if w.is_negative() {
                return Err(Violation::NegativeWeight { outcome: o.clone() });
            }
        }
        let sum: Rational = self.pmf.iter().sum();
        if !sum.is_one() {
            return Err(Violation::NotNormalized { sum: fmt_short(&sum) });
        }
        for (i, consts) in self.constants.iter().enumerate() {
            let named: BTreeSet<u32> = consts.iter().copied().collect();
            if let Some(&v) = self.ranges[i].iter().find(|v| !named.contains(v)) {
                return Err(Violation::NotSurjective { var: self.vars[i].to_string(), value: v });
            }
        }
        Ok(())
    }

    fn describe_row(&self, parents: &[usize], row: usize) -> String {
        let k = self.outcomes.len();
        let u = row % k;
        let mut rest = row / k;
        let mut parts = Vec::new();
        for &p in parents.iter().rev() {
            let r = self.ranges[p].len();
            parts.push(format!("{}={}", self.vars[p], self.ranges[p][rest % r]));
            rest /= r;
        }
        parts.reverse();
        parts.push(format!("u={}", self.outcomes[u]));
        format!("({})", parts.join(", "))
    }

    /// The intervened model `𝔐_α`.
    pub fn apply_intervention(&self, alpha: &Setting) -> Result<Scm, ScmError> {
        let mut out = self.clone();
        for (v, &value) in alpha {
            let i = self.index_of(v)?;
            self.check_value(i, value)?;
            out.mechanisms[i] = Mechanism::Constant(value);
        }
        out.refresh();
        Ok(out)
    }

    /// Values of all endogenous variables (declared order) at outcome `u`.
    pub fn solve(&self, u: usize) -> Vec<u32> {
        self.obs[u].clone()
    }

    /// As [`Scm::solve`] under an intervention given by variable position.
    pub fn solve_indexed(&self, u: usize, alpha: &[(usize, u32)]) -> Vec<u32> {
        let mut values: Vec<u32> = self.ranges.iter().map(|r| r[0]).collect();
        for i in 0..self.vars.len() {
            if let Some(&(_, v)) = alpha.iter().find(|(j, _)| *j == i) {
                values[i] = v;
                continue;
            }
            values[i] = match &self.mechanisms[i] {
                Mechanism::Constant(v) => *v,
                Mechanism::Table { parents, table } => table[self.row_index(parents, &values, u)],
            };
        }
        values
    }

    pub fn solve_with(&self, u: usize, alpha: &Setting) -> Result<Vec<u32>, ScmError> {
        let idx = self.setting_indices(alpha)?;
        Ok(self.solve_indexed(u, &idx))
    }

    fn setting_indices(&self, alpha: &Setting) -> Result<Vec<(usize, u32)>, ScmError> {
        alpha
            .iter()
            .map(|(v, &x)| {
                let i = self.index_of(v)?;
                self.check_value(i, x)?;
                Ok((i, x))
            })
            .collect()
    }

    /// Truth of a base formula at outcome `u`, resolving symbols with `resolve`.
    /// All boxes share the same `u`.
    pub fn event_holds(
        &self,
        e: &Event,
        u: usize,
        obs: &[u32],
        resolve: &dyn Fn(&Sym) -> Result<u32, ScmError>,
    ) -> Result<bool, ScmError> {
        Ok(match e {
            Event::Top => true,
            Event::Atom(s) => obs[self.index_of(s.var())?] == resolve(s)?,
            Event::Not(x) => !self.event_holds(x, u, obs, resolve)?,
            Event::And(a, b) => self.event_holds(a, u, obs, resolve)? && self.event_holds(b, u, obs, resolve)?,
            Event::Box(int, body) => {
                let mut alpha = Vec::with_capacity(int.atoms().len());
                for s in int.atoms() {
                    let i = self.index_of(s.var())?;
                    let v = resolve(s)?;
                    self.check_value(i, v)?;
                    alpha.push((i, v));
                }
                let values = if alpha.is_empty() { obs.to_vec() } else { self.solve_indexed(u, &alpha) };
                self.event_holds(body, u, &values, resolve)?
            }
        })
    }

    /// `ℙ(δ)` with symbols resolved by `resolve`.
    pub fn event_probability_with(
        &self,
        e: &Event,
        resolve: &dyn Fn(&Sym) -> Result<u32, ScmError>,
    ) -> Result<Rational, ScmError> {
        let mut total = Rational::zero();
        for (u, w) in self.pmf.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            if self.event_holds(e, u, &self.obs[u], resolve)? {
                total += w;
            }
        }
        Ok(total)
    }

    /// `ℙ(δ)` for a base formula without free range variables.
    pub fn event_probability(&self, e: &Event) -> Result<Rational, ScmError> {
        self.event_probability_with(e, &|s| self.resolve_constant(s))
    }

    pub fn resolve_constant(&self, s: &Sym) -> Result<u32, ScmError> {
        match s {
            Sym::Const { var, index } => self.constant_value(var, *index),
            Sym::Range(rv) => Err(ScmError::FreeRangeVariable(rv.to_string())),
        }
    }

    /// Distribution of complete endogenous assignments under `alpha`.
    pub fn joint_distribution(&self, alpha: &Setting) -> Result<BTreeMap<Vec<u32>, Rational>, ScmError> {
        let idx = self.setting_indices(alpha)?;
        let mut out: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
        for (u, w) in self.pmf.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            *out.entry(self.solve_indexed(u, &idx)).or_insert_with(Rational::zero) += w;
        }
        Ok(out)
    }

    /// Every complete assignment has positive observational probability.
    pub fn check_positivity(&self) -> bool {
        let cells: usize = self.ranges.iter().map(Vec::len).product();
        self.joint_distribution(&Setting::new()).map(|d| d.len() == cells).unwrap_or(false)
    }

    /// All `V_i ⇝ V_j` among `vars`: some interventions differing only on
    /// `V_i` give `V_j` different values with positive probability.
    pub fn induced_influences(&self, vars: &[Var]) -> Result<BTreeSet<(Var, Var)>, ScmError> {
        let idx: Vec<usize> = vars.iter().map(|v| self.index_of(v)).collect::<Result<_, _>>()?;
        let live: Vec<usize> = (0..self.outcomes.len()).filter(|&u| !self.pmf[u].is_zero()).collect();
        let mut out = BTreeSet::new();
        for &i in &idx {
            for &j in &idx {
                if i == j {
                    continue;
                }
                let others: Vec<usize> = idx.iter().copied().filter(|&k| k != i && k != j).collect();
                if self.influences(i, j, &others, &live) {
                    out.insert((self.vars[i].clone(), self.vars[j].clone()));
                }
            }
        }
        Ok(out)
    }

    fn influences(&self, i: usize, j: usize, others: &[usize], live: &[usize]) -> bool {
        for mask in 0u32..(1 << others.len()) {
            let chosen: Vec<usize> =
                others.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &k)| k).collect();
            let mut settings = vec![Vec::<(usize, u32)>::new()];
            for &k in &chosen {
                settings = settings
                    .into_iter()
                    .flat_map(|s| {
                        self.ranges[k].iter().map(move |&v| {
                            let mut s = s.clone();
                            s.push((k, v));
                            s
                        })
                    })
                    .collect();
            }
            for base in &settings {
                for &u in live {
                    let mut seen: Option<u32> = None;
                    for &a in &self.ranges[i] {
                        let mut alpha = base.clone();
                        alpha.push((i, a));
                        let vj = self.solve_indexed(u, &alpha)[j];
                        match seen {
                            None => seen = Some(vj),
                            Some(prev) if prev != vj => return true,
                            _ => {}
                        }
                    }
                }
            }
        }
        false
    }
}

impl fmt::Display for Scm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_scm(self))
    }
}
