//! Solver-agnostic MILP representation.
//!
//! Variables and constraints are kept in insertion order and addressed through
//! stable integer handles. Nothing in here iterates a hash map, so two models
//! built by the same sequence of calls are identical down to the byte when
//! exported.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Handle to a variable; stable for the lifetime of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// Handle to a constraint row; stable for the lifetime of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
    /// General bounded integer.
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    /// Branching priority; fractional variables of the highest priority are
    /// branched on first.
    #[serde(default)]
    pub priority: i32,
}

/// Declaration passed to [`MilpModel::add_variable`].
#[derive(Debug, Clone, PartialEq)]
pub struct VarSpec {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

impl VarSpec {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), kind: VarKind::Continuous, lower, upper }
    }

    /// Binary variable; bounds are always `[0, 1]`.
    pub fn binary(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: VarKind::Binary, lower: 0.0, upper: 1.0 }
    }

    pub fn integer(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), kind: VarKind::Integer, lower, upper }
    }
}

/// Affine expression `Σ coef·var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self { terms: Vec::new(), constant: value }
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        Self { terms: vec![(var, coef)], constant: 0.0 }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (VarId, f64)>) -> Self {
        Self { terms: terms.into_iter().collect(), constant: 0.0 }
    }

    pub fn add(mut self, var: VarId, coef: f64) -> Self {
        self.terms.push((var, coef));
        self
    }

    pub fn push(&mut self, var: VarId, coef: f64) {
        self.terms.push((var, coef));
    }

    pub fn add_constant(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    /// `self + factor·other`
    pub fn add_scaled(mut self, other: &LinExpr, factor: f64) -> Self {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * factor)));
        self.constant += other.constant * factor;
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        LinExpr::new().add_scaled(self, factor)
    }

    /// Merges repeated variables, keeping first-occurrence order, and drops exact zeros.
    pub fn normalized(&self) -> Self {
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match out.iter_mut().find(|(w, _)| *w == v) {
                Some(slot) => slot.1 += c,
                None => out.push((v, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        Self { terms: out, constant: self.constant }
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Linear part only; constants are folded into `rhs` on insertion.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Signed violation (≤ 0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.activity(values);
        match self.sense {
            Sense::Le => act - self.rhs,
            Sense::Ge => self.rhs - act,
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: ObjSense,
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

/// Row/column counts of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SizeReport {
    pub rows: usize,
    pub continuous: usize,
    pub binaries: usize,
    pub integers: usize,
}

/// Findings that do not make a model invalid but are probably unintended.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LintReport {
    pub vacuous_rows: Vec<String>,
    pub unused_variables: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    name: String,
    variables: Vec<Variable>,
    constraints: Vec<Option<Constraint>>,
    objective: Objective,
    names: std::collections::BTreeMap<String, VarId>,
    row_names: std::collections::BTreeMap<String, RowId>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Objective { sense: ObjSense::Minimize, terms: Vec::new(), constant: 0.0 },
            names: Default::default(),
            row_names: Default::default(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_variable(&mut self, spec: VarSpec) -> Result<VarId, ModelError> {
        check_name(&spec.name)?;
        if self.names.contains_key(&spec.name) {
            return Err(ModelError::DuplicateVariable(spec.name));
        }
        let (lower, upper) = match spec.kind {
            VarKind::Binary => (spec.lower.max(0.0), spec.upper.min(1.0)),
            _ => (spec.lower, spec.upper),
        };
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ModelError::InvertedBounds { name: spec.name, lower, upper });
        }
        if spec.kind.is_integral() && (lower == f64::INFINITY || upper == f64::NEG_INFINITY) {
            return Err(ModelError::InvertedBounds { name: spec.name, lower, upper });
        }
        let id = VarId(self.variables.len());
        self.names.insert(spec.name.clone(), id);
        self.variables.push(Variable { name: spec.name, kind: spec.kind, lower, upper, priority: 0 });
        Ok(id)
    }

    /// Adds `expr sense rhs`. A constant in `expr` is moved to the right-hand side.
    pub fn add_constraint(
        &mut self,
        expr: &LinExpr,
        sense: Sense,
        rhs: f64,
        name: impl Into<String>,
    ) -> Result<RowId, ModelError> {
        let name = name.into();
        check_name(&name)?;
        if self.row_names.contains_key(&name) {
            return Err(ModelError::DuplicateConstraint(name));
        }
        let constraint = self.make_row(expr, sense, rhs, name.clone())?;
        let id = RowId(self.constraints.len());
        self.row_names.insert(name, id);
        self.constraints.push(Some(constraint));
        Ok(id)
    }

    /// Replaces the body of an existing row, keeping its name and handle.
    pub fn replace_constraint(
        &mut self,
        row: RowId,
        expr: &LinExpr,
        sense: Sense,
        rhs: f64,
    ) -> Result<(), ModelError> {
        let name = self.constraint(row).ok_or(ModelError::UnknownRow(row.0))?.name.clone();
        let constraint = self.make_row(expr, sense, rhs, name)?;
        self.constraints[row.0] = Some(constraint);
        Ok(())
    }

    /// Removes a row. Other handles stay valid; the removed handle becomes dead.
    pub fn remove_constraint(&mut self, row: RowId) -> Result<(), ModelError> {
        let removed = self
            .constraints
            .get_mut(row.0)
            .and_then(Option::take)
            .ok_or(ModelError::UnknownRow(row.0))?;
        self.row_names.remove(&removed.name);
        Ok(())
    }

    fn make_row(
        &self,
        expr: &LinExpr,
        sense: Sense,
        rhs: f64,
        name: String,
    ) -> Result<Constraint, ModelError> {
        self.check_terms(&expr.terms)?;
        if !rhs.is_finite() || !expr.constant.is_finite() {
            return Err(ModelError::NonFiniteCoefficient(name));
        }
        let expr = expr.normalized();
        if expr.terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(ModelError::NonFiniteCoefficient(name));
        }
        Ok(Constraint { name, terms: expr.terms, sense, rhs: rhs - expr.constant })
    }

    fn check_terms(&self, terms: &[(VarId, f64)]) -> Result<(), ModelError> {
        match terms.iter().find(|(v, _)| v.0 >= self.variables.len()) {
            Some((v, _)) => Err(ModelError::UnknownVariable(format!("#{}", v.0))),
            None => Ok(()),
        }
    }

    pub fn set_objective(&mut self, sense: ObjSense, expr: &LinExpr) -> Result<(), ModelError> {
        self.check_terms(&expr.terms)?;
        let expr = expr.normalized();
        self.objective = Objective { sense, terms: expr.terms, constant: expr.constant };
        Ok(())
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    /// Tightens bounds of an existing variable.
    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) -> Result<(), ModelError> {
        let var = self.variables.get_mut(id.0).ok_or(ModelError::UnknownVariable(format!("#{}", id.0)))?;
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ModelError::InvertedBounds { name: var.name.clone(), lower, upper });
        }
        var.lower = lower;
        var.upper = upper;
        Ok(())
    }

    pub fn set_priority(&mut self, id: VarId, priority: i32) -> Result<(), ModelError> {
        let var = self.variables.get_mut(id.0).ok_or(ModelError::UnknownVariable(format!("#{}", id.0)))?;
        var.priority = priority;
        Ok(())
    }

    pub fn constraint(&self, id: RowId) -> Option<&Constraint> {
        self.constraints.get(id.0).and_then(Option::as_ref)
    }

    /// Live constraints in insertion order.
    pub fn constraints(&self) -> impl Iterator<Item = (RowId, &Constraint)> {
        self.constraints
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (RowId(i), c)))
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.iter().filter(|c| c.is_some()).count()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn size_report(&self) -> SizeReport {
        let mut report = SizeReport { rows: self.num_rows(), ..SizeReport::default() };
        for v in &self.variables {
            match v.kind {
                VarKind::Continuous => report.continuous += 1,
                VarKind::Binary => report.binaries += 1,
                VarKind::Integer => report.integers += 1,
            }
        }
        report
    }

    pub fn lint(&self) -> LintReport {
        let mut used = vec![false; self.variables.len()];
        let mut report = LintReport::default();
        for (_, c) in self.constraints() {
            if c.terms.is_empty() {
                report.vacuous_rows.push(c.name.clone());
            }
            for (v, _) in &c.terms {
                used[v.0] = true;
            }
        }
        for (v, _) in &self.objective.terms {
            used[v.0] = true;
        }
        report.unused_variables = self
            .variables
            .iter()
            .zip(&used)
            .filter(|(_, u)| !**u)
            .map(|(v, _)| v.name.clone())
            .collect();
        report
    }

    /// Largest constraint violation and bound violation of an assignment.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self.constraints().map(|(_, c)| c.violation(values)).fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.constant + self.objective.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

/// Names end up verbatim in LP files, so keep them to a conservative character set.
fn check_name(name: &str) -> Result<(), ModelError> {
    let bad = || ModelError::InvalidName(name.to_string());
    let first = name.chars().next().ok_or_else(bad)?;
    if first.is_ascii_digit() || first == '.' || name.len() > 255 {
        return Err(bad());
    }
    if name.chars().all(|c| c.is_ascii_alphanumeric() || "_.#$%&()!,;?@{}~'".contains(c)) {
        Ok(())
    } else {
        Err(bad())
    }
}
